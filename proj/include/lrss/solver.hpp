#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "lrss/cube.hpp"
#include "lrss/dictionary.hpp"
#include "lrss/error.hpp"

namespace lrss {

struct SolverConfig {
    int rank = 0;
    int sparsity = 0;
    int max_iters = 100;
    double rel_tol = 1e-6;
    bool nonnegative_flux = true;
};

/// Output of the alternating decomposition Y ~ L + X.
struct Decomposition {
    Cube low_rank;   // L, background
    Cube foreground; // X = sum coeffs[i] * atom(support[i]), exact by construction
    std::vector<int> support;     // selected atom ids, ascending
    std::vector<double> coeffs;   // aligned with support
    std::vector<double> correlation_map; // <Y - L, atom_a> at convergence, signed, per atom
    int iters_run = 0;
    bool converged = false;
    bool gram_fallback = false; // some refit fell back to thresholded correlations
    int monotonicity_violations = 0; // iterations where the objective rose (recorded, never silent)
    std::vector<double> objective_trace; // ||Y - L - X||_F per iteration
};

using Matrix = Eigen::MatrixXd;
using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Frames-as-rows matricization, T x (H*W).
inline Matrix matricize(const Cube& cube) {
    return RowMajorMap(cube.v.data(), cube.n_frames,
                       static_cast<Eigen::Index>(cube.frame_size()));
}

inline Cube dematricize(const Matrix& m, int t, int h, int w) {
    Cube cube(t, h, w);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cube.v.data(), m.rows(), m.cols()) = m;
    return cube;
}

/// Best rank-r Frobenius approximation via truncated SVD. r = 0 gives the
/// zero matrix; r = min(rows, cols) returns the input unchanged. Under
/// repeated singular values only the optimal error is guaranteed, not a
/// unique matrix (the truncated subspace is then non-unique).
inline Matrix rank_project(const Matrix& m, int r) {
    const Eigen::Index mindim = std::min(m.rows(), m.cols());
    if (r < 0 || r > mindim)
        throw InvalidArgument("rank_project: rank must be in [0, min(rows, cols)]");
    if (r == 0) return Matrix::Zero(m.rows(), m.cols());
    if (r == mindim) return m;
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU().leftCols(r) *
           svd.singularValues().head(r).asDiagonal() *
           svd.matrixV().leftCols(r).transpose();
}

struct SparseFit {
    std::vector<int> support;
    std::vector<double> coeffs;
    Cube x;
    bool gram_fallback = false;
};

/// Structured-sparse projection: rank atoms by |correlation| (negatives
/// clamped to zero first when nonnegative_flux), keep the top s (ties to the
/// lowest atom_id), then refit the kept coefficients by least squares on the
/// selected sub-dictionary. A singular Gram system falls back to the
/// thresholded correlation values and sets the diagnostics flag.
inline SparseFit sparse_project(const Cube& residual, const TrajectoryDictionary& dict,
                                int s, bool nonnegative_flux) {
    if (s < 0) throw InvalidArgument("sparse_project: sparsity must be >= 0");
    if (s > dict.n_atoms())
        throw InvalidArgument("sparse_project: sparsity exceeds atom count");
    SparseFit fit;
    fit.x = Cube(residual.n_frames, residual.height, residual.width);
    if (s == 0) return fit;

    const std::vector<double> raw = correlate_all_exact(dict, residual);
    std::vector<double> ranked = raw;
    if (nonnegative_flux)
        for (double& c : ranked) c = std::max(c, 0.0);

    std::vector<int> order(ranked.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double fa = std::abs(ranked[static_cast<size_t>(a)]);
        const double fb = std::abs(ranked[static_cast<size_t>(b)]);
        if (fa != fb) return fa > fb;
        return a < b;
    });

    std::vector<int> selected;
    for (int id : order) {
        if (static_cast<int>(selected.size()) == s) break;
        if (ranked[static_cast<size_t>(id)] == 0.0) break;
        selected.push_back(id);
    }
    std::sort(selected.begin(), selected.end());
    if (selected.empty()) return fit;

    const int ns = static_cast<int>(selected.size());
    Matrix gram(ns, ns);
    Eigen::VectorXd rhs(ns);
    for (int i = 0; i < ns; ++i) {
        rhs(i) = raw[static_cast<size_t>(selected[static_cast<size_t>(i)])];
        for (int j = 0; j <= i; ++j) {
            const double g = atom_inner_product(dict, selected[static_cast<size_t>(i)],
                                                selected[static_cast<size_t>(j)]);
            gram(i, j) = g;
            gram(j, i) = g;
        }
    }
    Eigen::VectorXd beta;
    Eigen::FullPivLU<Matrix> lu(gram);
    if (lu.isInvertible()) {
        beta = lu.solve(rhs);
    } else {
        fit.gram_fallback = true;
        beta.resize(ns);
        for (int i = 0; i < ns; ++i)
            beta(i) = ranked[static_cast<size_t>(selected[static_cast<size_t>(i)])];
    }
    if (nonnegative_flux)
        for (int i = 0; i < ns; ++i) beta(i) = std::max(beta(i), 0.0);

    for (int i = 0; i < ns; ++i) {
        if (beta(i) == 0.0) continue;
        const int id = selected[static_cast<size_t>(i)];
        fit.support.push_back(id);
        fit.coeffs.push_back(beta(i));
        for (const auto& e : dict.entries(id))
            fit.x.v[static_cast<size_t>(e.index)] += beta(i) * e.value;
    }
    return fit;
}

/// Alternating iterative hard thresholding:
///   X <- 0; repeat { L <- rank_project(Y - X, r); (support, coeffs, X) <-
///   sparse_project(Y - L, s); } until the relative change of ||Y - L - X||_F
///   drops below rel_tol (or the residual hits the 1e-12 * ||Y||_F floor, or
///   max_iters is reached). Deterministic for fixed inputs.
inline Decomposition solve(const AdiCube& y, const TrajectoryDictionary& dict,
                           const SolverConfig& cfg) {
    validate_adi_cube(y, "solve");
    if (!dict.shape_matches(y.frames))
        throw InvalidArgument("solve: dictionary shape does not match cube");
    const int t = y.frames.n_frames, h = y.frames.height, w = y.frames.width;
    const Eigen::Index mindim = std::min<Eigen::Index>(t, static_cast<Eigen::Index>(h) * w);
    if (cfg.rank < 0 || cfg.rank > mindim)
        throw InvalidArgument("solve: rank must be in [0, min(T, H*W)]");
    if (cfg.sparsity < 0 || cfg.sparsity > dict.n_atoms())
        throw InvalidArgument("solve: sparsity must be in [0, n_atoms]");
    if (cfg.max_iters < 1) throw InvalidArgument("solve: max_iters must be >= 1");
    if (!(cfg.rel_tol > 0.0)) throw InvalidArgument("solve: rel_tol must be > 0");

    const Matrix ymat = matricize(y.frames);
    const double ynorm = ymat.norm();
    const double floor = 1e-12 * ynorm;

    Decomposition dec;
    Matrix xmat = Matrix::Zero(t, static_cast<Eigen::Index>(h) * w);
    Matrix lmat;
    SparseFit fit;
    double prev_obj = -1.0;
    for (int it = 0; it < cfg.max_iters; ++it) {
        lmat = rank_project(ymat - xmat, cfg.rank);
        fit = sparse_project(dematricize(ymat - lmat, t, h, w), dict, cfg.sparsity,
                             cfg.nonnegative_flux);
        dec.gram_fallback = dec.gram_fallback || fit.gram_fallback;
        xmat = matricize(fit.x);
        const double obj = (ymat - lmat - xmat).norm();
        if (prev_obj >= 0.0 && obj > prev_obj * (1.0 + 1e-9) + 1e-15)
            ++dec.monotonicity_violations;
        dec.objective_trace.push_back(obj);
        dec.iters_run = it + 1;
        if (obj <= floor) {
            dec.converged = true;
            break;
        }
        if (prev_obj >= 0.0) {
            const double rel = std::abs(prev_obj - obj) / std::max(prev_obj, 1e-300);
            if (rel < cfg.rel_tol) {
                dec.converged = true;
                break;
            }
        }
        prev_obj = obj;
    }

    dec.low_rank = dematricize(lmat, t, h, w);
    dec.foreground = fit.x;
    dec.support = fit.support;
    dec.coeffs = fit.coeffs;
    dec.correlation_map = correlate_all_exact(dict, dematricize(ymat - lmat, t, h, w));
    return dec;
}

/// Sky-frame score surfaces. support_map holds |coeff| at each supported
/// atom's rounded ref_pos; correlation_map holds the signed final
/// <Y - L, atom> value at every atom's rounded ref_pos (thresholding uses its
/// absolute value).
struct DetectionMaps {
    Image support_map;
    Image correlation_map;
};

inline DetectionMaps detection_map(const Decomposition& dec, const TrajectoryDictionary& dict) {
    DetectionMaps maps{Image(dict.height, dict.width), Image(dict.height, dict.width)};
    for (size_t i = 0; i < dec.support.size(); ++i) {
        const auto& atom = dict.atom(dec.support[i]);
        const int r = static_cast<int>(std::lround(atom.ref_pos.row));
        const int c = static_cast<int>(std::lround(atom.ref_pos.col));
        if (maps.support_map.inside(r, c))
            maps.support_map.at(r, c) = std::abs(dec.coeffs[i]);
    }
    if (dec.correlation_map.size() == static_cast<size_t>(dict.n_atoms())) {
        for (int a = 0; a < dict.n_atoms(); ++a) {
            const auto& atom = dict.atom(a);
            const int r = static_cast<int>(std::lround(atom.ref_pos.row));
            const int c = static_cast<int>(std::lround(atom.ref_pos.col));
            if (maps.correlation_map.inside(r, c))
                maps.correlation_map.at(r, c) = dec.correlation_map[static_cast<size_t>(a)];
        }
    }
    return maps;
}

} // namespace lrss
