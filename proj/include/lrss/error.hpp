#pragma once

#include <stdexcept>
#include <string>

namespace lrss {

/// Invalid arguments or violated preconditions.
class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Malformed on-disk container (wrong magic strings, byte counts, header fields).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structurally valid file with unusable payload (non-finite values, bad shapes).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem-level failure (unreadable/unwritable paths).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Atom whose swept PSF never intersects the frame.
class DegenerateAtomError : public std::runtime_error {
public:
    explicit DegenerateAtomError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace lrss
