#pragma once

#include <stdexcept>
#include <string>

namespace mute {

/// Configuration that cannot be satisfied (e.g. more codewords requested
/// than distinct K-hot words exist, or an exact search space over the cap).
class infeasible_error : public std::runtime_error {
public:
    explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input document (JSON codebook, CSV matrix/dataset).
class parse_error : public std::runtime_error {
public:
    explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

/// Failure to open, read or write a file.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss.
class divergence_error : public std::runtime_error {
public:
    explicit divergence_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mute
