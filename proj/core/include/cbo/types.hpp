#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cbo {

/// Row-major so that each particle is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

using VectorCRef = Eigen::Ref<const Vector>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an update produces a non-finite coordinate.
class DivergedEnsemble : public Error {
public:
    explicit DivergedEnsemble(std::uint64_t step)
        : Error("diverged ensemble at step " + std::to_string(step)), step_(step) {}

    std::uint64_t step() const noexcept { return step_; }

private:
    std::uint64_t step_;
};

}  // namespace cbo
