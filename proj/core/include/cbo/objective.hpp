#pragma once

#include "cbo/rng.hpp"
#include "cbo/types.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

namespace cbo {

/// Objective E with optional analytic gradient and optional mini-batching.
///
/// A batched objective is a family E_b, b = 0..batch_count()-1; the full-data
/// objective is addressed with `kFullData`. Instances are immutable and safe
/// to evaluate concurrently.
class Objective {
public:
    static constexpr std::size_t kFullData = std::numeric_limits<std::size_t>::max();

    using ValueFn = std::function<double(VectorCRef, std::size_t)>;
    using GradientFn = std::function<Vector(VectorCRef, std::size_t)>;

    Objective(Index dimension, ValueFn value, GradientFn gradient = {}, std::size_t batch_count = 1);

    Index dimension() const noexcept { return dimension_; }
    std::size_t batch_count() const noexcept { return batch_count_; }
    bool batched() const noexcept { return batch_count_ > 1; }
    bool has_gradient() const noexcept { return static_cast<bool>(gradient_); }

    double operator()(VectorCRef x) const { return value_(x, kFullData); }
    double eval(VectorCRef x, std::size_t batch = kFullData) const { return value_(x, batch); }

    /// Throws if no gradient was supplied.
    Vector grad(VectorCRef x, std::size_t batch = kFullData) const;

private:
    Index dimension_;
    ValueFn value_;
    GradientFn gradient_;
    std::size_t batch_count_;
};

double rastrigin(VectorCRef x);
Vector rastrigin_grad(VectorCRef x);
double sphere(VectorCRef x);

Objective make_rastrigin(Index d);
Objective make_sphere(Index d);

/// Batches E_b(x) = ||x - c_b||^2 whose centers average to zero, so the
/// full-data minimizer is the origin. n_batches = 1 is the plain sphere.
Objective toy_stochastic_objective(Index d, std::size_t n_batches);

/// Batch centers used by toy_stochastic_objective, one per row.
Matrix toy_batch_centers(Index d, std::size_t n_batches);

/// Central differences (E(x+h e_k) - E(x-h e_k)) / 2h on the full-data objective.
Vector finite_diff_grad(const Objective& obj, VectorCRef x, double h);

/// l_p-regularized least squares 1/2 ||Ax-b||^2 + mu ||x||_p^p.
struct CsInstance {
    Matrix A;
    Vector b;
    double mu = 0.01;
    double p = 1.0;
    std::optional<Vector> ground_truth;
    Index sparsity = 0;

    Index dimension() const noexcept { return A.cols(); }
    Index measurements() const noexcept { return A.rows(); }
};

inline constexpr double kDefaultSmoothing = 1e-8;

double cs_eval(const CsInstance& inst, VectorCRef x);

/// A^T(Ax-b) + mu g with g_k = sign(x_k) for p = 1 and
/// sign(x_k) p (|x_k| + eps)^(p-1) otherwise; g_k = 0 whenever x_k = 0.
Vector cs_grad(const CsInstance& inst, VectorCRef x, double smoothing_eps = kDefaultSmoothing);

/// Gaussian A with variance 1/m, s-sparse x* (support uniform without
/// replacement, values N(0,1) with magnitude floored at 0.1), b = A x*.
CsInstance generate_cs_instance(Index d, Index m, Index s, double mu, double p, const RngStream& rng);

Objective make_cs_objective(std::shared_ptr<const CsInstance> inst, double smoothing_eps = kDefaultSmoothing);

/// Plain-text format: "d m s mu p", then A row-major, then b, then x*.
void write_cs_instance(const CsInstance& inst, const std::string& path);
CsInstance read_cs_instance(const std::string& path);
std::string format_cs_instance(const CsInstance& inst);
CsInstance parse_cs_instance(const std::string& text);

}  // namespace cbo
