#include "cbo/objective.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace cbo {

Objective::Objective(Index dimension, ValueFn value, GradientFn gradient, std::size_t batch_count)
    : dimension_(dimension), value_(std::move(value)), gradient_(std::move(gradient)), batch_count_(batch_count) {
    if (dimension_ < 1) throw Error("objective dimension must be >= 1");
    if (batch_count_ < 1) throw Error("objective batch count must be >= 1");
    if (!value_) throw Error("objective requires a value function");
}

Vector Objective::grad(VectorCRef x, std::size_t batch) const {
    if (!gradient_) throw Error("objective has no gradient");
    return gradient_(x, batch);
}

double rastrigin(VectorCRef x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double total = 0.0;
    for (Index k = 0; k < x.size(); ++k) {
        total += x[k] * x[k] + 2.5 * (1.0 - std::cos(two_pi * x[k]));
    }
    return total;
}

Vector rastrigin_grad(VectorCRef x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Vector g(x.size());
    for (Index k = 0; k < x.size(); ++k) {
        g[k] = 2.0 * x[k] + 5.0 * std::numbers::pi * std::sin(two_pi * x[k]);
    }
    return g;
}

double sphere(VectorCRef x) { return x.squaredNorm(); }

Objective make_rastrigin(Index d) {
    return Objective(
        d, [](VectorCRef x, std::size_t) { return rastrigin(x); },
        [](VectorCRef x, std::size_t) { return rastrigin_grad(x); });
}

Objective make_sphere(Index d) {
    return Objective(
        d, [](VectorCRef x, std::size_t) { return sphere(x); },
        [](VectorCRef x, std::size_t) -> Vector { return 2.0 * x; });
}

Matrix toy_batch_centers(Index d, std::size_t n_batches) {
    if (d < 1 || n_batches < 1) throw Error("toy objective needs d >= 1 and n_batches >= 1");
    Matrix centers = Matrix::Zero(static_cast<Index>(n_batches), d);
    if (n_batches == 1) return centers;
    for (Index b = 0; b < centers.rows(); ++b) {
        for (Index k = 0; k < d; ++k) {
            centers(b, k) = 0.25 * std::sin(1.0 + 2.3 * static_cast<double>(b) + 0.7 * static_cast<double>(k));
        }
    }
    Eigen::RowVectorXd mean = centers.colwise().mean();
    centers.rowwise() -= mean;
    return centers;
}

Objective toy_stochastic_objective(Index d, std::size_t n_batches) {
    auto centers = std::make_shared<const Matrix>(toy_batch_centers(d, n_batches));
    auto value = [centers](VectorCRef x, std::size_t batch) {
        if (batch == Objective::kFullData) {
            double total = 0.0;
            for (Index b = 0; b < centers->rows(); ++b) total += (x - centers->row(b).transpose()).squaredNorm();
            return total / static_cast<double>(centers->rows());
        }
        return (x - centers->row(static_cast<Index>(batch)).transpose()).squaredNorm();
    };
    auto gradient = [centers](VectorCRef x, std::size_t batch) -> Vector {
        if (batch == Objective::kFullData) {
            Vector mean = centers->colwise().mean().transpose();
            return 2.0 * (x - mean);
        }
        return 2.0 * (x - centers->row(static_cast<Index>(batch)).transpose());
    };
    return Objective(d, value, gradient, n_batches);
}

Vector finite_diff_grad(const Objective& obj, VectorCRef x, double h) {
    if (!(h > 0.0)) throw Error("finite difference step must be positive");
    Vector g(x.size());
    Vector probe = x;
    for (Index k = 0; k < x.size(); ++k) {
        const double orig = probe[k];
        probe[k] = orig + h;
        const double up = obj(probe);
        probe[k] = orig - h;
        const double down = obj(probe);
        probe[k] = orig;
        g[k] = (up - down) / (2.0 * h);
    }
    return g;
}

namespace {

double signum(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace

double cs_eval(const CsInstance& inst, VectorCRef x) {
    const Vector residual = inst.A * x - inst.b;
    double penalty = 0.0;
    if (inst.p == 1.0) {
        penalty = x.lpNorm<1>();
    } else {
        for (Index k = 0; k < x.size(); ++k) penalty += std::pow(std::abs(x[k]), inst.p);
    }
    return 0.5 * residual.squaredNorm() + inst.mu * penalty;
}

Vector cs_grad(const CsInstance& inst, VectorCRef x, double smoothing_eps) {
    Vector g = inst.A.transpose() * (inst.A * x - inst.b);
    for (Index k = 0; k < x.size(); ++k) {
        const double s = signum(x[k]);
        if (s == 0.0) continue;
        if (inst.p == 1.0) {
            g[k] += inst.mu * s;
        } else {
            g[k] += inst.mu * s * inst.p * std::pow(std::abs(x[k]) + smoothing_eps, inst.p - 1.0);
        }
    }
    return g;
}

Objective make_cs_objective(std::shared_ptr<const CsInstance> inst, double smoothing_eps) {
    if (!inst) throw Error("null compressed-sensing instance");
    const Index d = inst->dimension();
    return Objective(
        d, [inst](VectorCRef x, std::size_t) { return cs_eval(*inst, x); },
        [inst, smoothing_eps](VectorCRef x, std::size_t) { return cs_grad(*inst, x, smoothing_eps); });
}

}  // namespace cbo
