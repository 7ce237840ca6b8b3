#include "cbo/theory.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cbo {

void AssumptionConstants::validate() const {
    if (!(eta > 0.0)) throw Error("invalid constant eta: must be > 0");
    if (!(nu > 0.0)) throw Error("invalid constant nu: must be > 0");
    if (!(R0 > 0.0)) throw Error("invalid constant R0: must be > 0");
    if (!(E_inf > 0.0)) throw Error("invalid constant E_inf: must be > 0");
    if (C_grad && !(*C_grad >= 0.0)) throw Error("invalid constant C_grad: must be >= 0");
}

namespace {

double gradient_constant(const CboParams& params, const AssumptionConstants& constants) {
    if (params.lambda3 != 0.0 || params.sigma3 != 0.0) {
        if (!constants.C_grad) throw Error("C_grad is required when lambda3 or sigma3 is nonzero");
        return *constants.C_grad;
    }
    return constants.C_grad.value_or(0.0);
}

}  // namespace

Rates chi_rates(const CboParams& p, const AssumptionConstants& constants) {
    const double C = gradient_constant(p, constants);
    const double s1 = p.sigma1 * p.sigma1;
    const double s2 = p.sigma2 * p.sigma2;
    const double s3 = p.sigma3 * p.sigma3;
    const double memory_gain = 2.0 * p.kappa * p.theta;

    Rates rates;
    rates.chi1 = std::min(p.lambda1 - p.lambda2 - 3.0 * p.lambda3 * C - 2.0 * s1 - 2.0 * s3 * C * C,
                          memory_gain + p.lambda2 - p.lambda1 - p.lambda3 * C - 2.0 * s2);
    rates.chi2 = std::max(3.0 * p.lambda1 + p.lambda2 + 3.0 * p.lambda3 * C - 2.0 * s1 + 2.0 * s3 * C * C,
                          memory_gain + 3.0 * p.lambda2 + p.lambda1 + p.lambda3 * C - 2.0 * s2);
    return rates;
}

Rates chi_rates_memoryless(const CboParams& p, const AssumptionConstants& constants) {
    const double C = gradient_constant(p, constants);
    const double s1 = p.sigma1 * p.sigma1;
    const double s3 = p.sigma3 * p.sigma3;
    Rates rates;
    rates.chi1 = 2.0 * p.lambda1 - 2.0 * p.lambda3 * C - s1 - s3 * C * C;
    rates.chi2 = 2.0 * p.lambda1 + 2.0 * p.lambda3 * C - s1 + s3 * C * C;
    return rates;
}

HorizonReport time_horizon_star(double V0, double eps, double vartheta, double chi1, std::optional<double> chi2) {
    if (!(eps > 0.0) || !(eps < V0)) throw Error("time horizon requires 0 < eps < V0");
    if (!(vartheta >= 0.0 && vartheta < 1.0)) throw Error("time horizon requires vartheta in [0, 1)");
    if (!(chi1 > 0.0)) throw Error("no convergence guarantee: chi1 <= 0");
    HorizonReport report;
    report.t_star = std::log(V0 / eps) / ((1.0 - vartheta) * chi1);
    if (chi2) {
        if (!(*chi2 > 0.0)) throw Error("no convergence guarantee: chi2 <= 0");
        report.lower_bracket = (1.0 - vartheta) * chi1 / ((1.0 + 0.5 * vartheta) * *chi2) * report.t_star;
    }
    return report;
}

LyapunovValue lyapunov_V(const Ensemble& ens, VectorCRef x_star) {
    if (x_star.size() != ens.dimension()) throw Error("lyapunov_V: x_star dimension mismatch");
    const Eigen::RowVectorXd target = x_star.transpose();
    LyapunovValue v;
    for (Index i = 0; i < ens.size(); ++i) {
        v.position_part += (ens.positions.row(i) - target).squaredNorm();
        v.memory_part += (ens.memories.row(i) - ens.positions.row(i)).squaredNorm();
    }
    const double scale = 0.5 / static_cast<double>(ens.size());
    v.position_part *= scale;
    v.memory_part *= scale;
    v.total = v.position_part + v.memory_part;
    return v;
}

double wasserstein2_to_dirac(const Ensemble& ens, VectorCRef x_star) {
    if (x_star.size() != ens.dimension()) throw Error("wasserstein2_to_dirac: x_star dimension mismatch");
    const Eigen::RowVectorXd target = x_star.transpose();
    double total = 0.0;
    for (Index i = 0; i < ens.size(); ++i) {
        total += (ens.positions.row(i) - target).squaredNorm() + (ens.memories.row(i) - target).squaredNorm();
    }
    return total / static_cast<double>(ens.size());
}

BoundReport laplace_bound(const Matrix& memories, const Vector& energies, VectorCRef x_star, double alpha,
                          double q, double r, const AssumptionConstants& constants) {
    constants.validate();
    if (memories.rows() < 1 || energies.size() != memories.rows() || x_star.size() != memories.cols()) {
        throw Error("laplace_bound: shape mismatch");
    }
    if (!(r > 0.0 && r <= constants.R0)) throw Error("precondition violated: need 0 < r <= R0");
    if (!(q > 0.0)) throw Error("precondition violated: need q > 0");

    const Eigen::RowVectorXd target = x_star.transpose();
    const double n = static_cast<double>(memories.rows());
    Index inside = 0;
    double E_r = -kInfinity;
    double mean_distance = 0.0;
    for (Index i = 0; i < memories.rows(); ++i) {
        const auto offset = memories.row(i) - target;
        mean_distance += offset.norm();
        if (offset.lpNorm<Eigen::Infinity>() <= r) {
            ++inside;
            E_r = std::max(E_r, energies[i] - constants.E_min);
        }
    }
    if (inside == 0) throw Error("mass zero in B_r");
    if (q + E_r > constants.E_inf) throw Error("precondition violated: q + E_r > E_inf");
    mean_distance /= n;

    BoundReport report;
    report.mass = static_cast<double>(inside) / n;
    report.E_r = E_r;
    report.lhs = (consensus_point(memories, energies, alpha) - x_star).norm();
    const double sqrt_d = std::sqrt(static_cast<double>(memories.cols()));
    report.rhs = sqrt_d * std::pow(q + E_r, constants.nu) / constants.eta +
                 sqrt_d * std::exp(-alpha * q) / report.mass * mean_distance;
    report.holds = report.lhs <= report.rhs;
    return report;
}

double mollifier_phi_r(VectorCRef x, VectorCRef y, VectorCRef x_star, double r) {
    if (!(r > 0.0)) throw Error("mollifier requires r > 0");
    if (x.size() != y.size() || x.size() != x_star.size()) throw Error("mollifier: dimension mismatch");
    const double half = 0.5 * r;
    const double half_sq = half * half;
    double log_value = 0.0;
    for (Index k = 0; k < x.size(); ++k) {
        const double a = x[k] - x_star[k];
        const double b = x[k] - y[k];
        if (!(std::abs(a) < half) || !(std::abs(b) < half)) return 0.0;
        log_value += (1.0 - half_sq / (half_sq - a * a)) + (1.0 - half_sq / (half_sq - b * b));
    }
    return std::exp(log_value);
}

double upsilon_constant(double r, double B, Index d, double C_grad) {
    return std::max(0.5 * r + B, C_grad * static_cast<double>(d) * 0.5 * r);
}

double mass_decay_rate_p(const CboParams& params, double r, double B, double c, Index d,
                         const AssumptionConstants& constants) {
    if (!(c > 0.5 && c < 1.0) || (1.0 - c) * (1.0 - c) > (2.0 * c - 1.0) * c) {
        throw Error("invalid c: need c in (1/2, 1) with (1-c)^2 <= (2c-1)c");
    }
    if (!(r > 0.0)) throw Error("mass decay rate requires r > 0");
    if (!(B >= 0.0)) throw Error("mass decay rate requires B >= 0");
    if (d < 1) throw Error("mass decay rate requires d >= 1");
    if (params.sigma1 <= 0.0) throw Error("hypothesis violated: sigma1 must be > 0");
    if (params.lambda2 > 0.0 && params.sigma2 <= 0.0) throw Error("hypothesis violated: lambda2 > 0 needs sigma2 > 0");
    if (params.lambda3 > 0.0 && params.sigma3 <= 0.0) throw Error("hypothesis violated: lambda3 > 0 needs sigma3 > 0");

    const double C = gradient_constant(params, constants);
    const double C_ups = upsilon_constant(r, B, d, C);
    const double half = 0.5 * r;
    const double one_minus = 1.0 - c;
    const double one_minus2 = one_minus * one_minus;
    const double one_minus4 = one_minus2 * one_minus2;
    const double c_tilde = 2.0 * c - 1.0;

    const double lambdas[3] = {params.lambda1, params.lambda2, params.lambda3};
    const double sigmas[3] = {params.sigma1, params.sigma2, params.sigma3};
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double lambda = lambdas[i];
        if (!(lambda > 0.0)) continue;
        const double sigma_sq = sigmas[i] * sigmas[i];
        const double multiplicity = (i == 1) ? 1.0 : 2.0;
        double term = multiplicity * (2.0 * lambda * C_ups * std::sqrt(c) / (one_minus2 * half) +
                                      sigma_sq * C_ups * C_ups / (one_minus4 * half * half) +
                                      4.0 * lambda * lambda / (c_tilde * sigma_sq));
        if (i == 1) term += sigma_sq * c / one_minus4;
        sum += term;
    }
    return static_cast<double>(d) * sum;
}

DecayFit fit_exponential_rate(std::span<const double> times, std::span<const double> values) {
    if (times.size() != values.size()) throw Error("fit_exponential_rate: length mismatch");
    if (times.size() < 3) throw Error("fit_exponential_rate: need at least 3 samples");
    const double n = static_cast<double>(times.size());
    double mean_t = 0.0, mean_y = 0.0;
    std::vector<double> logs(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0)) throw Error("fit_exponential_rate: values must be positive");
        logs[i] = std::log(values[i]);
        mean_t += times[i];
        mean_y += logs[i];
    }
    mean_t /= n;
    mean_y /= n;
    double s_tt = 0.0, s_ty = 0.0, s_yy = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double dt = times[i] - mean_t;
        const double dy = logs[i] - mean_y;
        s_tt += dt * dt;
        s_ty += dt * dy;
        s_yy += dy * dy;
    }
    if (!(s_tt > 0.0)) throw Error("fit_exponential_rate: times must not all coincide");
    const double slope = s_ty / s_tt;
    DecayFit fit;
    fit.rate = -slope;
    fit.intercept = mean_y - slope * mean_t;
    if (s_yy <= 0.0) {
        fit.r_squared = 1.0;
    } else {
        fit.r_squared = std::clamp(s_ty * s_ty / (s_tt * s_yy), 0.0, 1.0);
    }
    return fit;
}

}  // namespace cbo
