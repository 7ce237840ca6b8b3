#pragma once

#include "cbo/dynamics.hpp"
#include "cbo/types.hpp"

#include <optional>
#include <span>
#include <string>

namespace cbo {

/// Problem constants of the convergence analysis. They describe the
/// objective, not the method, and must be supplied by the caller.
///
/// For the sphere E(x) = ||x||^2 one may take eta = 1, nu = 1/2 (since
/// ||x||_inf <= ||x||_2), R0 = 1, E_inf = 1 and C_grad = 2.
struct AssumptionConstants {
    double eta = 1.0;    ///< inverse-continuity slope
    double nu = 0.5;     ///< inverse-continuity exponent
    double R0 = 1.0;     ///< radius of the coercive neighborhood (inf-norm)
    double E_inf = 1.0;  ///< farfield gap
    std::optional<double> C_grad;  ///< ||grad E(x)||_2 <= C_grad ||x - x*||_2
    double E_min = 0.0;

    void validate() const;
};

struct Rates {
    double chi1 = 0.0;
    double chi2 = 0.0;
};

/// Decay rates of the Lyapunov functional for the dynamics with memory.
Rates chi_rates(const CboParams& params, const AssumptionConstants& constants);

/// Rates for the instantaneous dynamics without memory (lambda2, sigma2,
/// kappa, theta are ignored).
Rates chi_rates_memoryless(const CboParams& params, const AssumptionConstants& constants);

struct HorizonReport {
    double t_star = 0.0;
    /// (1-vartheta) chi1 / ((1+vartheta/2) chi2) * T*, present when chi2 was given.
    std::optional<double> lower_bracket;
};

/// T* = log(V0/eps) / ((1 - vartheta) chi1).
HorizonReport time_horizon_star(double V0, double eps, double vartheta, double chi1,
                                std::optional<double> chi2 = std::nullopt);

struct LyapunovValue {
    double total = 0.0;
    double position_part = 0.0;  ///< (1/2N) sum ||X^i - x*||^2
    double memory_part = 0.0;    ///< (1/2N) sum ||Y^i - X^i||^2
};

LyapunovValue lyapunov_V(const Ensemble& ens, VectorCRef x_star);

/// (1/N) sum (||X^i - x*||^2 + ||Y^i - x*||^2).
double wasserstein2_to_dirac(const Ensemble& ens, VectorCRef x_star);

struct BoundReport {
    double lhs = 0.0;   ///< ||y_alpha - x*||_2 of the empirical measure
    double rhs = 0.0;   ///< quantitative Laplace bound
    bool holds = false;
    double mass = 0.0;  ///< empirical mass of the inf-ball B_r(x*)
    double E_r = 0.0;   ///< max energy over memories inside the ball
};

/// Evaluates both sides of the quantitative Laplace principle on the empirical
/// measure of `memories`. E_r is the max over sampled points in the ball, a
/// surrogate for the supremum.
BoundReport laplace_bound(const Matrix& memories, const Vector& energies, VectorCRef x_star, double alpha,
                          double q, double r, const AssumptionConstants& constants);

/// Tensor-product bump supported on max(||x-x*||_inf, ||x-y||_inf) < r/2.
double mollifier_phi_r(VectorCRef x, VectorCRef y, VectorCRef x_star, double r);

/// C_Upsilon = max{r/2 + B, C_grad d r/2}.
double upsilon_constant(double r, double B, Index d, double C_grad);

/// Mass-decay rate p of the lower bound on rho_Y(B_r(x*)).
double mass_decay_rate_p(const CboParams& params, double r, double B, double c, Index d,
                         const AssumptionConstants& constants);

struct DecayFit {
    double rate = 0.0;       ///< negated slope of log(values) against times
    double intercept = 0.0;  ///< fitted log of the value at t = 0
    double r_squared = 0.0;
};

DecayFit fit_exponential_rate(std::span<const double> times, std::span<const double> values);

std::string to_json(const BoundReport& report);
std::string to_json(const DecayFit& fit);

}  // namespace cbo
