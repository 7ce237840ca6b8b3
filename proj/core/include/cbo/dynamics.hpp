#pragma once

#include "cbo/objective.hpp"
#include "cbo/rng.hpp"
#include "cbo/types.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace cbo {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Diffusion { Isotropic, Anisotropic };

/// Parameters of the discretized particle system.
struct CboParams {
    double lambda1 = 1.0;  ///< drift toward the consensus point
    double lambda2 = 0.0;  ///< drift toward the particle's own memory
    double lambda3 = 0.0;  ///< gradient drift
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    double sigma3 = 0.0;
    double alpha = 100.0;      ///< weight exponent, may be +inf
    double beta = kInfinity;   ///< memory-switch sharpness, may be +inf
    double theta = 0.0;
    double kappa = 100.0;
    double dt = 0.01;
    Diffusion diffusion = Diffusion::Anisotropic;
    /// Size of the random particle subset used for the consensus point; 0 uses all.
    std::size_t consensus_batch = 0;

    /// Throws cbo::Error naming the first offending field.
    void validate() const;

    /// beta = inf, theta = 0 and kappa = 1/dt: memories are replaced on strict improvement.
    bool exact_memory_rule() const noexcept;
};

struct Ensemble {
    Matrix positions;        // X, N x d
    Matrix memories;         // Y, N x d
    Vector memory_energies;  // E(Y^i)
    std::uint64_t step_index = 0;
    double time = 0.0;

    Index size() const noexcept { return positions.rows(); }
    Index dimension() const noexcept { return positions.cols(); }

    /// Throws on mismatched shapes or non-finite entries.
    void validate() const;
};

enum class AlphaRule { Constant, DoublePerEpoch };
enum class SigmaRule { Constant, Log2Cooling };

/// Epoch-wise parameter cooling. Log2Cooling rescales sigma1 and sigma2 to
/// sigma_{i,0} / log2(epoch + 2); DoublePerEpoch multiplies alpha by 2^epoch.
struct Schedule {
    AlphaRule alpha_rule = AlphaRule::Constant;
    SigmaRule sigma_rule = SigmaRule::Constant;
    std::uint64_t epoch_length = 1;

    bool is_constant() const noexcept {
        return alpha_rule == AlphaRule::Constant && sigma_rule == SigmaRule::Constant;
    }
    CboParams apply(const CboParams& base, std::uint64_t step_index) const;
};

/// Weighted mean sum y_i w_i / sum w_i with w_i = exp(-alpha (E_i - min E)).
/// With alpha = +inf the weights select the minimizers. `subset`, when given,
/// restricts the average to those rows.
Vector consensus_point(const Matrix& points, const Vector& energies, double alpha,
                       std::optional<std::span<const Index>> subset = std::nullopt);

/// Smoothed switch 1/2 (1 + theta + tanh(beta (e_y - e_x))); for beta = inf
/// the tanh is replaced by sign with sign(0) = 0.
double memory_switch(double e_x, double e_y, double beta, double theta) noexcept;

/// Replace memory i by new_positions row i iff new_energies[i] < memory_energies[i].
void apply_exact_memory_update(Ensemble& ens, const Matrix& new_positions, const Vector& new_energies);
Ensemble exact_memory_update(Ensemble ens, const Matrix& new_positions, const Vector& new_energies);

struct StepReport {
    Vector consensus;  ///< consensus point used for the drift (computed from memories)
    std::size_t batch = Objective::kFullData;
};

/// One Euler-Maruyama step, in place. Throws DivergedEnsemble on non-finite output.
StepReport advance(Ensemble& ens, const CboParams& params, const Objective& objective, const RngStream& rng);

Ensemble step(const Ensemble& ens, const CboParams& params, const Objective& objective, const RngStream& rng);

struct InitSpec {
    enum class Kind { Gaussian, Uniform };
    Kind kind = Kind::Gaussian;
    Vector first;   ///< mean, or lower corner
    Vector second;  ///< per-coordinate std, or upper corner

    static InitSpec gaussian(Vector mean, Vector stddev);
    static InitSpec gaussian(Index d, double mean, double stddev);
    static InitSpec uniform(Vector lower, Vector upper);
    static InitSpec uniform(Index d, double lower, double upper);

    void validate(Index d) const;
};

/// X_0 drawn from `init`, Y_0 = X_0, memory energies evaluated on the full data.
Ensemble init_ensemble(Index n, Index d, const InitSpec& init, const Objective& objective, const RngStream& rng);

/// Builds an ensemble from explicit positions (memories start equal).
Ensemble make_ensemble(const Matrix& positions, const Objective& objective);

struct StoppingRule {
    std::uint64_t max_steps = 0;
    /// Stop early once the consensus point moves less than this in one step.
    std::optional<double> consensus_tolerance;
};

struct Diagnostic {
    std::uint64_t step = 0;
    double time = 0.0;
    double lyapunov = 0.0;         ///< empirical V
    double wasserstein2_sq = 0.0;  ///< W_2^2 to the Dirac at (x*, x*)
    double consensus_error = 0.0;  ///< ||y_alpha - x*||_2
};

struct RunOptions {
    /// When set, diagnostics are recorded every `record_every` steps.
    std::optional<Vector> x_star;
    std::uint64_t record_every = 1;
    std::function<void(const Ensemble&, const StepReport&)> observer;
};

struct RunResult {
    Ensemble final;
    Vector consensus;  ///< consensus of the final memories under the final parameters
    std::uint64_t steps = 0;
    std::vector<Diagnostic> diagnostics;
    /// True if every memory energy was non-increasing at every step.
    bool memory_monotone = true;
};

RunResult run(const Ensemble& initial, const CboParams& params, const Schedule& schedule,
              const Objective& objective, const StoppingRule& stop, const RngStream& rng,
              const RunOptions& options = {});

}  // namespace cbo
