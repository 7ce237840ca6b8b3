#pragma once

#include "cbo/dynamics.hpp"
#include "cbo/objective.hpp"
#include "cbo/theory.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cbo {

enum class ObjectiveKind { Sphere, Rastrigin, ToyStochastic, CompressedSensing };

/// Declarative description of the objective used by a trial. Compressed
/// sensing trials draw a fresh instance from the trial's seed.
struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::Rastrigin;
    Index dimension = 4;
    std::size_t batches = 1;  // toy stochastic objective only

    Index measurements = 25;
    Index sparsity = 2;
    double mu = 0.01;
    double p = 1.0;
    double smoothing = kDefaultSmoothing;
};

/// How sigma2 follows the other parameters.
enum class Sigma2Coupling { None, Lambda1, Lambda2 };

struct InitConfig {
    InitSpec::Kind kind = InitSpec::Kind::Gaussian;
    double first = 0.0;   ///< mean or lower bound, broadcast to every coordinate
    double second = 1.0;  ///< std or upper bound

    InitSpec resolve(Index d) const;
};

struct SuccessRule {
    enum class Kind { ConsensusNearMinimizer, ExactSparseRecovery };
    enum class Norm { Inf, Two };

    Kind kind = Kind::ConsensusNearMinimizer;
    double threshold = 0.25;  ///< strict: ||y_alpha - x*|| < threshold
    Norm norm = Norm::Inf;
    double support_threshold = 0.01;
    double residual_tol = 1e-6;
};

struct SweepAxis {
    std::string param;
    std::vector<double> values;
};

struct Sweep {
    SweepAxis x;
    SweepAxis y;
};

struct ExperimentConfig {
    ObjectiveSpec objective;
    CboParams params;
    Schedule schedule;
    Sigma2Coupling sigma2_coupling = Sigma2Coupling::None;
    InitConfig init;
    Index n_particles = 100;
    double horizon = 20.0;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    SuccessRule success;
    std::optional<Sweep> sweep;
    /// Record V and W_2^2 diagnostics for every trial (requires a known minimizer).
    bool record_diagnostics = false;
    std::uint64_t record_every = 1;

    /// horizon / dt, which must be a positive integer.
    std::uint64_t steps() const;
    void validate() const;
    /// params with sigma2 coupling applied.
    CboParams effective_params() const;
};

/// Sets a sweepable parameter by name (lambda1..3, sigma1..3, alpha, beta,
/// theta, kappa, dt, n_particles, m, sparsity, dimension, mu, p, horizon).
void set_parameter(ExperimentConfig& config, const std::string& name, double value);
bool is_sweepable(const std::string& name);

struct TrialResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool success = false;
    bool failed = false;  ///< diverged or errored; counted as unsuccessful
    std::string failure_reason;
    Vector consensus;
    bool memory_monotone = true;
    /// max over recorded steps of W_2^2 - 6 V (nonpositive when the bound holds).
    double max_w2_excess = -kInfinity;
    std::size_t recorded_steps = 0;
};

struct Interval {
    double low = 0.0;
    double high = 1.0;
};

/// Wilson score interval for a binomial proportion (z = 1.96 for 95%).
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

struct TrialSummary {
    std::size_t trials = 0;
    std::size_t successes = 0;
    std::size_t failures = 0;
    double probability = 0.0;
    Interval ci;
    std::vector<TrialResult> results;
};

TrialSummary summarize(std::vector<TrialResult> results);

/// Minimizer of the configured objective for a given trial (ground truth for
/// compressed sensing), i.e. the target of the success rule.
Vector trial_minimizer(const ExperimentConfig& config, std::size_t trial_index);

/// The objective a trial optimizes (compressed sensing draws its instance from the trial seed).
Objective trial_objective(const ExperimentConfig& config, std::size_t trial_index);

TrialResult run_trial(const ExperimentConfig& config, std::size_t trial_index);

struct TrialTask {
    ExperimentConfig config;
    std::size_t trial_index = 0;
};

/// Runs `count` independent jobs on up to `workers` threads; job i writes only slot i.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job);

/// Order and values of the output do not depend on `workers`. Per-task errors
/// are captured in the corresponding TrialResult.
std::vector<TrialResult> parallel_map_trials(std::span<const TrialTask> tasks, std::size_t workers);

/// M trials with seeds seed + trial_index.
TrialSummary run_trials(const ExperimentConfig& config, std::size_t workers = 1);

struct PhaseDiagram {
    SweepAxis x;
    SweepAxis y;
    std::size_t trials_per_cell = 0;
    /// Row-major over (y, x): cells[iy * x.values.size() + ix].
    std::vector<TrialSummary> cells;

    const TrialSummary& cell(std::size_t ix, std::size_t iy) const { return cells.at(iy * x.values.size() + ix); }
};

/// Every cell reuses the base seeds, so a zero column reproduces the baseline run.
PhaseDiagram sweep(const ExperimentConfig& base, const Sweep& grid, std::size_t workers = 1);

/// Cells (lambda2, N) of the Rastrigin memory experiment.
PhaseDiagram rastrigin_phase_diagram(std::span<const double> lambda2_grid, std::span<const double> n_grid,
                                     const ExperimentConfig& base, std::size_t workers = 1);

/// Cells (lambda3, m) of the compressed-sensing gradient experiment.
PhaseDiagram cs_phase_diagram(std::span<const double> lambda3_grid, std::span<const double> m_grid,
                              const ExperimentConfig& base, std::size_t workers = 1);

struct RecoveryResult {
    bool success = false;
    std::string reason;  ///< empty on success
    std::vector<Index> support;
    Vector reconstruction;
    Vector consensus;
    double residual = 0.0;  ///< ||A x_hat - b||_2
};

/// Support {k : |y_k| >= support_threshold}, least squares restricted to it,
/// compared against the ground truth.
RecoveryResult postprocess_sparse(const CsInstance& inst, VectorCRef consensus, double support_threshold,
                                  double residual_tol);

/// Runs CBO on the instance with the config's dynamics, then post-processes.
RecoveryResult cs_recover(const CsInstance& inst, const ExperimentConfig& config, const RngStream& rng);

struct DecayConfig {
    CboParams params;
    AssumptionConstants constants;
    Index n_particles = 1000;
    double horizon = 10.0;
    double vartheta = 0.25;
    double eps = 1e-4;
    InitSpec init;
    std::optional<Matrix> initial_positions;  ///< overrides init when set
    std::uint64_t seed = 0;
};

struct DecayReport {
    Rates rates;
    DecayFit fit;
    double lower_rate = 0.0;  ///< (1 - vartheta) chi1
    double upper_rate = 0.0;  ///< (1 + vartheta/2) chi2
    bool meets_lower = false;
    std::size_t window_samples = 0;
    std::vector<Diagnostic> diagnostics;
    bool memory_monotone = true;
    double max_w2_excess = -kInfinity;
};

/// Records V each step, fits the decay rate over the prefix where V > eps and
/// compares it with the theoretical bracket.
DecayReport decay_experiment(const Objective& objective, VectorCRef x_star, const DecayConfig& config);

// Serialization.
std::string to_csv(const PhaseDiagram& diagram);
std::string to_csv(const TrialSummary& summary);
std::string to_json(const ExperimentConfig& config);
std::string to_json(const PhaseDiagram& diagram, const ExperimentConfig& config);
std::string to_json(const TrialSummary& summary, const ExperimentConfig& config);
std::string to_json(const DecayReport& report);

}  // namespace cbo
