#include "cbo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <thread>

namespace cbo {

InitSpec InitConfig::resolve(Index d) const {
    return kind == InitSpec::Kind::Gaussian ? InitSpec::gaussian(d, first, second)
                                            : InitSpec::uniform(d, first, second);
}

std::uint64_t ExperimentConfig::steps() const {
    if (!(params.dt > 0.0) || !std::isfinite(horizon) || horizon <= 0.0) {
        throw Error("invalid parameter horizon: must be > 0 with dt > 0");
    }
    const double ratio = horizon / params.dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        throw Error("invalid parameter horizon: horizon / dt must be a positive integer");
    }
    return static_cast<std::uint64_t>(rounded);
}

void ExperimentConfig::validate() const {
    params.validate();
    effective_params().validate();
    (void)steps();
    if (trials < 1) throw Error("invalid parameter trials: must be >= 1");
    if (n_particles < 1) throw Error("invalid parameter n_particles: must be >= 1");
    if (objective.dimension < 1) throw Error("invalid parameter dimension: must be >= 1");
    if (schedule.epoch_length < 1) throw Error("invalid parameter epoch_length: must be >= 1");
    init.resolve(objective.dimension).validate(objective.dimension);
    if (objective.kind == ObjectiveKind::ToyStochastic && objective.batches < 1) {
        throw Error("invalid parameter batches: must be >= 1");
    }
    if (objective.kind == ObjectiveKind::CompressedSensing) {
        const auto& o = objective;
        if (o.sparsity < 1 || o.sparsity > o.dimension) throw Error("invalid parameter sparsity: need 1 <= s <= d");
        if (o.measurements < 1 || o.measurements > o.dimension) {
            throw Error("invalid parameter m: need 1 <= m <= d");
        }
        if (!(o.mu > 0.0)) throw Error("invalid parameter mu: must be > 0");
        if (!(o.p > 0.0 && o.p <= 1.0)) throw Error("invalid parameter p: must lie in (0, 1]");
        if (!(o.smoothing >= 0.0)) throw Error("invalid parameter smoothing: must be >= 0");
    }
    if (success.kind == SuccessRule::Kind::ConsensusNearMinimizer && !(success.threshold >= 0.0)) {
        throw Error("invalid parameter threshold: must be >= 0");
    }
    if (success.kind == SuccessRule::Kind::ExactSparseRecovery) {
        if (objective.kind != ObjectiveKind::CompressedSensing) {
            throw Error("invalid parameter success: sparse recovery needs a compressed-sensing objective");
        }
        if (!(success.support_threshold > 0.0)) throw Error("invalid parameter support_threshold: must be > 0");
        if (!(success.residual_tol > 0.0)) throw Error("invalid parameter residual_tol: must be > 0");
    }
    if (sweep) {
        for (const SweepAxis* axis : {&sweep->x, &sweep->y}) {
            if (!is_sweepable(axis->param)) throw Error("invalid sweep parameter " + axis->param);
            if (axis->values.empty()) throw Error("sweep axis " + axis->param + " has no values");
        }
    }
}

CboParams ExperimentConfig::effective_params() const {
    CboParams p = params;
    switch (sigma2_coupling) {
        case Sigma2Coupling::None: break;
        case Sigma2Coupling::Lambda1: p.sigma2 = p.lambda1 * p.sigma1; break;
        case Sigma2Coupling::Lambda2: p.sigma2 = p.lambda2 * p.sigma1; break;
    }
    return p;
}

namespace {

Index as_count(const std::string& name, double value) {
    if (!(value >= 1.0) || value != std::floor(value)) throw Error("invalid parameter " + name + ": must be a positive integer");
    return static_cast<Index>(value);
}

const std::vector<std::string>& sweepable_names() {
    static const std::vector<std::string> names = {"lambda1", "lambda2", "lambda3", "sigma1", "sigma2", "sigma3",
                                                   "alpha", "beta", "theta", "kappa", "dt", "n_particles", "m",
                                                   "sparsity", "dimension", "mu", "p", "horizon"};
    return names;
}

}  // namespace

bool is_sweepable(const std::string& name) {
    const auto& names = sweepable_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

void set_parameter(ExperimentConfig& c, const std::string& name, double value) {
    if (name == "lambda1") c.params.lambda1 = value;
    else if (name == "lambda2") c.params.lambda2 = value;
    else if (name == "lambda3") c.params.lambda3 = value;
    else if (name == "sigma1") c.params.sigma1 = value;
    else if (name == "sigma2") c.params.sigma2 = value;
    else if (name == "sigma3") c.params.sigma3 = value;
    else if (name == "alpha") c.params.alpha = value;
    else if (name == "beta") c.params.beta = value;
    else if (name == "theta") c.params.theta = value;
    else if (name == "kappa") c.params.kappa = value;
    else if (name == "dt") c.params.dt = value;
    else if (name == "n_particles") c.n_particles = as_count(name, value);
    else if (name == "m") c.objective.measurements = as_count(name, value);
    else if (name == "sparsity") c.objective.sparsity = as_count(name, value);
    else if (name == "dimension") c.objective.dimension = as_count(name, value);
    else if (name == "mu") c.objective.mu = value;
    else if (name == "p") c.objective.p = value;
    else if (name == "horizon") c.horizon = value;
    else throw Error("unknown parameter " + name);
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double phat = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (phat + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    return {std::clamp(std::min(center - half, phat), 0.0, 1.0), std::clamp(std::max(center + half, phat), 0.0, 1.0)};
}

TrialSummary summarize(std::vector<TrialResult> results) {
    TrialSummary s;
    s.trials = results.size();
    for (const auto& r : results) {
        if (r.success) ++s.successes;
        if (r.failed) ++s.failures;
    }
    s.probability = s.trials ? static_cast<double>(s.successes) / static_cast<double>(s.trials) : 0.0;
    s.ci = wilson_interval(s.successes, s.trials);
    s.results = std::move(results);
    return s;
}

namespace {

RngStream trial_stream(const ExperimentConfig& config, std::size_t trial_index) {
    return RngStream(config.seed + trial_index, 0);
}

CsInstance trial_instance(const ExperimentConfig& config, const RngStream& rng) {
    const auto& o = config.objective;
    return generate_cs_instance(o.dimension, o.measurements, o.sparsity, o.mu, o.p, rng);
}

Objective build_objective(const ExperimentConfig& config) {
    const auto& o = config.objective;
    switch (o.kind) {
        case ObjectiveKind::Sphere: return make_sphere(o.dimension);
        case ObjectiveKind::Rastrigin: return make_rastrigin(o.dimension);
        case ObjectiveKind::ToyStochastic: return toy_stochastic_objective(o.dimension, o.batches);
        case ObjectiveKind::CompressedSensing: break;
    }
    throw Error("compressed-sensing objectives are built per trial");
}

RunResult run_dynamics(const ExperimentConfig& config, const Objective& objective, const RngStream& rng,
                       const std::optional<Vector>& x_star) {
    const CboParams params = config.effective_params();
    const Index d = objective.dimension();
    Ensemble initial = init_ensemble(config.n_particles, d, config.init.resolve(d), objective, rng);
    RunOptions options;
    if (config.record_diagnostics) {
        options.x_star = x_star;
        options.record_every = config.record_every;
    }
    return run(initial, params, config.schedule, objective, StoppingRule{config.steps(), std::nullopt}, rng, options);
}

void fill_diagnostics(TrialResult& out, const RunResult& run) {
    out.memory_monotone = run.memory_monotone;
    out.recorded_steps = run.diagnostics.size();
    for (const auto& diag : run.diagnostics) {
        out.max_w2_excess = std::max(out.max_w2_excess, diag.wasserstein2_sq - 6.0 * diag.lyapunov);
    }
}

}  // namespace

Vector trial_minimizer(const ExperimentConfig& config, std::size_t trial_index) {
    if (config.objective.kind == ObjectiveKind::CompressedSensing) {
        return *trial_instance(config, trial_stream(config, trial_index)).ground_truth;
    }
    return Vector::Zero(config.objective.dimension);
}

Objective trial_objective(const ExperimentConfig& config, std::size_t trial_index) {
    if (config.objective.kind == ObjectiveKind::CompressedSensing) {
        auto inst = std::make_shared<const CsInstance>(trial_instance(config, trial_stream(config, trial_index)));
        return make_cs_objective(inst, config.objective.smoothing);
    }
    return build_objective(config);
}

TrialResult run_trial(const ExperimentConfig& config, std::size_t trial_index) {
    TrialResult out;
    out.index = trial_index;
    out.seed = config.seed + trial_index;
    const RngStream rng = trial_stream(config, trial_index);
    try {
        if (config.objective.kind == ObjectiveKind::CompressedSensing) {
            const CsInstance inst = trial_instance(config, rng);
            if (config.success.kind != SuccessRule::Kind::ExactSparseRecovery) {
                throw Error("compressed-sensing trials use the exact_sparse_recovery success rule");
            }
            auto shared = std::make_shared<const CsInstance>(inst);
            const Objective objective = make_cs_objective(shared, config.objective.smoothing);
            const RunResult run = run_dynamics(config, objective, rng, inst.ground_truth);
            fill_diagnostics(out, run);
            out.consensus = run.consensus;
            const RecoveryResult rec =
                postprocess_sparse(inst, run.consensus, config.success.support_threshold, config.success.residual_tol);
            out.success = rec.success;
            out.failure_reason = rec.reason;
        } else {
            const Objective objective = build_objective(config);
            const Vector x_star = Vector::Zero(objective.dimension());
            const RunResult run = run_dynamics(config, objective, rng, x_star);
            fill_diagnostics(out, run);
            out.consensus = run.consensus;
            const Vector offset = run.consensus - x_star;
            const double distance = config.success.norm == SuccessRule::Norm::Inf ? offset.lpNorm<Eigen::Infinity>()
                                                                                  : offset.norm();
            out.success = distance < config.success.threshold;
        }
    } catch (const DivergedEnsemble& e) {
        out.success = false;
        out.failed = true;
        out.failure_reason = e.what();
    } catch (const std::exception& e) {
        out.success = false;
        out.failed = true;
        out.failure_reason = e.what();
    }
    return out;
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
    if (count == 0) return;
    workers = std::clamp<std::size_t>(workers, 1, count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) job(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<TrialResult> parallel_map_trials(std::span<const TrialTask> tasks, std::size_t workers) {
    if (workers < 1) throw Error("worker budget must be >= 1");
    std::vector<TrialResult> results(tasks.size());
    parallel_for(tasks.size(), workers,
                 [&](std::size_t i) { results[i] = run_trial(tasks[i].config, tasks[i].trial_index); });
    return results;
}

TrialSummary run_trials(const ExperimentConfig& config, std::size_t workers) {
    config.validate();
    std::vector<TrialTask> tasks;
    tasks.reserve(config.trials);
    for (std::size_t t = 0; t < config.trials; ++t) tasks.push_back({config, t});
    return summarize(parallel_map_trials(tasks, workers));
}

PhaseDiagram sweep(const ExperimentConfig& base, const Sweep& grid, std::size_t workers) {
    for (const SweepAxis* axis : {&grid.x, &grid.y}) {
        if (!is_sweepable(axis->param)) throw Error("invalid sweep parameter " + axis->param);
        if (axis->values.empty()) throw Error("sweep axis " + axis->param + " has no values");
    }
    PhaseDiagram diagram;
    diagram.x = grid.x;
    diagram.y = grid.y;
    diagram.trials_per_cell = base.trials;

    const std::size_t nx = grid.x.values.size();
    const std::size_t ny = grid.y.values.size();
    std::vector<TrialTask> tasks;
    tasks.reserve(nx * ny * base.trials);
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            ExperimentConfig cell = base;
            cell.sweep.reset();
            set_parameter(cell, grid.x.param, grid.x.values[ix]);
            set_parameter(cell, grid.y.param, grid.y.values[iy]);
            cell.validate();
            for (std::size_t t = 0; t < base.trials; ++t) tasks.push_back({cell, t});
        }
    }
    std::vector<TrialResult> results = parallel_map_trials(tasks, workers);

    diagram.cells.reserve(nx * ny);
    for (std::size_t c = 0; c < nx * ny; ++c) {
        const auto first = results.begin() + static_cast<std::ptrdiff_t>(c * base.trials);
        diagram.cells.push_back(
            summarize(std::vector<TrialResult>(first, first + static_cast<std::ptrdiff_t>(base.trials))));
    }
    return diagram;
}

PhaseDiagram rastrigin_phase_diagram(std::span<const double> lambda2_grid, std::span<const double> n_grid,
                                     const ExperimentConfig& base, std::size_t workers) {
    if (base.objective.kind != ObjectiveKind::Rastrigin) throw Error("rastrigin_phase_diagram needs a Rastrigin objective");
    Sweep grid{{"lambda2", {lambda2_grid.begin(), lambda2_grid.end()}},
               {"n_particles", {n_grid.begin(), n_grid.end()}}};
    return sweep(base, grid, workers);
}

PhaseDiagram cs_phase_diagram(std::span<const double> lambda3_grid, std::span<const double> m_grid,
                              const ExperimentConfig& base, std::size_t workers) {
    if (base.objective.kind != ObjectiveKind::CompressedSensing) {
        throw Error("cs_phase_diagram needs a compressed-sensing objective");
    }
    Sweep grid{{"lambda3", {lambda3_grid.begin(), lambda3_grid.end()}}, {"m", {m_grid.begin(), m_grid.end()}}};
    return sweep(base, grid, workers);
}

RecoveryResult postprocess_sparse(const CsInstance& inst, VectorCRef consensus, double support_threshold,
                                  double residual_tol) {
    if (!inst.ground_truth) throw Error("sparse recovery scoring needs a ground truth");
    const Vector& truth = *inst.ground_truth;
    if (consensus.size() != inst.dimension()) throw Error("consensus dimension does not match the instance");

    RecoveryResult out;
    out.consensus = consensus;
    out.reconstruction = Vector::Zero(inst.dimension());
    for (Index k = 0; k < consensus.size(); ++k) {
        if (std::abs(consensus[k]) >= support_threshold) out.support.push_back(k);
    }
    if (out.support.empty()) {
        out.reason = "empty support";
        out.residual = inst.b.norm();
        return out;
    }

    const auto cols = static_cast<Index>(out.support.size());
    Matrix restricted(inst.measurements(), cols);
    for (Index j = 0; j < cols; ++j) restricted.col(j) = inst.A.col(out.support[static_cast<std::size_t>(j)]);
    const Eigen::MatrixXd dense = restricted;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dense);
    if (qr.rank() < cols) {
        out.reason = "singular support system";
        out.residual = inst.b.norm();
        return out;
    }
    const Vector z = qr.solve(inst.b);
    for (Index j = 0; j < cols; ++j) out.reconstruction[out.support[static_cast<std::size_t>(j)]] = z[j];
    out.residual = (inst.A * out.reconstruction - inst.b).norm();

    for (Index k = 0; k < truth.size(); ++k) {
        if (truth[k] != 0.0 && std::abs(consensus[k]) < support_threshold) {
            out.reason = "support misses a true entry";
            return out;
        }
    }
    if ((out.reconstruction - truth).lpNorm<Eigen::Infinity>() > residual_tol) {
        out.reason = "reconstruction differs from ground truth";
        return out;
    }
    if (out.residual > residual_tol * (1.0 + inst.b.norm())) {
        out.reason = "residual too large";
        return out;
    }
    out.success = true;
    return out;
}

RecoveryResult cs_recover(const CsInstance& inst, const ExperimentConfig& config, const RngStream& rng) {
    if (!inst.ground_truth) throw Error("cs_recover needs an instance with ground truth");
    config.params.validate();
    auto shared = std::make_shared<const CsInstance>(inst);
    const Objective objective = make_cs_objective(shared, config.objective.smoothing);
    const RunResult run = run_dynamics(config, objective, rng, inst.ground_truth);
    return postprocess_sparse(inst, run.consensus, config.success.support_threshold, config.success.residual_tol);
}

DecayReport decay_experiment(const Objective& objective, VectorCRef x_star, const DecayConfig& config) {
    config.params.validate();
    DecayReport report;
    report.rates = chi_rates(config.params, config.constants);
    if (!(report.rates.chi1 > 0.0)) throw Error("no guarantee regime: chi1 <= 0");
    if (!(config.vartheta >= 0.0 && config.vartheta < 1.0)) throw Error("invalid parameter vartheta: need [0, 1)");
    if (!(config.eps > 0.0)) throw Error("invalid parameter eps: must be > 0");
    report.lower_rate = (1.0 - config.vartheta) * report.rates.chi1;
    report.upper_rate = (1.0 + 0.5 * config.vartheta) * report.rates.chi2;

    const RngStream rng(config.seed, 0);
    const Index d = objective.dimension();
    const Ensemble initial = config.initial_positions
                                 ? make_ensemble(*config.initial_positions, objective)
                                 : init_ensemble(config.n_particles, d, config.init, objective, rng);

    const double ratio = config.horizon / config.params.dt;
    if (!(ratio >= 1.0)) throw Error("invalid parameter horizon: must cover at least one step");
    const auto steps = static_cast<std::uint64_t>(std::llround(ratio));

    RunOptions options;
    options.x_star = Vector(x_star);
    const RunResult run =
        cbo::run(initial, config.params, Schedule{}, objective, StoppingRule{steps, std::nullopt}, rng, options);
    report.diagnostics = run.diagnostics;
    report.memory_monotone = run.memory_monotone;

    std::vector<double> times, values;
    for (const auto& diag : run.diagnostics) {
        report.max_w2_excess = std::max(report.max_w2_excess, diag.wasserstein2_sq - 6.0 * diag.lyapunov);
        if (!(diag.lyapunov > config.eps)) break;
        times.push_back(diag.time);
        values.push_back(diag.lyapunov);
    }
    if (times.size() < 3) throw Error("decay window V > eps holds for fewer than 3 samples");
    report.window_samples = times.size();
    report.fit = fit_exponential_rate(times, values);
    report.meets_lower = report.fit.rate >= report.lower_rate;
    return report;
}

}  // namespace cbo
