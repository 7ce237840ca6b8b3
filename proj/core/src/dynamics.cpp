#include "cbo/dynamics.hpp"

#include "cbo/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

namespace cbo {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw Error("invalid parameter " + field + ": " + what);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

double signum(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

// Draws the n_N particle subset for step k: partial Fisher-Yates over 0..N-1.
std::vector<Index> draw_subset(Index n, std::size_t size, std::uint64_t step, const RngStream& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    auto gen = rng.engine(0, step, Channel::ParticleBatch);
    for (std::size_t k = 0; k < size; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
        std::swap(idx[k], idx[pick(gen)]);
    }
    idx.resize(size);
    return idx;
}

std::size_t draw_batch(const Objective& objective, std::uint64_t step, const RngStream& rng) {
    if (!objective.batched()) return Objective::kFullData;
    auto gen = rng.engine(0, step, Channel::DataBatch);
    std::uniform_int_distribution<std::size_t> pick(0, objective.batch_count() - 1);
    return pick(gen);
}

// Adds sigma * D(arg) * B with B ~ N(0, dt I) to `out`.
void add_noise(Eigen::Ref<Eigen::RowVectorXd> out, const Eigen::RowVectorXd& arg, double sigma, Diffusion diffusion,
               double sqrt_dt, std::uint64_t particle, std::uint64_t step, Channel channel, const RngStream& rng,
               std::vector<double>& scratch) {
    if (sigma == 0.0) return;
    rng.gaussian(particle, step, channel, sqrt_dt, scratch);
    const Index d = out.size();
    if (diffusion == Diffusion::Isotropic) {
        const double scale = sigma * arg.norm();
        for (Index k = 0; k < d; ++k) out[k] += scale * scratch[static_cast<std::size_t>(k)];
    } else {
        for (Index k = 0; k < d; ++k) out[k] += sigma * arg[k] * scratch[static_cast<std::size_t>(k)];
    }
}

}  // namespace

void CboParams::validate() const {
    require(std::isfinite(dt) && dt > 0.0, "dt", "must be finite and > 0");
    require(!std::isnan(alpha) && alpha > 0.0, "alpha", "must be > 0");
    require(std::isfinite(lambda1) && lambda1 > 0.0, "lambda1", "must be finite and > 0");
    require(std::isfinite(lambda2) && lambda2 >= 0.0, "lambda2", "must be finite and >= 0");
    require(std::isfinite(lambda3) && lambda3 >= 0.0, "lambda3", "must be finite and >= 0");
    require(std::isfinite(sigma1) && sigma1 >= 0.0, "sigma1", "must be finite and >= 0");
    require(std::isfinite(sigma2) && sigma2 >= 0.0, "sigma2", "must be finite and >= 0");
    require(std::isfinite(sigma3) && sigma3 >= 0.0, "sigma3", "must be finite and >= 0");
    require(!std::isnan(beta) && beta >= 0.0, "beta", "must be >= 0 or inf");
    require(std::isfinite(theta) && theta >= 0.0, "theta", "must be finite and >= 0");
    require(std::isfinite(kappa) && kappa > 0.0, "kappa", "must be finite and > 0");
}

bool CboParams::exact_memory_rule() const noexcept {
    return std::isinf(beta) && theta == 0.0 && std::abs(kappa * dt - 1.0) <= 1e-12;
}

void Ensemble::validate() const {
    if (positions.rows() < 1 || positions.cols() < 1) throw Error("ensemble must be non-empty");
    if (memories.rows() != positions.rows() || memories.cols() != positions.cols()) {
        throw Error("ensemble shape mismatch between positions and memories");
    }
    if (memory_energies.size() != positions.rows()) throw Error("ensemble memory energy cache has wrong length");
    if (!all_finite(positions) || !all_finite(memories) || !memory_energies.allFinite()) {
        throw Error("ensemble contains non-finite entries");
    }
}

CboParams Schedule::apply(const CboParams& base, std::uint64_t step_index) const {
    if (epoch_length == 0) throw Error("invalid parameter epoch_length: must be > 0");
    const std::uint64_t epoch = step_index / epoch_length;
    CboParams p = base;
    if (alpha_rule == AlphaRule::DoublePerEpoch) {
        p.alpha = std::ldexp(base.alpha, static_cast<int>(std::min<std::uint64_t>(epoch, 4096)));
    }
    if (sigma_rule == SigmaRule::Log2Cooling) {
        const double factor = 1.0 / std::log2(static_cast<double>(epoch) + 2.0);
        p.sigma1 = base.sigma1 * factor;
        p.sigma2 = base.sigma2 * factor;
    }
    return p;
}

Vector consensus_point(const Matrix& points, const Vector& energies, double alpha,
                       std::optional<std::span<const Index>> subset) {
    if (points.rows() < 1) throw Error("empty consensus set");
    if (energies.size() != points.rows()) throw Error("consensus: energies/points length mismatch");
    if (subset && subset->empty()) throw Error("empty consensus set");

    const auto for_each_row = [&](auto&& fn) {
        if (subset) {
            for (Index i : *subset) {
                if (i < 0 || i >= points.rows()) throw Error("consensus: subset index out of range");
                fn(i);
            }
        } else {
            for (Index i = 0; i < points.rows(); ++i) fn(i);
        }
    };

    double min_energy = kInfinity;
    for_each_row([&](Index i) {
        if (!std::isfinite(energies[i])) throw Error("invalid energy");
        min_energy = std::min(min_energy, energies[i]);
    });

    Vector weighted = Vector::Zero(points.cols());
    double total = 0.0;
    const bool hard_min = std::isinf(alpha);
    for_each_row([&](Index i) {
        const double w = hard_min ? (energies[i] == min_energy ? 1.0 : 0.0)
                                  : std::exp(-alpha * (energies[i] - min_energy));
        if (w == 0.0) return;
        weighted += w * points.row(i).transpose();
        total += w;
    });
    return weighted / total;
}

double memory_switch(double e_x, double e_y, double beta, double theta) noexcept {
    const double diff = e_y - e_x;
    const double shape = std::isinf(beta) ? signum(diff) : std::tanh(beta * diff);
    return 0.5 * (1.0 + theta + shape);
}

void apply_exact_memory_update(Ensemble& ens, const Matrix& new_positions, const Vector& new_energies) {
    if (new_positions.rows() != ens.memories.rows() || new_positions.cols() != ens.memories.cols() ||
        new_energies.size() != ens.memories.rows() || ens.memory_energies.size() != ens.memories.rows()) {
        throw Error("exact memory update: shape mismatch");
    }
    for (Index i = 0; i < new_positions.rows(); ++i) {
        if (new_energies[i] < ens.memory_energies[i]) {
            ens.memories.row(i) = new_positions.row(i);
            ens.memory_energies[i] = new_energies[i];
        }
    }
}

Ensemble exact_memory_update(Ensemble ens, const Matrix& new_positions, const Vector& new_energies) {
    apply_exact_memory_update(ens, new_positions, new_energies);
    return ens;
}

StepReport advance(Ensemble& ens, const CboParams& params, const Objective& objective, const RngStream& rng) {
    const Index n = ens.size();
    const Index d = ens.dimension();
    if (d != objective.dimension()) throw Error("objective dimension does not match the ensemble");
    const bool needs_gradient = params.lambda3 > 0.0 || params.sigma3 > 0.0;
    if (needs_gradient && !objective.has_gradient()) {
        throw Error("gradient drift requested but the objective provides no gradient");
    }

    const std::uint64_t k = ens.step_index;
    StepReport report;
    report.batch = draw_batch(objective, k, rng);

    // Cached memory energies come from earlier batches; compare under the active one.
    if (objective.batched()) {
        for (Index i = 0; i < n; ++i) ens.memory_energies[i] = objective.eval(ens.memories.row(i).transpose(), report.batch);
    }

    if (params.consensus_batch > 0 && static_cast<Index>(params.consensus_batch) < n) {
        const auto subset = draw_subset(n, params.consensus_batch, k, rng);
        report.consensus = consensus_point(ens.memories, ens.memory_energies, params.alpha,
                                           std::span<const Index>(subset));
    } else {
        report.consensus = consensus_point(ens.memories, ens.memory_energies, params.alpha);
    }
    const Eigen::RowVectorXd consensus = report.consensus.transpose();

    const double dt = params.dt;
    const double sqrt_dt = std::sqrt(dt);
    Matrix next(n, d);
    std::vector<double> scratch(static_cast<std::size_t>(d));
    Eigen::RowVectorXd gradient = Eigen::RowVectorXd::Zero(d);

    for (Index i = 0; i < n; ++i) {
        const auto particle = static_cast<std::uint64_t>(i);
        const Eigen::RowVectorXd x = ens.positions.row(i);
        const Eigen::RowVectorXd to_consensus = x - consensus;
        const Eigen::RowVectorXd to_memory = x - ens.memories.row(i);
        if (needs_gradient) gradient = objective.grad(x.transpose(), report.batch).transpose();

        Eigen::RowVectorXd out =
            x - dt * (params.lambda1 * to_consensus + params.lambda2 * to_memory + params.lambda3 * gradient);
        add_noise(out, to_consensus, params.sigma1, params.diffusion, sqrt_dt, particle, k, Channel::Consensus, rng,
                  scratch);
        add_noise(out, to_memory, params.sigma2, params.diffusion, sqrt_dt, particle, k, Channel::Memory, rng,
                  scratch);
        if (needs_gradient) {
            add_noise(out, gradient, params.sigma3, params.diffusion, sqrt_dt, particle, k, Channel::Gradient, rng,
                      scratch);
        }
        next.row(i) = out;
    }
    if (!all_finite(next)) throw DivergedEnsemble(k);

    Vector next_energies(n);
    for (Index i = 0; i < n; ++i) next_energies[i] = objective.eval(next.row(i).transpose(), report.batch);
    if (!next_energies.allFinite()) throw DivergedEnsemble(k);

    if (params.exact_memory_rule()) {
        apply_exact_memory_update(ens, next, next_energies);
    } else {
        const double rate = dt * params.kappa;
        for (Index i = 0; i < n; ++i) {
            const double s = memory_switch(next_energies[i], ens.memory_energies[i], params.beta, params.theta);
            ens.memories.row(i) += rate * s * (next.row(i) - ens.memories.row(i));
            ens.memory_energies[i] = objective.eval(ens.memories.row(i).transpose(), report.batch);
        }
        if (!all_finite(ens.memories) || !ens.memory_energies.allFinite()) throw DivergedEnsemble(k);
    }

    ens.positions = std::move(next);
    ens.step_index = k + 1;
    ens.time = static_cast<double>(ens.step_index) * dt;
    return report;
}

Ensemble step(const Ensemble& ens, const CboParams& params, const Objective& objective, const RngStream& rng) {
    Ensemble out = ens;
    advance(out, params, objective, rng);
    return out;
}

InitSpec InitSpec::gaussian(Vector mean, Vector stddev) {
    return InitSpec{Kind::Gaussian, std::move(mean), std::move(stddev)};
}

InitSpec InitSpec::gaussian(Index d, double mean, double stddev) {
    return gaussian(Vector::Constant(d, mean), Vector::Constant(d, stddev));
}

InitSpec InitSpec::uniform(Vector lower, Vector upper) {
    return InitSpec{Kind::Uniform, std::move(lower), std::move(upper)};
}

InitSpec InitSpec::uniform(Index d, double lower, double upper) {
    return uniform(Vector::Constant(d, lower), Vector::Constant(d, upper));
}

void InitSpec::validate(Index d) const {
    if (first.size() != d || second.size() != d) throw Error("init spec dimension does not match");
    if (!first.allFinite() || !second.allFinite()) throw Error("init spec has non-finite entries");
    if (kind == Kind::Gaussian) {
        if ((second.array() < 0.0).any()) throw Error("init spec: negative standard deviation");
    } else if ((second.array() < first.array()).any()) {
        throw Error("init spec: empty box (upper < lower)");
    }
}

Ensemble init_ensemble(Index n, Index d, const InitSpec& init, const Objective& objective, const RngStream& rng) {
    if (n < 1 || d < 1) throw Error("init_ensemble requires n >= 1 and d >= 1");
    init.validate(d);
    Matrix positions(n, d);
    for (Index i = 0; i < n; ++i) {
        auto gen = rng.engine(static_cast<std::uint64_t>(i), 0, Channel::Init);
        if (init.kind == InitSpec::Kind::Gaussian) {
            std::normal_distribution<double> normal(0.0, 1.0);
            for (Index k = 0; k < d; ++k) positions(i, k) = init.first[k] + init.second[k] * normal(gen);
        } else {
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (Index k = 0; k < d; ++k) {
                positions(i, k) = init.first[k] + (init.second[k] - init.first[k]) * unit(gen);
            }
        }
    }
    return make_ensemble(positions, objective);
}

Ensemble make_ensemble(const Matrix& positions, const Objective& objective) {
    if (positions.cols() != objective.dimension()) throw Error("objective dimension does not match the ensemble");
    Ensemble ens;
    ens.positions = positions;
    ens.memories = positions;
    ens.memory_energies.resize(positions.rows());
    for (Index i = 0; i < positions.rows(); ++i) ens.memory_energies[i] = objective(positions.row(i).transpose());
    ens.validate();
    return ens;
}

namespace {

Diagnostic diagnose(const Ensemble& ens, const Vector& consensus, const Vector& x_star) {
    Diagnostic diag;
    diag.step = ens.step_index;
    diag.time = ens.time;
    diag.lyapunov = lyapunov_V(ens, x_star).total;
    diag.wasserstein2_sq = wasserstein2_to_dirac(ens, x_star);
    diag.consensus_error = (consensus - x_star).norm();
    return diag;
}

}  // namespace

RunResult run(const Ensemble& initial, const CboParams& params, const Schedule& schedule,
              const Objective& objective, const StoppingRule& stop, const RngStream& rng,
              const RunOptions& options) {
    params.validate();
    initial.validate();
    if (options.x_star && options.x_star->size() != initial.dimension()) {
        throw Error("x_star dimension does not match the ensemble");
    }
    const std::uint64_t record_every = std::max<std::uint64_t>(options.record_every, 1);

    RunResult result;
    result.final = initial;
    Ensemble& ens = result.final;

    CboParams current = schedule.apply(params, ens.step_index);
    if (options.x_star) {
        result.diagnostics.push_back(
            diagnose(ens, consensus_point(ens.memories, ens.memory_energies, current.alpha), *options.x_star));
    }

    std::optional<Vector> previous;
    Vector old_energies;
    for (std::uint64_t s = 0; s < stop.max_steps; ++s) {
        current = schedule.apply(params, ens.step_index);
        old_energies = ens.memory_energies;
        const StepReport report = advance(ens, current, objective, rng);
        result.steps = s + 1;

        // With a batched objective the cache is refreshed each step, so only
        // the post-refresh comparison is meaningful there.
        if (!objective.batched() && (ens.memory_energies.array() > old_energies.array()).any()) {
            result.memory_monotone = false;
        }
        if (options.observer) options.observer(ens, report);
        if (options.x_star && (result.steps % record_every == 0 || result.steps == stop.max_steps)) {
            result.diagnostics.push_back(diagnose(ens, report.consensus, *options.x_star));
        }
        if (stop.consensus_tolerance && previous &&
            (report.consensus - *previous).norm() < *stop.consensus_tolerance) {
            break;
        }
        previous = report.consensus;
    }
    if (objective.batched()) result.memory_monotone = false;

    current = schedule.apply(params, ens.step_index);
    if (objective.batched()) {
        // reported consensus is weighted by the full-data energies
        Vector full(ens.size());
        for (Index i = 0; i < ens.size(); ++i) full[i] = objective.eval(ens.memories.row(i).transpose(), Objective::kFullData);
        result.consensus = consensus_point(ens.memories, full, current.alpha);
    } else {
        result.consensus = consensus_point(ens.memories, ens.memory_energies, current.alpha);
    }
    return result;
}

}  // namespace cbo
