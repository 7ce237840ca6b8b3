#include "cbo_cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace cbo::cli {

namespace {

using nlohmann::json;

const std::vector<std::string> kCommands = {"run", "sweep-rastrigin", "sweep-cs", "decay", "check-bounds", "gradcheck"};

enum class Format { Csv, Json };

struct Output {
    std::string text;
    int code = kOk;
    std::string failure;
};

json number(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    if (std::isnan(v)) return json("nan");
    return json(v);
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Output cmd_run(const ResolvedConfig& rc, Format format, std::size_t workers) {
    const TrialSummary summary = run_trials(rc.experiment, workers);
    Output out;
    out.text = format == Format::Json ? to_json(summary, rc.experiment) + "\n" : to_csv(summary);
    if (summary.failures > 0) {
        out.code = kRuntimeError;
        for (const auto& r : summary.results) {
            if (r.failed) {
                out.failure = std::to_string(summary.failures) + " trial(s) failed, first: " + r.failure_reason;
                break;
            }
        }
    }
    return out;
}

Output cmd_sweep(const ResolvedConfig& rc, Format format, std::size_t workers, ObjectiveKind kind) {
    const auto& base = rc.experiment;
    if (base.objective.kind != kind) {
        throw ConfigError(std::string("config key objective.kind: this command needs ") +
                          (kind == ObjectiveKind::Rastrigin ? "rastrigin" : "compressed_sensing"));
    }
    Sweep grid;
    if (base.sweep) {
        grid = *base.sweep;
    } else if (kind == ObjectiveKind::Rastrigin) {
        grid = {{"lambda2", {0.0, 1.0, 2.0, 4.0}}, {"n_particles", {static_cast<double>(base.n_particles)}}};
    } else {
        grid = {{"lambda3", {0.0, 1.0}}, {"m", {static_cast<double>(base.objective.measurements)}}};
    }
    const PhaseDiagram diagram = sweep(base, grid, workers);
    Output out;
    if (format == Format::Json) {
        ExperimentConfig shown = base;
        shown.sweep = grid;
        out.text = to_json(diagram, shown) + "\n";
    } else {
        out.text = to_csv(diagram);
    }
    return out;
}

Output cmd_decay(const ResolvedConfig& rc, Format format) {
    const auto& c = rc.experiment;
    DecayConfig dc;
    dc.params = c.effective_params();
    dc.constants = rc.constants;
    dc.n_particles = c.n_particles;
    dc.horizon = c.horizon;
    dc.vartheta = rc.decay.vartheta;
    dc.eps = rc.decay.eps;
    dc.init = c.init.resolve(c.objective.dimension);
    dc.seed = c.seed;
    const Objective objective = trial_objective(c, 0);
    const DecayReport report = decay_experiment(objective, trial_minimizer(c, 0), dc);

    Output out;
    if (format == Format::Json) {
        out.text = to_json(report) + "\n";
    } else {
        std::ostringstream s;
        s << "step,time,V,W2_sq,consensus_error\n";
        for (const auto& d : report.diagnostics) {
            s << d.step << ',' << fmt(d.time) << ',' << fmt(d.lyapunov) << ',' << fmt(d.wasserstein2_sq) << ','
              << fmt(d.consensus_error) << '\n';
        }
        out.text = s.str();
    }
    return out;
}

// Evaluates a theory quantity, recording the error message instead when its
// preconditions fail.
template <typename F>
json attempt(F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        return json{{"error", e.what()}};
    }
}

Output cmd_check_bounds(const ResolvedConfig& rc, Format format) {
    const auto& c = rc.experiment;
    const CboParams params = c.effective_params();
    const Objective objective = trial_objective(c, 0);
    const Vector x_star = trial_minimizer(c, 0);
    const Index d = objective.dimension();
    const RngStream rng(c.seed, 0);
    const Ensemble ens = init_ensemble(c.n_particles, d, c.init.resolve(d), objective, rng);
    const double V0 = lyapunov_V(ens, x_star).total;

    json report;
    report["rates"] = attempt([&] {
        const Rates r = chi_rates(params, rc.constants);
        return json{{"chi1", number(r.chi1)}, {"chi2", number(r.chi2)}};
    });
    report["rates_memoryless"] = attempt([&] {
        const Rates r = chi_rates_memoryless(params, rc.constants);
        return json{{"chi1", number(r.chi1)}, {"chi2", number(r.chi2)}};
    });
    report["V0"] = number(V0);
    report["W2_sq_0"] = number(wasserstein2_to_dirac(ens, x_star));
    report["time_horizon"] = attempt([&] {
        const Rates r = chi_rates(params, rc.constants);
        const HorizonReport h = time_horizon_star(V0, rc.decay.eps, rc.decay.vartheta, r.chi1, r.chi2);
        return json{{"t_star", number(h.t_star)}, {"lower_bracket", number(h.lower_bracket.value_or(0.0))}};
    });
    report["laplace"] = attempt([&] {
        const BoundReport b =
            laplace_bound(ens.memories, ens.memory_energies, x_star, params.alpha, rc.bounds.q, rc.bounds.r, rc.constants);
        return json::parse(to_json(b));
    });
    report["C_upsilon"] = number(upsilon_constant(rc.bounds.r, rc.bounds.B, d, rc.constants.C_grad.value_or(0.0)));
    report["mass_decay_rate_p"] = attempt([&] {
        return json(number(mass_decay_rate_p(params, rc.bounds.r, rc.bounds.B, rc.bounds.c, d, rc.constants)));
    });

    Output out;
    if (format == Format::Json) {
        out.text = report.dump(2) + "\n";
    } else {
        std::ostringstream s;
        s << "quantity,value\n";
        for (const auto& item : report.flatten().items()) {
            const auto& v = item.value();
            s << item.key() << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
        }
        out.text = s.str();
    }
    return out;
}

Output cmd_gradcheck(const ResolvedConfig& rc, Format format) {
    const auto& c = rc.experiment;
    const auto& g = rc.gradcheck;
    const Objective objective = trial_objective(c, 0);
    if (!objective.has_gradient()) throw Error("objective has no analytic gradient");
    const Index d = objective.dimension();
    const RngStream rng(c.seed, 0);

    std::vector<double> errors;
    errors.reserve(g.points);
    for (std::size_t i = 0; i < g.points; ++i) {
        auto engine = rng.engine(i, 0, Channel::Init);
        std::uniform_real_distribution<double> magnitude(g.min_abs, g.scale);
        std::bernoulli_distribution negative(0.5);
        Vector x(d);
        for (Index k = 0; k < d; ++k) x[k] = negative(engine) ? -magnitude(engine) : magnitude(engine);
        const Vector analytic = objective.grad(x);
        const Vector numeric = finite_diff_grad(objective, x, g.h);
        errors.push_back((analytic - numeric).norm() / std::max(numeric.norm(), 1e-300));
    }
    const double worst = *std::max_element(errors.begin(), errors.end());
    const bool passed = worst <= g.tolerance;

    Output out;
    out.code = passed ? kOk : kRuntimeError;
    if (!passed) out.failure = "gradient check failed: max relative error " + fmt(worst);
    if (format == Format::Json) {
        json report = {{"points", g.points}, {"h", number(g.h)},           {"tolerance", number(g.tolerance)},
                       {"max_rel_error", number(worst)}, {"passed", passed}};
        out.text = report.dump(2) + "\n";
    } else {
        std::ostringstream s;
        s << "point,rel_error\n";
        for (std::size_t i = 0; i < errors.size(); ++i) s << i << ',' << fmt(errors[i]) << '\n';
        out.text = s.str();
    }
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Overrides& env) {
    CLI::App app{"Consensus-based optimization with memory effects and gradient information"};
    std::string command;
    std::string config_path;
    std::string out_path;
    std::string format_name;
    std::size_t workers = 1;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;

    app.add_option("command", command, "run | sweep-rastrigin | sweep-cs | decay | check-bounds | gradcheck")
        ->required()
        ->check(CLI::IsMember(kCommands));
    app.add_option("--config", config_path, "YAML config file (defaults apply when omitted)");
    app.add_option("--seed", seed, "base seed, overrides CBO_SEED and the config file");
    app.add_option("--dt", dt, "time step, overrides CBO_DT and the config file");
    app.add_option("--out", out_path, "output file (stdout when omitted)");
    app.add_option("--format", format_name, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }

    ResolvedConfig rc;
    try {
        Overrides overrides = env;
        overrides.seed_flag = seed;
        overrides.dt_flag = dt;
        rc = config_path.empty() ? parse_config("", overrides) : load_config(config_path, overrides);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    err << "# resolved config\n" << to_yaml(rc);

    const bool sweeping = command == "sweep-rastrigin" || command == "sweep-cs";
    const Format format =
        format_name.empty() ? (sweeping ? Format::Csv : Format::Json) : (format_name == "csv" ? Format::Csv : Format::Json);

    Output result;
    try {
        if (command == "run") result = cmd_run(rc, format, workers);
        else if (command == "sweep-rastrigin") result = cmd_sweep(rc, format, workers, ObjectiveKind::Rastrigin);
        else if (command == "sweep-cs") result = cmd_sweep(rc, format, workers, ObjectiveKind::CompressedSensing);
        else if (command == "decay") result = cmd_decay(rc, format);
        else if (command == "check-bounds") result = cmd_check_bounds(rc, format);
        else result = cmd_gradcheck(rc, format);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    }

    if (out_path.empty()) {
        out << result.text;
    } else {
        std::ofstream file(out_path, std::ios::binary);
        if (!file) {
            err << "runtime error: cannot write " << out_path << "\n";
            return kRuntimeError;
        }
        file << result.text;
    }
    if (result.code == kRuntimeError) err << "runtime error: " << result.failure << "\n";
    return result.code;
}

}  // namespace cbo::cli
