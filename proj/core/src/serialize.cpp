#include "cbo/harness.hpp"
#include "cbo/theory.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace cbo {

namespace {

using nlohmann::json;

// JSON has no infinity; +inf is written as the string "inf".
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

const char* name_of(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::Sphere: return "sphere";
        case ObjectiveKind::Rastrigin: return "rastrigin";
        case ObjectiveKind::ToyStochastic: return "toy_stochastic";
        case ObjectiveKind::CompressedSensing: return "compressed_sensing";
    }
    return "unknown";
}

const char* name_of(Sigma2Coupling c) {
    switch (c) {
        case Sigma2Coupling::None: return "none";
        case Sigma2Coupling::Lambda1: return "lambda1";
        case Sigma2Coupling::Lambda2: return "lambda2";
    }
    return "none";
}

json vector_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
    return out;
}

json config_json(const ExperimentConfig& c) {
    json objective = {{"kind", name_of(c.objective.kind)}, {"dimension", c.objective.dimension}};
    if (c.objective.kind == ObjectiveKind::ToyStochastic) objective["batches"] = c.objective.batches;
    if (c.objective.kind == ObjectiveKind::CompressedSensing) {
        objective["m"] = c.objective.measurements;
        objective["sparsity"] = c.objective.sparsity;
        objective["mu"] = number(c.objective.mu);
        objective["p"] = number(c.objective.p);
        objective["smoothing"] = number(c.objective.smoothing);
    }
    const auto& p = c.params;
    json params = {{"lambda1", number(p.lambda1)}, {"lambda2", number(p.lambda2)}, {"lambda3", number(p.lambda3)},
                   {"sigma1", number(p.sigma1)},   {"sigma2", number(p.sigma2)},   {"sigma3", number(p.sigma3)},
                   {"alpha", number(p.alpha)},     {"beta", number(p.beta)},       {"theta", number(p.theta)},
                   {"kappa", number(p.kappa)},     {"dt", number(p.dt)},
                   {"diffusion", p.diffusion == Diffusion::Isotropic ? "isotropic" : "anisotropic"},
                   {"consensus_batch", p.consensus_batch},
                   {"sigma2_coupling", name_of(c.sigma2_coupling)}};
    json schedule = {
        {"alpha_rule", c.schedule.alpha_rule == AlphaRule::Constant ? "constant" : "double_per_epoch"},
        {"sigma_rule", c.schedule.sigma_rule == SigmaRule::Constant ? "constant" : "log2_cooling"},
        {"epoch_length", c.schedule.epoch_length}};
    json init = c.init.kind == InitSpec::Kind::Gaussian
                    ? json{{"kind", "gaussian"}, {"mean", number(c.init.first)}, {"std", number(c.init.second)}}
                    : json{{"kind", "uniform"}, {"lower", number(c.init.first)}, {"upper", number(c.init.second)}};
    json success;
    if (c.success.kind == SuccessRule::Kind::ConsensusNearMinimizer) {
        success = {{"kind", "consensus_near_minimizer"},
                   {"threshold", number(c.success.threshold)},
                   {"norm", c.success.norm == SuccessRule::Norm::Inf ? "inf" : "2"}};
    } else {
        success = {{"kind", "exact_sparse_recovery"},
                   {"support_threshold", number(c.success.support_threshold)},
                   {"residual_tol", number(c.success.residual_tol)}};
    }
    json experiment = {{"n_particles", c.n_particles}, {"horizon", number(c.horizon)}, {"trials", c.trials},
                       {"seed", c.seed},  {"record_diagnostics", c.record_diagnostics},
                       {"record_every", c.record_every}};
    json out = {{"objective", objective}, {"params", params},   {"schedule", schedule},
                {"init", init},           {"success", success}, {"experiment", experiment}};
    if (c.sweep) {
        json values_x = json::array(), values_y = json::array();
        for (double v : c.sweep->x.values) values_x.push_back(number(v));
        for (double v : c.sweep->y.values) values_y.push_back(number(v));
        out["sweep"] = {{"x", {{"param", c.sweep->x.param}, {"values", values_x}}},
                        {"y", {{"param", c.sweep->y.param}, {"values", values_y}}}};
    }
    return out;
}

json summary_json(const TrialSummary& s, bool with_trials) {
    json out = {{"success_prob", s.probability}, {"ci_low", s.ci.low}, {"ci_high", s.ci.high},
                {"trials", s.trials},           {"successes", s.successes}, {"failures", s.failures}};
    if (with_trials) {
        json trials = json::array();
        for (const auto& r : s.results) {
            json t = {{"index", r.index}, {"seed", r.seed}, {"success", r.success}, {"failed", r.failed},
                      {"consensus", vector_json(r.consensus)}, {"memory_monotone", r.memory_monotone}};
            if (!r.failure_reason.empty()) t["reason"] = r.failure_reason;
            if (r.recorded_steps > 0) {
                t["recorded_steps"] = r.recorded_steps;
                t["max_w2_excess"] = number(r.max_w2_excess);
            }
            trials.push_back(std::move(t));
        }
        out["per_trial"] = std::move(trials);
    }
    return out;
}

void csv_row(std::ostringstream& out, const std::string& xp, double xv, const std::string& yp, double yv,
             const TrialSummary& s) {
    out << xp << ',' << fmt(xv) << ',' << yp << ',' << fmt(yv) << ',' << fmt(s.probability) << ',' << fmt(s.ci.low)
        << ',' << fmt(s.ci.high) << ',' << s.trials << ',' << s.failures << '\n';
}

constexpr const char* kCsvHeader = "x_param,x_value,y_param,y_value,success_prob,ci_low,ci_high,trials,failures\n";

}  // namespace

std::string to_csv(const PhaseDiagram& diagram) {
    std::ostringstream out;
    out << kCsvHeader;
    for (std::size_t iy = 0; iy < diagram.y.values.size(); ++iy) {
        for (std::size_t ix = 0; ix < diagram.x.values.size(); ++ix) {
            csv_row(out, diagram.x.param, diagram.x.values[ix], diagram.y.param, diagram.y.values[iy],
                    diagram.cell(ix, iy));
        }
    }
    return out.str();
}

std::string to_csv(const TrialSummary& summary) {
    std::ostringstream out;
    out << kCsvHeader;
    csv_row(out, "none", 0.0, "none", 0.0, summary);
    return out.str();
}

std::string to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

std::string to_json(const PhaseDiagram& diagram, const ExperimentConfig& config) {
    json cells = json::array();
    for (std::size_t iy = 0; iy < diagram.y.values.size(); ++iy) {
        for (std::size_t ix = 0; ix < diagram.x.values.size(); ++ix) {
            json cell = summary_json(diagram.cell(ix, iy), false);
            cell["x_param"] = diagram.x.param;
            cell["x_value"] = number(diagram.x.values[ix]);
            cell["y_param"] = diagram.y.param;
            cell["y_value"] = number(diagram.y.values[iy]);
            cells.push_back(std::move(cell));
        }
    }
    json out = {{"config", config_json(config)}, {"trials_per_cell", diagram.trials_per_cell}, {"cells", cells}};
    return out.dump(2);
}

std::string to_json(const TrialSummary& summary, const ExperimentConfig& config) {
    json out = {{"config", config_json(config)}, {"summary", summary_json(summary, true)}};
    return out.dump(2);
}

std::string to_json(const BoundReport& report) {
    json out = {{"lhs", number(report.lhs)},   {"rhs", number(report.rhs)}, {"holds", report.holds},
                {"mass", number(report.mass)}, {"E_r", number(report.E_r)}};
    return out.dump(2);
}

std::string to_json(const DecayFit& fit) {
    json out = {{"rate", number(fit.rate)}, {"intercept", number(fit.intercept)}, {"r_squared", number(fit.r_squared)}};
    return out.dump(2);
}

std::string to_json(const DecayReport& report) {
    json series = json::array();
    for (const auto& d : report.diagnostics) {
        series.push_back({{"step", d.step},
                          {"time", number(d.time)},
                          {"V", number(d.lyapunov)},
                          {"W2_sq", number(d.wasserstein2_sq)},
                          {"consensus_error", number(d.consensus_error)}});
    }
    json out = {{"chi1", number(report.rates.chi1)},
                {"chi2", number(report.rates.chi2)},
                {"lower_rate", number(report.lower_rate)},
                {"upper_rate", number(report.upper_rate)},
                {"rate", number(report.fit.rate)},
                {"intercept", number(report.fit.intercept)},
                {"r_squared", number(report.fit.r_squared)},
                {"meets_lower", report.meets_lower},
                {"window_samples", report.window_samples},
                {"memory_monotone", report.memory_monotone},
                {"max_w2_excess", number(report.max_w2_excess)},
                {"series", series}};
    return out.dump(2);
}

}  // namespace cbo
