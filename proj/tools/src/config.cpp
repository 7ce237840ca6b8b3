#include "cbo_cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

namespace cbo::cli {

namespace {

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) throw ConfigError("config key " + (where.empty() ? std::string("<root>") : where) + ": expected a mapping");
    const std::set<std::string> names(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!names.count(key)) throw ConfigError("unknown config key '" + join(where, key) + "'");
    }
}

double parse_real(const std::string& text, const std::string& key) {
    if (text == "inf" || text == "+inf" || text == ".inf" || text == "Infinity") {
        return std::numeric_limits<double>::infinity();
    }
    if (text == "-inf" || text == "-.inf") return -std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || std::isnan(v)) {
        throw ConfigError("config key " + key + ": expected a number, got '" + text + "'");
    }
    return v;
}

std::uint64_t parse_count(const std::string& text, const std::string& key) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("config key " + key + ": expected a nonnegative integer, got '" + text + "'");
    }
    try {
        return std::stoull(text);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": integer out of range");
    }
}

std::string scalar(const YAML::Node& node, const std::string& key) {
    if (!node.IsScalar()) throw ConfigError("config key " + key + ": expected a scalar");
    return node.Scalar();
}

// Readers that leave the target untouched when the key is absent.
void read(const YAML::Node& map, const std::string& where, const char* name, double& out) {
    if (const auto n = map[name]) out = parse_real(scalar(n, join(where, name)), join(where, name));
}

template <typename Int>
void read_count(const YAML::Node& map, const std::string& where, const char* name, Int& out) {
    if (const auto n = map[name]) out = static_cast<Int>(parse_count(scalar(n, join(where, name)), join(where, name)));
}

void read(const YAML::Node& map, const std::string& where, const char* name, bool& out) {
    if (const auto n = map[name]) {
        const auto key = join(where, name);
        const auto s = scalar(n, key);
        if (s == "true") out = true;
        else if (s == "false") out = false;
        else throw ConfigError("config key " + key + ": expected true or false, got '" + s + "'");
    }
}

template <typename Enum>
void read_enum(const YAML::Node& map, const std::string& where, const char* name, Enum& out,
               std::initializer_list<std::pair<const char*, Enum>> choices) {
    const auto n = map[name];
    if (!n) return;
    const auto key = join(where, name);
    const auto s = scalar(n, key);
    std::string names;
    for (const auto& [label, value] : choices) {
        if (s == label) {
            out = value;
            return;
        }
        names += names.empty() ? label : std::string(", ") + label;
    }
    throw ConfigError("config key " + key + ": '" + s + "' is not one of " + names);
}

std::vector<double> read_values(const YAML::Node& node, const std::string& key) {
    if (!node.IsSequence()) throw ConfigError("config key " + key + ": expected a list");
    std::vector<double> out;
    for (const auto& v : node) out.push_back(parse_real(scalar(v, key), key));
    return out;
}

void parse_objective(const YAML::Node& n, ExperimentConfig& c) {
    check_keys(n, "objective", {"kind", "dimension", "batches", "m", "sparsity", "mu", "p", "smoothing"});
    auto& o = c.objective;
    read_enum(n, "objective", "kind", o.kind,
              {{"sphere", ObjectiveKind::Sphere},
               {"rastrigin", ObjectiveKind::Rastrigin},
               {"toy_stochastic", ObjectiveKind::ToyStochastic},
               {"compressed_sensing", ObjectiveKind::CompressedSensing}});
    read_count(n, "objective", "dimension", o.dimension);
    read_count(n, "objective", "batches", o.batches);
    read_count(n, "objective", "m", o.measurements);
    read_count(n, "objective", "sparsity", o.sparsity);
    read(n, "objective", "mu", o.mu);
    read(n, "objective", "p", o.p);
    read(n, "objective", "smoothing", o.smoothing);
}

// Returns true when kappa was set explicitly.
bool parse_params(const YAML::Node& n, ExperimentConfig& c) {
    check_keys(n, "params", {"lambda1", "lambda2", "lambda3", "sigma1", "sigma2", "sigma3", "alpha", "beta", "theta",
                             "kappa", "dt", "diffusion", "consensus_batch", "sigma2_coupling"});
    auto& p = c.params;
    read(n, "params", "lambda1", p.lambda1);
    read(n, "params", "lambda2", p.lambda2);
    read(n, "params", "lambda3", p.lambda3);
    read(n, "params", "sigma1", p.sigma1);
    read(n, "params", "sigma2", p.sigma2);
    read(n, "params", "sigma3", p.sigma3);
    read(n, "params", "alpha", p.alpha);
    read(n, "params", "beta", p.beta);
    read(n, "params", "theta", p.theta);
    read(n, "params", "kappa", p.kappa);
    read(n, "params", "dt", p.dt);
    read_enum(n, "params", "diffusion", p.diffusion,
              {{"anisotropic", Diffusion::Anisotropic}, {"isotropic", Diffusion::Isotropic}});
    read_count(n, "params", "consensus_batch", p.consensus_batch);
    read_enum(n, "params", "sigma2_coupling", c.sigma2_coupling,
              {{"none", Sigma2Coupling::None}, {"lambda1", Sigma2Coupling::Lambda1}, {"lambda2", Sigma2Coupling::Lambda2}});
    return static_cast<bool>(n["kappa"]);
}

void parse_schedule(const YAML::Node& n, ExperimentConfig& c) {
    check_keys(n, "schedule", {"alpha_rule", "sigma_rule", "epoch_length"});
    read_enum(n, "schedule", "alpha_rule", c.schedule.alpha_rule,
              {{"constant", AlphaRule::Constant}, {"double_per_epoch", AlphaRule::DoublePerEpoch}});
    read_enum(n, "schedule", "sigma_rule", c.schedule.sigma_rule,
              {{"constant", SigmaRule::Constant}, {"log2_cooling", SigmaRule::Log2Cooling}});
    read_count(n, "schedule", "epoch_length", c.schedule.epoch_length);
}

void parse_init(const YAML::Node& n, ExperimentConfig& c) {
    check_keys(n, "init", {"kind", "mean", "std", "lower", "upper"});
    read_enum(n, "init", "kind", c.init.kind,
              {{"gaussian", InitSpec::Kind::Gaussian}, {"uniform", InitSpec::Kind::Uniform}});
    const bool gaussian = c.init.kind == InitSpec::Kind::Gaussian;
    for (const char* key : {"mean", "std"}) {
        if (!gaussian && n[key]) throw ConfigError(std::string("config key init.") + key + ": not valid for a uniform init");
    }
    for (const char* key : {"lower", "upper"}) {
        if (gaussian && n[key]) throw ConfigError(std::string("config key init.") + key + ": not valid for a gaussian init");
    }
    if (gaussian) {
        read(n, "init", "mean", c.init.first);
        read(n, "init", "std", c.init.second);
    } else {
        read(n, "init", "lower", c.init.first);
        read(n, "init", "upper", c.init.second);
    }
}

void parse_success(const YAML::Node& n, ExperimentConfig& c) {
    check_keys(n, "success", {"kind", "threshold", "norm", "support_threshold", "residual_tol"});
    read_enum(n, "success", "kind", c.success.kind,
              {{"consensus_near_minimizer", SuccessRule::Kind::ConsensusNearMinimizer},
               {"exact_sparse_recovery", SuccessRule::Kind::ExactSparseRecovery}});
    read(n, "success", "threshold", c.success.threshold);
    read_enum(n, "success", "norm", c.success.norm, {{"inf", SuccessRule::Norm::Inf}, {"2", SuccessRule::Norm::Two}});
    read(n, "success", "support_threshold", c.success.support_threshold);
    read(n, "success", "residual_tol", c.success.residual_tol);
}

void parse_experiment(const YAML::Node& n, ExperimentConfig& c) {
    check_keys(n, "experiment", {"n_particles", "horizon", "trials", "record_diagnostics", "record_every"});
    read_count(n, "experiment", "n_particles", c.n_particles);
    read(n, "experiment", "horizon", c.horizon);
    read_count(n, "experiment", "trials", c.trials);
    read(n, "experiment", "record_diagnostics", c.record_diagnostics);
    read_count(n, "experiment", "record_every", c.record_every);
}

SweepAxis parse_axis(const YAML::Node& n, const std::string& where) {
    check_keys(n, where, {"param", "values"});
    SweepAxis axis;
    if (!n["param"]) throw ConfigError("config key " + where + ".param is required");
    axis.param = scalar(n["param"], where + ".param");
    if (!is_sweepable(axis.param)) throw ConfigError("config key " + where + ".param: '" + axis.param + "' is not sweepable");
    if (!n["values"]) throw ConfigError("config key " + where + ".values is required");
    axis.values = read_values(n["values"], where + ".values");
    if (axis.values.empty()) throw ConfigError("config key " + where + ".values: empty list");
    return axis;
}

void parse_sweep(const YAML::Node& n, ExperimentConfig& c) {
    check_keys(n, "sweep", {"x", "y"});
    if (!n["x"] || !n["y"]) throw ConfigError("config key sweep: both x and y axes are required");
    c.sweep = Sweep{parse_axis(n["x"], "sweep.x"), parse_axis(n["y"], "sweep.y")};
}

void parse_theory(const YAML::Node& n, ResolvedConfig& c) {
    check_keys(n, "theory", {"eta", "nu", "R0", "E_inf", "C_grad", "E_min"});
    auto& k = c.constants;
    read(n, "theory", "eta", k.eta);
    read(n, "theory", "nu", k.nu);
    read(n, "theory", "R0", k.R0);
    read(n, "theory", "E_inf", k.E_inf);
    read(n, "theory", "E_min", k.E_min);
    if (n["C_grad"]) {
        double v = 0.0;
        read(n, "theory", "C_grad", v);
        k.C_grad = v;
    }
}

void parse_decay(const YAML::Node& n, ResolvedConfig& c) {
    check_keys(n, "decay", {"vartheta", "eps"});
    read(n, "decay", "vartheta", c.decay.vartheta);
    read(n, "decay", "eps", c.decay.eps);
}

void parse_bounds(const YAML::Node& n, ResolvedConfig& c) {
    check_keys(n, "bounds", {"q", "r", "c", "B"});
    read(n, "bounds", "q", c.bounds.q);
    read(n, "bounds", "r", c.bounds.r);
    read(n, "bounds", "c", c.bounds.c);
    read(n, "bounds", "B", c.bounds.B);
}

void parse_gradcheck(const YAML::Node& n, ResolvedConfig& c) {
    check_keys(n, "gradcheck", {"points", "h", "tolerance", "scale", "min_abs"});
    read_count(n, "gradcheck", "points", c.gradcheck.points);
    read(n, "gradcheck", "h", c.gradcheck.h);
    read(n, "gradcheck", "tolerance", c.gradcheck.tolerance);
    read(n, "gradcheck", "scale", c.gradcheck.scale);
    read(n, "gradcheck", "min_abs", c.gradcheck.min_abs);
}

ResolvedConfig defaults() {
    ResolvedConfig c;
    auto& p = c.experiment.params;
    p.dt = 0.01;
    p.alpha = 100.0;
    p.beta = kInfinity;
    p.theta = 0.0;
    p.lambda1 = 1.0;
    p.sigma1 = std::sqrt(1.6);
    c.experiment.horizon = 20.0;
    return c;
}

// Re-raise library validation errors as configuration errors.
void validate(const ResolvedConfig& c) {
    try {
        c.experiment.validate();
        c.constants.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (!(c.decay.vartheta >= 0.0 && c.decay.vartheta < 1.0)) throw ConfigError("config key decay.vartheta: need [0, 1)");
    if (!(c.decay.eps > 0.0)) throw ConfigError("config key decay.eps: must be > 0");
    if (!(c.bounds.q > 0.0)) throw ConfigError("config key bounds.q: must be > 0");
    if (!(c.bounds.r > 0.0)) throw ConfigError("config key bounds.r: must be > 0");
    if (!(c.bounds.B >= 0.0)) throw ConfigError("config key bounds.B: must be >= 0");
    if (c.gradcheck.points < 1) throw ConfigError("config key gradcheck.points: must be >= 1");
    if (!(c.gradcheck.h > 0.0)) throw ConfigError("config key gradcheck.h: must be > 0");
    if (!(c.gradcheck.tolerance > 0.0)) throw ConfigError("config key gradcheck.tolerance: must be > 0");
    if (!(c.gradcheck.scale > 0.0)) throw ConfigError("config key gradcheck.scale: must be > 0");
    if (!(c.gradcheck.min_abs >= 0.0 && c.gradcheck.min_abs < c.gradcheck.scale)) {
        throw ConfigError("config key gradcheck.min_abs: need 0 <= min_abs < scale");
    }
}

std::string real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ResolvedConfig parse_config(const std::string& text, const Overrides& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    ResolvedConfig c = defaults();
    bool kappa_set = false;
    if (root && !root.IsNull()) {
        check_keys(root, "", {"seed", "objective", "params", "schedule", "init", "success", "experiment", "sweep",
                              "theory", "decay", "bounds", "gradcheck"});
        read_count(root, "", "seed", c.experiment.seed);
        if (root["objective"]) parse_objective(root["objective"], c.experiment);
        if (root["params"]) kappa_set = parse_params(root["params"], c.experiment);
        if (root["schedule"]) parse_schedule(root["schedule"], c.experiment);
        if (root["init"]) parse_init(root["init"], c.experiment);
        if (root["success"]) parse_success(root["success"], c.experiment);
        if (root["experiment"]) parse_experiment(root["experiment"], c.experiment);
        if (root["sweep"]) parse_sweep(root["sweep"], c.experiment);
        if (root["theory"]) parse_theory(root["theory"], c);
        if (root["decay"]) parse_decay(root["decay"], c);
        if (root["bounds"]) parse_bounds(root["bounds"], c);
        if (root["gradcheck"]) parse_gradcheck(root["gradcheck"], c);
    }

    if (overrides.seed_flag) {
        c.experiment.seed = *overrides.seed_flag;
    } else if (overrides.seed_env) {
        c.experiment.seed = parse_count(*overrides.seed_env, "CBO_SEED");
    }
    if (overrides.dt_flag) {
        c.experiment.params.dt = *overrides.dt_flag;
    } else if (overrides.dt_env) {
        c.experiment.params.dt = parse_real(*overrides.dt_env, "CBO_DT");
    }
    if (!kappa_set && c.experiment.params.dt > 0.0) c.experiment.params.kappa = 1.0 / c.experiment.params.dt;

    validate(c);
    return c;
}

ResolvedConfig load_config(const std::string& path, const Overrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), overrides);
}

Overrides environment_overrides() {
    Overrides o;
    if (const char* s = std::getenv("CBO_SEED")) o.seed_env = s;
    if (const char* s = std::getenv("CBO_DT")) o.dt_env = s;
    return o;
}

std::string to_yaml(const ResolvedConfig& config) {
    const auto& c = config.experiment;
    const auto& o = c.objective;
    const auto& p = c.params;
    std::ostringstream out;
    out << "seed: " << c.seed << "\n";

    static const char* kinds[] = {"sphere", "rastrigin", "toy_stochastic", "compressed_sensing"};
    out << "objective:\n"
        << "  kind: " << kinds[static_cast<int>(o.kind)] << "\n"
        << "  dimension: " << o.dimension << "\n"
        << "  batches: " << o.batches << "\n"
        << "  m: " << o.measurements << "\n"
        << "  sparsity: " << o.sparsity << "\n"
        << "  mu: " << real(o.mu) << "\n"
        << "  p: " << real(o.p) << "\n"
        << "  smoothing: " << real(o.smoothing) << "\n";

    static const char* couplings[] = {"none", "lambda1", "lambda2"};
    out << "params:\n"
        << "  lambda1: " << real(p.lambda1) << "\n"
        << "  lambda2: " << real(p.lambda2) << "\n"
        << "  lambda3: " << real(p.lambda3) << "\n"
        << "  sigma1: " << real(p.sigma1) << "\n"
        << "  sigma2: " << real(p.sigma2) << "\n"
        << "  sigma3: " << real(p.sigma3) << "\n"
        << "  alpha: " << real(p.alpha) << "\n"
        << "  beta: " << real(p.beta) << "\n"
        << "  theta: " << real(p.theta) << "\n"
        << "  kappa: " << real(p.kappa) << "\n"
        << "  dt: " << real(p.dt) << "\n"
        << "  diffusion: " << (p.diffusion == Diffusion::Isotropic ? "isotropic" : "anisotropic") << "\n"
        << "  consensus_batch: " << p.consensus_batch << "\n"
        << "  sigma2_coupling: " << couplings[static_cast<int>(c.sigma2_coupling)] << "\n";

    out << "schedule:\n"
        << "  alpha_rule: " << (c.schedule.alpha_rule == AlphaRule::Constant ? "constant" : "double_per_epoch") << "\n"
        << "  sigma_rule: " << (c.schedule.sigma_rule == SigmaRule::Constant ? "constant" : "log2_cooling") << "\n"
        << "  epoch_length: " << c.schedule.epoch_length << "\n";

    if (c.init.kind == InitSpec::Kind::Gaussian) {
        out << "init:\n  kind: gaussian\n  mean: " << real(c.init.first) << "\n  std: " << real(c.init.second) << "\n";
    } else {
        out << "init:\n  kind: uniform\n  lower: " << real(c.init.first) << "\n  upper: " << real(c.init.second) << "\n";
    }

    out << "success:\n"
        << "  kind: "
        << (c.success.kind == SuccessRule::Kind::ConsensusNearMinimizer ? "consensus_near_minimizer" : "exact_sparse_recovery")
        << "\n"
        << "  threshold: " << real(c.success.threshold) << "\n"
        << "  norm: " << (c.success.norm == SuccessRule::Norm::Inf ? "inf" : "2") << "\n"
        << "  support_threshold: " << real(c.success.support_threshold) << "\n"
        << "  residual_tol: " << real(c.success.residual_tol) << "\n";

    out << "experiment:\n"
        << "  n_particles: " << c.n_particles << "\n"
        << "  horizon: " << real(c.horizon) << "\n"
        << "  trials: " << c.trials << "\n"
        << "  record_diagnostics: " << (c.record_diagnostics ? "true" : "false") << "\n"
        << "  record_every: " << c.record_every << "\n";

    if (c.sweep) {
        out << "sweep:\n";
        for (const auto& [name, axis] : {std::pair{"x", &c.sweep->x}, std::pair{"y", &c.sweep->y}}) {
            out << "  " << name << ":\n    param: " << axis->param << "\n    values: [";
            for (std::size_t i = 0; i < axis->values.size(); ++i) out << (i ? ", " : "") << real(axis->values[i]);
            out << "]\n";
        }
    }

    const auto& k = config.constants;
    out << "theory:\n"
        << "  eta: " << real(k.eta) << "\n"
        << "  nu: " << real(k.nu) << "\n"
        << "  R0: " << real(k.R0) << "\n"
        << "  E_inf: " << real(k.E_inf) << "\n";
    if (k.C_grad) out << "  C_grad: " << real(*k.C_grad) << "\n";
    out << "  E_min: " << real(k.E_min) << "\n";

    out << "decay:\n  vartheta: " << real(config.decay.vartheta) << "\n  eps: " << real(config.decay.eps) << "\n";
    out << "bounds:\n  q: " << real(config.bounds.q) << "\n  r: " << real(config.bounds.r) << "\n  c: "
        << real(config.bounds.c) << "\n  B: " << real(config.bounds.B) << "\n";
    out << "gradcheck:\n  points: " << config.gradcheck.points << "\n  h: " << real(config.gradcheck.h)
        << "\n  tolerance: " << real(config.gradcheck.tolerance) << "\n  scale: " << real(config.gradcheck.scale)
        << "\n  min_abs: " << real(config.gradcheck.min_abs) << "\n";
    return out.str();
}

}  // namespace cbo::cli
