#pragma once

#include "cbo/harness.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace cbo::cli {

/// Bad config file, flag or environment value (exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Settings for the `decay` command.
struct DecaySettings {
    double vartheta = 0.25;
    double eps = 1e-4;
};

/// Settings for the `check-bounds` command.
struct BoundSettings {
    double q = 0.1;
    double r = 0.5;
    double c = 0.75;
    double B = 1.0;
};

/// Settings for the `gradcheck` command.
struct GradcheckSettings {
    std::size_t points = 100;
    double h = 1e-6;
    double tolerance = 1e-5;
    double scale = 1.0;     ///< coordinates drawn with |x_k| uniform in [min_abs, scale]
    double min_abs = 0.05;  ///< keeps points away from the kinks of |x|^p
};

struct ResolvedConfig {
    ExperimentConfig experiment;
    AssumptionConstants constants;
    DecaySettings decay;
    BoundSettings bounds;
    GradcheckSettings gradcheck;
};

/// Values that outrank the config file. Environment values are passed in
/// explicitly so tests do not depend on the process environment.
struct Overrides {
    std::optional<std::uint64_t> seed_flag;
    std::optional<std::string> seed_env;
    std::optional<double> dt_flag;
    std::optional<std::string> dt_env;
};

/// Parses YAML text. Unknown keys, type mismatches and constraint
/// violations raise ConfigError naming the key.
ResolvedConfig parse_config(const std::string& text, const Overrides& overrides = {});
ResolvedConfig load_config(const std::string& path, const Overrides& overrides = {});

/// Fully explicit YAML; parse_config(to_yaml(c)) == c.
std::string to_yaml(const ResolvedConfig& config);

/// Reads CBO_SEED / CBO_DT from the process environment.
Overrides environment_overrides();

}  // namespace cbo::cli
