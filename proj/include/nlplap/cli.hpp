#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nlplap/analysis.hpp"

namespace nlplap::cli {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;  // slope window or property check failed
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNoConvergence = 3;
inline constexpr int kExitRuntime = 4;  // any other library error

/// Effective run configuration. Every field has a dotted config key; see
/// `config_keys()` and README for the list.
struct RunConfig {
    std::string kernel_variant = "separable_linear";
    double kernel_beta = 0.5;
    double kernel_c = 1.0;
    double kernel_slope = 1.0;

    double p = 2.0;
    std::string scheme = "backward_euler";
    std::size_t n = 64;

    double T = 1.0;
    double tau = 1e-2;
    double tau_max = 1e-2;
    double safety = 0.9;
    double residual_floor = 1e-8;
    double alpha0 = 0.1;
    double alpha_decay = 1.0;
    std::size_t max_steps = 1000000;

    /// 0 selects the default rule 1e-10 max(1, ||b||).
    double solve_tol = 0.0;
    std::size_t max_iters = 500;

    std::string data_preset = "ramp";
    double data_value = 1.0;
    double data_w0 = 1.0;
    std::string source_preset = "zero";
    double source_value = 0.0;

    std::size_t checkpoint_every = 1;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    /// 0: rho_n = n^(-rho_exponent).
    double rho = 0.0;
    double rho_exponent = 0.25;
    std::size_t seed_count = 10;
    bool truncated_reference = true;

    std::vector<std::size_t> n_list{32, 64, 128};
    std::size_t n_ref = 512;
    std::vector<double> tau_list{1.0 / 16, 1.0 / 32, 1.0 / 64};
    double ref_divisor = 16.0;
    std::string extension = "constant";
    bool check_time_error = false;
    std::optional<double> slope_min;
    std::optional<double> slope_max;

    std::size_t verify_samples = 2000;
};

struct ConfigKey {
    std::string key;
    std::string help;
};

/// Every accepted key, in echo order.
const std::vector<ConfigKey>& config_keys();

/// Parses "key = value" lines ('#' starts a comment) on top of the defaults.
/// Throws ConfigError naming the key and line on unknown keys, duplicates and
/// malformed values.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Checks cross-field constraints (scheme/p pairs, positivity, presets).
/// Throws ConfigError naming the key.
void validate(const RunConfig& cfg);

/// Effective configuration in the input format; parsing it yields `cfg` again.
std::string echo(const RunConfig& cfg);

KernelSpec make_kernel(const RunConfig& cfg);
std::function<double(double)> make_initial(const RunConfig& cfg);
std::function<SourceTerm(const MeshPtr&)> make_source(const RunConfig& cfg);
SchemeSettings make_settings(const RunConfig& cfg);
double rho_for(const RunConfig& cfg, std::size_t n);

int cmd_solve(const RunConfig& cfg, const std::filesystem::path& out);
int cmd_study(const RunConfig& cfg, const std::string& kind, const std::filesystem::path& out);
int cmd_sample_graph(const RunConfig& cfg, const std::filesystem::path& out);
int cmd_verify_properties(const RunConfig& cfg, const std::filesystem::path& out);

/// Entry point used by the executable: parses arguments, runs, maps errors to exit codes.
int run(int argc, char** argv);

}  // namespace nlplap::cli
