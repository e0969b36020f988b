#include "nlplap/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "nlplap/errors.hpp"
#include "nlplap/parallel.hpp"
#include "nlplap/quadrature.hpp"
#include "nlplap/rng.hpp"

namespace nlplap::cli {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

// Value parsers throw std::invalid_argument; the caller adds key and line.
double parse_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) throw std::invalid_argument("expected a finite number");
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw std::invalid_argument("expected a nonnegative integer");
    return v;
}

std::size_t parse_size(const std::string& s) { return static_cast<std::size_t>(parse_u64(s)); }

bool parse_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw std::invalid_argument("expected true or false");
}

std::string parse_choice(const std::string& s, std::initializer_list<const char*> choices) {
    for (const char* c : choices)
        if (s == c) return s;
    std::string all;
    for (const char* c : choices) all += (all.empty() ? "" : ", ") + std::string(c);
    throw std::invalid_argument("expected one of: " + all);
}

template <class T, class F>
std::vector<T> parse_list(const std::string& s, F item) {
    std::vector<T> out;
    for (const auto& x : split_list(s)) out.push_back(item(x));
    if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
    return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F fmt_item) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt_item(v[i]);
    return out;
}

std::string fmt_size(std::size_t v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

struct Field {
    ConfigKey doc;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {{"kernel.variant", "power_law | constant | separable_linear"},
         [](RunConfig& c, const std::string& v) {
             c.kernel_variant = parse_choice(v, {"power_law", "constant", "separable_linear"});
         },
         [](const RunConfig& c) { return c.kernel_variant; }},
        {{"kernel.beta", "power-law exponent in (0, 1)"},
         [](RunConfig& c, const std::string& v) { c.kernel_beta = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.kernel_beta); }},
        {{"kernel.c", "value of the constant kernel"},
         [](RunConfig& c, const std::string& v) { c.kernel_c = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.kernel_c); }},
        {{"kernel.slope", "separable kernel a(x) = 1 + slope x"},
         [](RunConfig& c, const std::string& v) { c.kernel_slope = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.kernel_slope); }},
        {{"p", "exponent of the p-Laplacian"}, [](RunConfig& c, const std::string& v) { c.p = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.p); }},
        {{"scheme.name", "forward_euler | subgradient_p1 | backward_euler"},
         [](RunConfig& c, const std::string& v) {
             c.scheme = parse_choice(v, {"forward_euler", "subgradient_p1", "backward_euler"});
         },
         [](const RunConfig& c) { return c.scheme; }},
        {{"mesh.n", "number of cells (solve, time study, sample-graph)"},
         [](RunConfig& c, const std::string& v) { c.n = parse_size(v); },
         [](const RunConfig& c) { return fmt_size(c.n); }},
        {{"time.T", "horizon"}, [](RunConfig& c, const std::string& v) { c.T = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.T); }},
        {{"time.tau", "backward Euler step"}, [](RunConfig& c, const std::string& v) { c.tau = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.tau); }},
        {{"time.tau_max", "forward Euler step cap"},
         [](RunConfig& c, const std::string& v) { c.tau_max = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.tau_max); }},
        {{"time.safety", "forward Euler safety factor in (0, 1]"},
         [](RunConfig& c, const std::string& v) { c.safety = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.safety); }},
        {{"time.residual_floor", "forward Euler residual floor"},
         [](RunConfig& c, const std::string& v) { c.residual_floor = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.residual_floor); }},
        {{"time.alpha0", "subgradient initial step"},
         [](RunConfig& c, const std::string& v) { c.alpha0 = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.alpha0); }},
        {{"time.alpha_decay", "subgradient step decay exponent in (1/2, 1]"},
         [](RunConfig& c, const std::string& v) { c.alpha_decay = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.alpha_decay); }},
        {{"time.max_steps", "subgradient step cap"},
         [](RunConfig& c, const std::string& v) { c.max_steps = parse_size(v); },
         [](const RunConfig& c) { return fmt_size(c.max_steps); }},
        {{"solver.tol", "resolvent residual target, or default"},
         [](RunConfig& c, const std::string& v) { c.solve_tol = v == "default" ? 0.0 : parse_double(v); },
         [](const RunConfig& c) { return c.solve_tol == 0.0 ? std::string("default") : format_double(c.solve_tol); }},
        {{"solver.max_iters", "resolvent iteration cap"},
         [](RunConfig& c, const std::string& v) { c.max_iters = parse_size(v); },
         [](const RunConfig& c) { return fmt_size(c.max_iters); }},
        {{"data.preset", "stationary | ramp | step | sine | two-node"},
         [](RunConfig& c, const std::string& v) {
             c.data_preset = parse_choice(v, {"stationary", "ramp", "step", "sine", "two-node"});
         },
         [](const RunConfig& c) { return c.data_preset; }},
        {{"data.value", "level of the stationary preset"},
         [](RunConfig& c, const std::string& v) { c.data_value = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.data_value); }},
        {{"data.w0", "initial gap of the two-node preset"},
         [](RunConfig& c, const std::string& v) { c.data_w0 = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.data_w0); }},
        {{"source.preset", "zero | constant"},
         [](RunConfig& c, const std::string& v) { c.source_preset = parse_choice(v, {"zero", "constant"}); },
         [](const RunConfig& c) { return c.source_preset; }},
        {{"source.value", "level of the constant source"},
         [](RunConfig& c, const std::string& v) { c.source_value = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.source_value); }},
        {{"output.checkpoint_every", "keep every k-th state (1 keeps all)"},
         [](RunConfig& c, const std::string& v) { c.checkpoint_every = parse_size(v); },
         [](const RunConfig& c) { return fmt_size(c.checkpoint_every); }},
        {{"seed", "base seed (overridden by --seed)"},
         [](RunConfig& c, const std::string& v) { c.seed = parse_u64(v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {{"threads", "worker threads (overridden by --threads)"},
         [](RunConfig& c, const std::string& v) { c.threads = parse_size(v); },
         [](const RunConfig& c) { return fmt_size(c.threads); }},
        {{"graph.rho", "sparsity rho_n; 0 selects n^(-graph.rho_exponent)"},
         [](RunConfig& c, const std::string& v) { c.rho = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.rho); }},
        {{"graph.rho_exponent", "rho_n = n^(-exponent) when graph.rho = 0"},
         [](RunConfig& c, const std::string& v) { c.rho_exponent = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.rho_exponent); }},
        {{"graph.seed_count", "graphs per n in the graph study (seeds seed, seed+1, ...)"},
         [](RunConfig& c, const std::string& v) { c.seed_count = parse_size(v); },
         [](const RunConfig& c) { return fmt_size(c.seed_count); }},
        {{"graph.truncated_reference", "compare graphs against min(K, 1/rho) instead of K"},
         [](RunConfig& c, const std::string& v) { c.truncated_reference = parse_bool(v); },
         [](const RunConfig& c) { return fmt_bool(c.truncated_reference); }},
        {{"study.n_list", "mesh sizes of the space and graph studies"},
         [](RunConfig& c, const std::string& v) { c.n_list = parse_list<std::size_t>(v, parse_size); },
         [](const RunConfig& c) { return join(c.n_list, fmt_size); }},
        {{"study.n_ref", "reference mesh of the space study"},
         [](RunConfig& c, const std::string& v) { c.n_ref = parse_size(v); },
         [](const RunConfig& c) { return fmt_size(c.n_ref); }},
        {{"study.tau_list", "steps of the time study (alpha0 values for subgradient_p1)"},
         [](RunConfig& c, const std::string& v) { c.tau_list = parse_list<double>(v, parse_double); },
         [](const RunConfig& c) { return join(c.tau_list, format_double); }},
        {{"study.ref_divisor", "reference step = min(tau_list) / divisor"},
         [](RunConfig& c, const std::string& v) { c.ref_divisor = parse_double(v); },
         [](const RunConfig& c) { return format_double(c.ref_divisor); }},
        {{"study.extension", "constant | linear time extension in the error norm"},
         [](RunConfig& c, const std::string& v) { c.extension = parse_choice(v, {"constant", "linear"}); },
         [](const RunConfig& c) { return c.extension; }},
        {{"study.check_time_error", "space study: rerun the finest mesh at tau/2"},
         [](RunConfig& c, const std::string& v) { c.check_time_error = parse_bool(v); },
         [](const RunConfig& c) { return fmt_bool(c.check_time_error); }},
        {{"acceptance.slope_min", "lower end of the slope window, or none"},
         [](RunConfig& c, const std::string& v) {
             c.slope_min = v == "none" ? std::nullopt : std::optional<double>(parse_double(v));
         },
         [](const RunConfig& c) { return c.slope_min ? format_double(*c.slope_min) : std::string("none"); }},
        {{"acceptance.slope_max", "upper end of the slope window, or none"},
         [](RunConfig& c, const std::string& v) {
             c.slope_max = v == "none" ? std::nullopt : std::optional<double>(parse_double(v));
         },
         [](const RunConfig& c) { return c.slope_max ? format_double(*c.slope_max) : std::string("none"); }},
        {{"verify.samples", "random samples of the Psi inequality suite"},
         [](RunConfig& c, const std::string& v) { c.verify_samples = parse_size(v); },
         [](const RunConfig& c) { return fmt_size(c.verify_samples); }},
    };
    return table;
}

const Field* find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.doc.key == key) return &f;
    return nullptr;
}

[[noreturn]] void fail(const std::string& key, const std::string& msg) {
    throw ConfigError(fmt::format("{}: {}", key, msg), key);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

Scheme scheme_of(const RunConfig& cfg) {
    if (cfg.scheme == "forward_euler") return Scheme::ForwardEuler;
    if (cfg.scheme == "subgradient_p1") return Scheme::SubgradientP1;
    return Scheme::BackwardEuler;
}

json rate_json(const RateStudyResult& r) {
    json j;
    j["parameter"] = r.parameter_name;
    j["parameters"] = r.parameters;
    j["sizes"] = r.sizes;
    j["mean_errors"] = r.errors;
    j["max_errors"] = r.max_errors;
    j["fitted"] = r.fitted;
    if (r.fitted) {
        j["slope"] = r.slope;
        j["intercept"] = r.intercept;
        j["max_residual"] = r.max_residual;
    }
    if (r.time_error_check) j["time_error_check"] = *r.time_error_check;
    return j;
}

std::string rate_csv(const RateStudyResult& r) {
    std::string out = fmt::format("{},n,mean_error,max_error\n", r.parameter_name);
    for (std::size_t i = 0; i < r.parameters.size(); ++i)
        out += fmt::format("{},{},{},{}\n", format_double(r.parameters[i]), r.sizes[i], format_double(r.errors[i]),
                           format_double(r.max_errors[i]));
    return out;
}

// Property suites of verify-properties. Each returns (passed, detail).
struct Check {
    std::string name;
    bool passed;
    std::string detail;
};

Check check_psi(const RunConfig& cfg) {
    const Philox4x32 rng(mix64(cfg.seed ^ 0x5053494ULL));
    std::size_t bad = 0;
    for (std::size_t s = 0; s < cfg.verify_samples; ++s) {
        const double p = 1.1 + 4.9 * rng.uniform(s, 0);
        const double x = -10.0 + 20.0 * rng.uniform(s, 1);
        const double y = -10.0 + 20.0 * rng.uniform(s, 2);
        const auto m = check_monotonicity(p, std::max(p, 2.0), x, y);
        const auto c = check_continuity(p, std::min(1.0, p - 1.0), x, y);
        const double mv = m.rhs - m.lhs - 1e-9 * std::max(std::abs(m.lhs), std::abs(m.rhs));
        const double cv = c.lhs - c.rhs - 1e-9 * std::max(std::abs(c.lhs), std::abs(c.rhs));
        if (mv > 0 || cv > 0) ++bad;
    }
    return {"psi_inequalities", bad == 0, fmt::format("samples={} violations={}", cfg.verify_samples, bad)};
}

Check check_projector(const RunConfig& cfg) {
    // Random piecewise-linear functions on the pieces (j/8, (j+1)/8], aligned with
    // the dyadic meshes so every cell average is exact; norms split at roots.
    const Philox4x32 rng(mix64(cfg.seed ^ 0x50524FULL));
    const std::size_t trials = std::max<std::size_t>(cfg.verify_samples / 20, 10);
    std::size_t bad = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<double> lo(8), hi(8);
        for (int k = 0; k < 8; ++k) {
            lo[k] = -5.0 + 10.0 * rng.uniform(t, 2 * k);
            hi[k] = -5.0 + 10.0 * rng.uniform(t, 2 * k + 1);
        }
        auto u = [&](double x) {
            const int k = std::clamp(static_cast<int>(std::ceil(x * 8.0)) - 1, 0, 7);
            const double s = x * 8.0 - k;
            return lo[k] + (hi[k] - lo[k]) * s;
        };
        const double qs[] = {1.0, 2.0, kInfinity};
        for (double q : qs) {
            double exact = 0.0;
            for (int k = 0; k < 8; ++k) {
                if (q == kInfinity) {
                    exact = std::max({exact, std::abs(lo[k]), std::abs(hi[k])});
                    continue;
                }
                // int over piece of |linear|^q, split at the root.
                std::vector<double> br{0.0, 1.0};
                if (lo[k] * hi[k] < 0) br.insert(br.begin() + 1, lo[k] / (lo[k] - hi[k]));
                for (std::size_t b = 0; b + 1 < br.size(); ++b) {
                    exact += integrate(
                        [&](double s) { return std::pow(std::abs(lo[k] + (hi[k] - lo[k]) * s), q) * 0.125; },
                        br[b], br[b + 1], 1, 4);
                }
            }
            if (q != kInfinity) exact = std::pow(exact, 1.0 / q);
            for (std::size_t n : {8u, 64u}) {
                const double pn = norm_lq(project_function(u, uniform_mesh(n)), q);
                if (pn > exact + 1e-9) ++bad;
            }
        }
    }
    return {"projector_contraction", bad == 0, fmt::format("functions={} violations={}", trials, bad)};
}

Check check_resolvent(const RunConfig& cfg) {
    const Philox4x32 rng(mix64(cfg.seed ^ 0x5245534FULL));
    const auto mesh = uniform_mesh(32);
    const DiscreteKernel k = project_kernel(KernelSpec::separable_linear(), mesh);
    std::size_t bad = 0, pairs = 0;
    std::uint64_t ctr = 0;
    for (double p : {1.5, 2.0, 3.0}) {
        for (double lambda : {0.01, 0.1, 1.0}) {
            std::vector<double> b1(32), b2(32);
            for (std::size_t i = 0; i < 32; ++i) {
                b1[i] = -1.0 + 2.0 * rng.uniform(ctr, i);
                b2[i] = -1.0 + 2.0 * rng.uniform(ctr + 1, i);
            }
            ctr += 2;
            const GridFunction g1(mesh, b1), g2(mesh, b2);
            const auto r1 = resolvent(k, p, lambda, g1);
            const auto r2 = resolvent(k, p, lambda, g2);
            const double slack = 10.0 * std::max(r1.tol, r2.tol);
            std::vector<double> du(32), db(32);
            for (std::size_t i = 0; i < 32; ++i) {
                du[i] = r1.u[i] - r2.u[i];
                db[i] = b1[i] - b2[i];
            }
            for (double q : {1.0, 2.0, kInfinity}) {
                if (norm_lq(GridFunction(mesh, du), q) > norm_lq(GridFunction(mesh, db), q) + slack) ++bad;
            }
            ++pairs;
        }
    }
    return {"resolvent_nonexpansive", bad == 0, fmt::format("pairs={} violations={}", pairs, bad)};
}

Check check_mass(const RunConfig&) {
    const auto mesh = uniform_mesh(32);
    auto k = std::make_shared<const DiscreteKernel>(project_kernel(KernelSpec::separable_linear(), mesh));
    const GridFunction g = project_function([](double x) { return x > 0.5 ? 1.0 : 0.0; }, mesh);
    auto mass = [](const GridFunction& u) {
        std::vector<double> t(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) t[i] = u.mesh().h(i) * u[i];
        return ordered_sum(t);
    };
    double worst_explicit = 0.0, worst_backward = 0.0, backward_tol = 0.0;
    auto drift = [&](const Trajectory& tr, double& worst) {
        for (std::size_t s = 1; s <= tr.steps(); ++s) {
            const double d = std::abs(mass(tr.state(s)) - mass(tr.state(s - 1)));
            worst = std::max(worst, d / std::max(1.0, std::abs(mass(tr.state(s - 1)))));
        }
    };
    drift(forward_euler(Problem::kernelized(k, 1.5, g, SourceTerm::zero(), 0.2)), worst_explicit);
    drift(subgradient_p1(Problem::kernelized(k, 1.0, g, SourceTerm::zero(), 0.2), {0.1, 0.6, 100000, 1}),
          worst_explicit);
    const Trajectory be = backward_euler(Problem::kernelized(k, 3.0, g, SourceTerm::zero(), 0.2), uniform_partition(0.2, 20));
    drift(be, worst_backward);
    backward_tol = default_resolvent_tol(g);
    const bool ok = worst_explicit <= 1e-12 && worst_backward <= 10.0 * backward_tol;
    return {"mass_conservation", ok,
            fmt::format("explicit_drift={} backward_drift={}", format_double(worst_explicit),
                        format_double(worst_backward))};
}

Check check_graph(const RunConfig& cfg) {
    const std::size_t n = 512;
    const double rho = std::pow(static_cast<double>(n), -0.25);
    const auto mesh = uniform_mesh(n);
    const DiscreteKernel k = project_kernel(KernelSpec::power_law(0.5), mesh);
    const TruncatedWeights w = truncate(k, rho);
    const GraphSample gs = sample(w, rho, cfg.seed);
    double expected = 0.0, variance = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double q = rho * w(i, j);
            expected += q;
            variance += q * (1.0 - q);
        }
    const double z = (static_cast<double>(gs.edge_count()) - expected) / std::sqrt(variance);
    return {"graph_calibration", std::abs(z) <= 5.0,
            fmt::format("edges={} expected={} z={}", gs.edge_count(), format_double(expected), format_double(z))};
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& f : fields()) out.push_back(f.doc);
        return out;
    }();
    return keys;
}

RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(fmt::format("line {}: expected 'key = value'", line), {}, line);
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        const Field* f = find_field(key);
        if (!f) throw ConfigError(fmt::format("line {}: unknown key '{}'", line, key), key, line);
        if (!seen.insert(key).second)
            throw ConfigError(fmt::format("line {}: duplicate key '{}'", line, key), key, line);
        try {
            f->set(cfg, value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(fmt::format("line {}: {} = '{}': {}", line, key, value, e.what()), key, line);
        }
    }
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse_config(in);
}

void validate(const RunConfig& c) {
    const Scheme s = scheme_of(c);
    if (s == Scheme::ForwardEuler && !(c.p > 1.0 && c.p <= 2.0))
        fail("p", fmt::format("forward_euler requires p in (1, 2], got {}", format_double(c.p)));
    if (s == Scheme::SubgradientP1 && c.p != 1.0)
        fail("p", fmt::format("subgradient_p1 requires p = 1, got {}", format_double(c.p)));
    if (s == Scheme::BackwardEuler && !(c.p > 1.0))
        fail("p", fmt::format("backward_euler requires p > 1, got {}", format_double(c.p)));
    if (c.kernel_variant == "power_law" && !(c.kernel_beta > 0.0 && c.kernel_beta < 1.0))
        fail("kernel.beta", "must lie in (0, 1)");
    if (c.kernel_variant == "constant" && !(c.kernel_c >= 0.0)) fail("kernel.c", "must be nonnegative");
    if (c.kernel_variant == "separable_linear" && !(c.kernel_slope > -1.0))
        fail("kernel.slope", "must exceed -1 so that a(x) = 1 + slope x stays positive");
    if (c.n == 0) fail("mesh.n", "must be positive");
    if (c.n > kDefaultDenseLimit) fail("mesh.n", fmt::format("exceeds the dense limit {}", kDefaultDenseLimit));
    if (!(c.T > 0.0)) fail("time.T", "must be positive");
    if (!(c.tau > 0.0)) fail("time.tau", "must be positive");
    if (!(c.tau_max > 0.0)) fail("time.tau_max", "must be positive");
    if (!(c.safety > 0.0 && c.safety <= 1.0)) fail("time.safety", "must lie in (0, 1]");
    if (!(c.residual_floor > 0.0)) fail("time.residual_floor", "must be positive");
    if (!(c.alpha0 > 0.0)) fail("time.alpha0", "must be positive");
    if (!(c.alpha_decay > 0.5 && c.alpha_decay <= 1.0)) fail("time.alpha_decay", "must lie in (1/2, 1]");
    if (c.max_steps == 0) fail("time.max_steps", "must be positive");
    if (c.solve_tol < 0.0) fail("solver.tol", "must be positive or default");
    if (c.max_iters == 0) fail("solver.max_iters", "must be positive");
    if (c.data_preset == "two-node" && c.n != 2) fail("data.preset", "two-node requires mesh.n = 2");
    if (c.checkpoint_every == 0) fail("output.checkpoint_every", "must be positive");
    if (c.threads == 0) fail("threads", "must be positive");
    if (c.rho < 0.0 || c.rho > 1.0) fail("graph.rho", "must lie in [0, 1]");
    if (!(c.rho_exponent >= 0.0 && c.rho_exponent < 1.0)) fail("graph.rho_exponent", "must lie in [0, 1)");
    if (c.seed_count == 0) fail("graph.seed_count", "must be positive");
    for (std::size_t n : c.n_list)
        if (n == 0 || n > kDefaultDenseLimit) fail("study.n_list", "sizes must lie in [1, dense limit]");
    if (c.n_ref == 0 || c.n_ref > kDefaultDenseLimit) fail("study.n_ref", "must lie in [1, dense limit]");
    for (double t : c.tau_list)
        if (!(t > 0.0)) fail("study.tau_list", "entries must be positive");
    if (!(c.ref_divisor > 1.0)) fail("study.ref_divisor", "must exceed 1");
    if (c.slope_min && c.slope_max && *c.slope_min > *c.slope_max)
        fail("acceptance.slope_min", "exceeds acceptance.slope_max");
    if (c.verify_samples == 0) fail("verify.samples", "must be positive");
}

std::string echo(const RunConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) out += f.doc.key + " = " + f.get(cfg) + "\n";
    return out;
}

KernelSpec make_kernel(const RunConfig& cfg) {
    if (cfg.kernel_variant == "power_law") return KernelSpec::power_law(cfg.kernel_beta);
    if (cfg.kernel_variant == "constant") return KernelSpec::constant(cfg.kernel_c);
    return KernelSpec::separable_linear(cfg.kernel_slope);
}

std::function<double(double)> make_initial(const RunConfig& cfg) {
    const double v = cfg.data_value, w0 = cfg.data_w0;
    if (cfg.data_preset == "stationary") return [v](double) { return v; };
    if (cfg.data_preset == "ramp") return [](double x) { return x; };
    if (cfg.data_preset == "step") return [](double x) { return x > 0.5 ? 1.0 : 0.0; };
    if (cfg.data_preset == "sine") return [](double x) { return std::sin(2.0 * std::numbers::pi * x); };
    // two-node: u_1 = 0, u_2 = w0 on the two-cell mesh.
    return [w0](double x) { return x > 0.5 ? w0 : 0.0; };
}

std::function<SourceTerm(const MeshPtr&)> make_source(const RunConfig& cfg) {
    if (cfg.source_preset == "zero") return {};
    const double v = cfg.source_value;
    return [v](const MeshPtr& m) { return SourceTerm::time_constant(GridFunction(m, v)); };
}

SchemeSettings make_settings(const RunConfig& cfg) {
    SchemeSettings s;
    s.scheme = scheme_of(cfg);
    s.tau = s.scheme == Scheme::ForwardEuler ? cfg.tau_max : cfg.tau;
    s.safety = cfg.safety;
    s.residual_floor = cfg.residual_floor;
    s.alpha0 = cfg.alpha0;
    s.decay = cfg.alpha_decay;
    s.max_steps = cfg.max_steps;
    s.solve_tol = cfg.solve_tol > 0.0 ? cfg.solve_tol : -1.0;
    s.max_iters = cfg.max_iters;
    return s;
}

double rho_for(const RunConfig& cfg, std::size_t n) {
    return cfg.rho > 0.0 ? cfg.rho : std::pow(static_cast<double>(n), -cfg.rho_exponent);
}

namespace {

StudyProblem study_problem(const RunConfig& cfg) {
    return {make_kernel(cfg), make_initial(cfg), make_source(cfg), cfg.p, cfg.T,
            cfg.extension == "linear" ? ErrorExtension::Linear : ErrorExtension::Constant};
}

Trajectory run_checkpointed(const Problem& prob, const RunConfig& cfg) {
    const SchemeSettings s = make_settings(cfg);
    switch (s.scheme) {
    case Scheme::ForwardEuler:
        return forward_euler(prob, {s.tau, s.safety, s.residual_floor, cfg.checkpoint_every});
    case Scheme::SubgradientP1:
        return subgradient_p1(prob, {s.alpha0, s.decay, s.max_steps, cfg.checkpoint_every});
    case Scheme::BackwardEuler:
        break;
    }
    const auto N = static_cast<std::size_t>(std::max(1.0, std::round(cfg.T / cfg.tau)));
    return backward_euler(prob, uniform_partition(cfg.T, N), {s.solve_tol, s.max_iters, cfg.checkpoint_every});
}

}  // namespace

int cmd_solve(const RunConfig& cfg, const fs::path& out) {
    const StudyProblem sp = study_problem(cfg);
    const Problem prob = discretize(sp, cfg.n);
    const Trajectory traj = run_checkpointed(prob, cfg);

    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    write_text(out / "trajectory.csv", csv.str());
    write_text(out / "trajectory.json", trajectory_json(traj) + "\n");

    const GridFunction& u0 = traj.state(0);
    const GridFunction& uT = traj.final_state();
    auto mass = [](const GridFunction& u) {
        std::vector<double> t(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) t[i] = u.mesh().h(i) * u[i];
        return ordered_sum(t);
    };
    json s;
    s["scheme"] = cfg.scheme;
    s["p"] = cfg.p;
    s["n"] = cfg.n;
    s["T"] = traj.final_time();
    s["steps"] = traj.steps();
    s["initial_mass"] = mass(u0);
    s["final_mass"] = mass(uT);
    s["final_l2"] = norm_lq(uT, 2.0);
    if (cfg.data_preset == "two-node") {
        const double gap = uT[1] - uT[0];
        s["final_gap"] = gap;
        if (cfg.kernel_variant == "constant") {
            const double exact = two_node_closed_form(cfg.p, cfg.kernel_c, u0[1] - u0[0], traj.final_time());
            s["closed_form_gap"] = exact;
            s["gap_error"] = std::abs(gap - exact);
        }
    }
    write_text(out / "summary.json", s.dump(2) + "\n");
    return kExitOk;
}

int cmd_study(const RunConfig& cfg, const std::string& kind, const fs::path& out) {
    const StudyProblem sp = study_problem(cfg);
    const SchemeSettings s = make_settings(cfg);
    RateStudyResult r;
    if (kind == "space") {
        for (std::size_t n : cfg.n_list)
            if (cfg.n_ref % n != 0) fail("study.n_list", fmt::format("{} does not divide study.n_ref", n));
        r = study_space(sp, cfg.n_list, cfg.n_ref, s, cfg.check_time_error);
    } else if (kind == "time") {
        r = study_time(sp, cfg.n, cfg.tau_list, s, cfg.ref_divisor);
    } else {
        if (s.scheme != Scheme::BackwardEuler) fail("scheme.name", "the graph study requires backward_euler");
        GraphStudySettings gs;
        gs.rho = [cfg](std::size_t n) { return rho_for(cfg, n); };
        for (std::size_t i = 0; i < cfg.seed_count; ++i) gs.seeds.push_back(cfg.seed + i);
        gs.truncated_reference = cfg.truncated_reference;
        r = study_graph(sp, cfg.n_list, s, gs);
    }

    bool window_ok = true;
    if (cfg.slope_min || cfg.slope_max) {
        window_ok = r.fitted && (!cfg.slope_min || r.slope >= *cfg.slope_min) &&
                    (!cfg.slope_max || r.slope <= *cfg.slope_max);
    }
    json j;
    j["study"] = kind;
    j["scheme"] = cfg.scheme;
    j["p"] = cfg.p;
    j["rate"] = rate_json(r);
    if (cfg.slope_min || cfg.slope_max) {
        j["acceptance"]["slope_min"] = cfg.slope_min ? json(*cfg.slope_min) : json(nullptr);
        j["acceptance"]["slope_max"] = cfg.slope_max ? json(*cfg.slope_max) : json(nullptr);
        j["acceptance"]["passed"] = window_ok;
    }
    write_text(out / "study.csv", rate_csv(r));
    write_text(out / "study.json", j.dump(2) + "\n");
    // Plot-ready: log10 parameter, log10 error.
    std::string dat = "# log10_parameter log10_mean_error\n";
    for (std::size_t i = 0; i < r.parameters.size(); ++i)
        if (r.errors[i] > 0.0)
            dat += fmt::format("{} {}\n", format_double(std::log10(r.parameters[i])),
                               format_double(std::log10(r.errors[i])));
    write_text(out / "study.dat", dat);
    return window_ok ? kExitOk : kExitCheckFailed;
}

int cmd_sample_graph(const RunConfig& cfg, const fs::path& out) {
    const auto mesh = uniform_mesh(cfg.n);
    const double rho = rho_for(cfg, cfg.n);
    const DiscreteKernel k = project_kernel(make_kernel(cfg), mesh);
    const GraphSample g = sample(truncate(k, rho), rho, cfg.seed);
    std::ostringstream edges;
    write_edge_list(edges, g);
    write_text(out / "graph.edges", edges.str());
    write_text(out / "graph_stats.json", stats_json(g) + "\n");
    return kExitOk;
}

int cmd_verify_properties(const RunConfig& cfg, const fs::path& out) {
    const std::vector<Check> checks = {check_psi(cfg), check_projector(cfg), check_resolvent(cfg), check_mass(cfg),
                                       check_graph(cfg)};
    std::string report;
    json j = json::array();
    bool all = true;
    for (const auto& c : checks) {
        report += fmt::format("{} {} {}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
        j.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        all = all && c.passed;
    }
    write_text(out / "properties.txt", report);
    write_text(out / "properties.json", j.dump(2) + "\n");
    return all ? kExitOk : kExitCheckFailed;
}

int run(int argc, char** argv) {
    CLI::App app{"Nonlocal p-Laplacian evolution: solver, rate studies and graph sampling"};
    app.require_subcommand(1);
    std::string config_path, out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    const char* names[] = {"solve", "study-space", "study-time", "study-graph", "sample-graph", "verify-properties"};
    const char* help[] = {"integrate one problem and write the trajectory",
                          "mesh refinement study",
                          "time step refinement study",
                          "sampled graph study",
                          "sample one graph and write its edge list",
                          "run the property suites"};
    std::vector<CLI::App*> subs;
    for (int i = 0; i < 6; ++i) {
        auto* sub = app.add_subcommand(names[i], help[i]);
        sub->add_option("--config", config_path, "config file (dotted key = value lines)");
        sub->add_option("--seed", seed, "base seed");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory");
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    std::string command;
    for (int i = 0; i < 6; ++i)
        if (subs[i]->parsed()) command = names[i];

    const auto start = std::chrono::steady_clock::now();
    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        validate(cfg);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kExitConfig;
    }
    set_thread_count(cfg.threads);

    const fs::path out(out_dir);
    int code = kExitOk;
    try {
        fs::create_directories(out);
        write_text(out / "config.echo", echo(cfg));
        if (command == "solve") code = cmd_solve(cfg, out);
        else if (command == "study-space") code = cmd_study(cfg, "space", out);
        else if (command == "study-time") code = cmd_study(cfg, "time", out);
        else if (command == "study-graph") code = cmd_study(cfg, "graph", out);
        else if (command == "sample-graph") code = cmd_sample_graph(cfg, out);
        else code = cmd_verify_properties(cfg, out);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        code = kExitConfig;
    } catch (const NoConvergence& e) {
        fmt::print(stderr, "no convergence: {}\n", e.what());
        code = kExitNoConvergence;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        code = kExitRuntime;
    }

    // Timestamps and wall time go to the log only.
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    try {
        std::ofstream log(out / "run.log", std::ios::app);
        log << fmt::format("{} command={} threads={} seed={} exit={} wall_seconds={:.3f}\n", stamp, command,
                           cfg.threads, cfg.seed, code, secs);
    } catch (...) {
    }
    return code;
}

}  // namespace nlplap::cli
