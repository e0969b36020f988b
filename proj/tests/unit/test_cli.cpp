#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nlplap/cli.hpp"
#include "nlplap/errors.hpp"
#include "nlplap/parallel.hpp"

using namespace nlplap;
using namespace nlplap::cli;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("nlplap_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto c = parse("# comment\nkernel.variant = power_law  # trailing\nkernel.beta=0.75\n\np = 1.5\nstudy.n_list = 8, 16,32\n");
    CHECK(c.kernel_variant == "power_law");
    CHECK(c.kernel_beta == 0.75);
    CHECK(c.p == 1.5);
    CHECK(c.n_list == std::vector<std::size_t>{8, 16, 32});
    CHECK(c.scheme == "backward_euler");
}

TEST_CASE("config errors name the key and line") {
    auto expect = [](const std::string& text, const std::string& key, int line) {
        try {
            parse(text);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.key() == key);
            CHECK(e.line() == line);
        }
    };
    expect("p = 2\nmesh.size = 4\n", "mesh.size", 2);
    expect("p = 2\np = 3\n", "p", 2);
    expect("\n\ntime.T = soon\n", "time.T", 3);
    expect("kernel.variant = gaussian\n", "kernel.variant", 1);
    expect("mesh.n = -4\n", "mesh.n", 1);
    expect("just words\n", "", 1);
}

TEST_CASE("validation of scheme and p pairs") {
    RunConfig c;
    c.scheme = "forward_euler";
    c.p = 3.0;
    try {
        validate(c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "p");
        CHECK(std::string(e.what()).find("(1, 2]") != std::string::npos);
    }
    c.p = 2.0;
    CHECK_NOTHROW(validate(c));
    c.scheme = "subgradient_p1";
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.p = 1.0;
    CHECK_NOTHROW(validate(c));
    c.scheme = "backward_euler";
    CHECK_THROWS_AS(validate(c), ConfigError);
    RunConfig d;
    d.tau = -1.0;
    CHECK_THROWS_AS(validate(d), ConfigError);
    RunConfig e;
    e.residual_floor = 0.0;
    CHECK_THROWS_AS(validate(e), ConfigError);
    RunConfig f;
    f.data_preset = "two-node";
    CHECK_THROWS_AS(validate(f), ConfigError);
}

TEST_CASE("echo round-trips the effective config") {
    auto c = parse("kernel.variant = constant\nkernel.c = 0.3\np = 1.25\nscheme.name = forward_euler\nseed = 99\n"
                   "acceptance.slope_min = 0.5\nstudy.tau_list = 0.1,0.05,0.025\nsolver.tol = 1e-9\n");
    const std::string e1 = echo(c);
    const auto back = parse(e1);
    CHECK(echo(back) == e1);
    CHECK(back.slope_min.value() == 0.5);
    CHECK_FALSE(back.slope_max.has_value());
    CHECK(back.solve_tol == 1e-9);
    CHECK(echo(parse("")) == echo(RunConfig{}));
    CHECK(config_keys().size() > 30);
}

TEST_CASE("solve: stationary preset gives identical rows") {
    const auto dir = fresh_dir("stationary");
    auto c = parse("scheme.name = forward_euler\np = 1.5\nmesh.n = 8\ntime.T = 0.5\ntime.tau_max = 0.1\ndata.preset = stationary\ndata.value = 3\n");
    validate(c);
    CHECK(cmd_solve(c, dir) == kExitOk);
    std::ifstream in(dir / "trajectory.csv");
    std::string header, row;
    std::getline(in, header);
    std::vector<std::string> rows;
    while (std::getline(in, row)) rows.push_back(row.substr(row.find(',')));
    CHECK(rows.size() == 6);
    for (const auto& r : rows) CHECK(r == rows.front());
}

TEST_CASE("solve: two-node preset matches the closed form") {
    const auto dir = fresh_dir("two_node");
    auto c = parse("kernel.variant = constant\nscheme.name = forward_euler\np = 1.5\nmesh.n = 2\ntime.T = 1\n"
                   "time.tau_max = 1e-5\ndata.preset = two-node\noutput.checkpoint_every = 10000\n");
    validate(c);
    CHECK(cmd_solve(c, dir) == kExitOk);
    const std::string s = slurp(dir / "summary.json");
    const auto pos = s.find("\"gap_error\": ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(s.substr(pos + 13)) <= 1e-4);
}

TEST_CASE("solve: outputs are byte-identical across runs and thread counts") {
    const auto d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
    auto c = parse("kernel.variant = power_law\np = 1.5\nmesh.n = 48\ntime.T = 0.2\ntime.tau = 0.05\ndata.preset = step\n");
    validate(c);
    CHECK(cmd_solve(c, d1) == kExitOk);
    c.threads = 3;
    set_thread_count(3);
    CHECK(cmd_solve(c, d2) == kExitOk);
    set_thread_count(1);
    for (const char* f : {"trajectory.csv", "trajectory.json", "summary.json"}) CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("study: slope window drives the exit code") {
    const auto dir = fresh_dir("study");
    auto c = parse("kernel.variant = separable_linear\np = 2\nmesh.n = 16\ntime.T = 0.5\ndata.preset = ramp\n"
                   "study.tau_list = 0.05,0.025,0.0125\nacceptance.slope_min = 0.85\nacceptance.slope_max = 1.15\n");
    validate(c);
    CHECK(cmd_study(c, "time", dir) == kExitOk);
    c.slope_min = 1.5;
    c.slope_max = 2.0;
    CHECK(cmd_study(c, "time", dir) == kExitCheckFailed);
    CHECK(slurp(dir / "study.csv").rfind("tau,n,mean_error,max_error\n", 0) == 0);
    CHECK(slurp(dir / "study.json").find("\"passed\": false") != std::string::npos);
}

TEST_CASE("sample-graph and verify-properties") {
    const auto dir = fresh_dir("graph");
    auto c = parse("kernel.variant = power_law\nmesh.n = 64\nseed = 5\n");
    validate(c);
    CHECK(cmd_sample_graph(c, dir) == kExitOk);
    std::istringstream edges(slurp(dir / "graph.edges"));
    const auto g = read_edge_list(edges);
    CHECK(g.size() == 64);
    CHECK(g.seed() == 5);
    auto v = parse("verify.samples = 200\n");
    CHECK(cmd_verify_properties(v, dir) == kExitOk);
    CHECK(slurp(dir / "properties.txt").find("FAIL") == std::string::npos);
}

TEST_CASE("run maps errors to exit codes") {
    const auto dir = fresh_dir("run");
    {
        std::ofstream cfg(dir / "bad.cfg");
        cfg << "scheme.name = forward_euler\np = 3\n";
    }
    const std::string cfg_path = (dir / "bad.cfg").string(), out = (dir / "out").string();
    const char* argv1[] = {"nlplap", "solve", "--config", cfg_path.c_str(), "--out", out.c_str()};
    CHECK(run(6, const_cast<char**>(argv1)) == kExitConfig);
    {
        std::ofstream cfg(dir / "hard.cfg");
        cfg << "p = 1.5\nmesh.n = 16\ndata.preset = step\nsolver.max_iters = 1\nsolver.tol = 1e-300\n";
    }
    const std::string hard = (dir / "hard.cfg").string();
    const char* argv2[] = {"nlplap", "solve", "--config", hard.c_str(), "--out", out.c_str()};
    CHECK(run(6, const_cast<char**>(argv2)) == kExitNoConvergence);
    const char* argv3[] = {"nlplap", "solve", "--config", "/nonexistent.cfg", "--out", out.c_str()};
    CHECK(run(6, const_cast<char**>(argv3)) == kExitConfig);
    CHECK(fs::exists(dir / "out" / "run.log"));
}
