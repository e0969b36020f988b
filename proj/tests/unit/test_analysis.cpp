#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "nlplap/analysis.hpp"
#include "nlplap/errors.hpp"

using namespace nlplap;

namespace {

std::shared_ptr<const DiscreteKernel> kernel(const KernelSpec& k, std::size_t n) {
    return std::make_shared<const DiscreteKernel>(project_kernel(k, uniform_mesh(n)));
}

GridFunction ramp(std::size_t n) { return project_function([](double x) { return x; }, uniform_mesh(n)); }

}  // namespace

TEST_CASE("linear oracle examples") {
    const auto k = kernel(KernelSpec::separable_linear(), 10);
    const GridFunction c(uniform_mesh(10), 2.5);
    for (double t : {0.0, 0.3, 7.0}) {
        const auto u = linear_oracle_p2(*k, c, SourceTerm::zero(), t);
        for (std::size_t i = 0; i < 10; ++i) CHECK(u[i] == doctest::Approx(2.5).epsilon(1e-12));
    }
    const auto g = ramp(10);
    const auto u0 = linear_oracle_p2(*k, g, SourceTerm::zero(), 0.0);
    for (std::size_t i = 0; i < 10; ++i) CHECK(u0[i] == g[i]);
    const auto m2 = uniform_mesh(2);
    const DiscreteKernel k2(m2, {3.0, 3.0, 3.0, 3.0});
    for (double t : {0.1, 1.0}) {
        const auto u = linear_oracle_p2(k2, GridFunction(m2, std::vector<double>{0.0, 1.0}), SourceTerm::zero(), t);
        CHECK(u[1] - u[0] == doctest::Approx(std::exp(-3.0 * t)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(linear_oracle_p2(*k, g, SourceTerm::separable([](double) { return 1.0; }, [](double t) { return t; }), 1.0),
                    TimeDependentSource);
}

TEST_CASE("linear oracle matches a matrix exponential and is a semigroup") {
    const auto m = std::make_shared<const Mesh>(std::vector<double>{0.0, 0.2, 0.3, 0.7, 1.0});
    const auto k = project_kernel(KernelSpec::power_law(0.5), m);
    const GridFunction g(m, std::vector<double>{1.0, -2.0, 0.5, 3.0});
    const auto f = SourceTerm::time_constant(GridFunction(m, std::vector<double>{0.3, 0.0, -0.1, 0.2}));
    // Independent oracle: augmented system d/dt [u; 1] = [[-L, f]; [0, 0]] [u; 1], via a Taylor series.
    const std::size_t n = 4;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) {
                A(i, j) += m->h(j) * k(i, j);
                A(i, i) -= m->h(j) * k(i, j);
            }
        A(i, n) = f.at(m, 0.0)[i];
    }
    const double t = 0.7;
    Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n + 1, n + 1), term = E;
    for (int q = 1; q < 60; ++q) {
        term = term * (A * t) / q;
        E += term;
    }
    Eigen::VectorXd x0(n + 1);
    x0 << 1.0, -2.0, 0.5, 3.0, 1.0;
    const Eigen::VectorXd xt = E * x0;
    const auto u = linear_oracle_p2(k, g, f, t);
    for (std::size_t i = 0; i < n; ++i) CHECK(u[i] == doctest::Approx(xt[i]).epsilon(1e-10));
    const auto half = linear_oracle_p2(k, linear_oracle_p2(k, g, f, 0.3), f, 0.4);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(half[i] - u[i]) <= 1e-10);
}

TEST_CASE("two-node closed form") {
    CHECK(two_node_closed_form(1.5, 1.0, 0.0, 3.0) == 0.0);
    for (double t : {0.0, 0.4, 2.0}) CHECK(two_node_closed_form(2.0, 1.3, 0.8, t) == doctest::Approx(0.8 * std::exp(-1.3 * t)));
    CHECK(two_node_closed_form(1.5, 1.0, 1.0, 2.0) == 0.0);
    CHECK(two_node_closed_form(1.5, 1.0, 1.0, 1.999) > 0.0);
    CHECK(two_node_closed_form(1.5, 1.0, 1.0, 5.0) == 0.0);
    CHECK(two_node_closed_form(1.5, 1.0, -1.0, 1.0) == -two_node_closed_form(1.5, 1.0, 1.0, 1.0));
    CHECK(two_node_closed_form(3.0, 1.0, 1.0, 1.0) == doctest::Approx(0.5));
    // ODE residual w' + K Psi(w) by central differences.
    for (double p : {1.3, 1.5, 2.0, 3.0, 5.0})
        for (double t : {0.1, 0.5, 1.2}) {
            const double K = 0.9, w0 = 1.4, e = 1e-6;
            if (p < 2 && t > std::pow(w0, 2 - p) / ((2 - p) * K) - 0.05) continue;
            const double dw = (two_node_closed_form(p, K, w0, t + e) - two_node_closed_form(p, K, w0, t - e)) / (2 * e);
            CHECK(std::abs(dw + K * psi(p, two_node_closed_form(p, K, w0, t))) <= 1e-8);
        }
}

TEST_CASE("traj_error_c0l2 examples") {
    const auto k = kernel(KernelSpec::separable_linear(), 8);
    const auto prob = Problem::kernelized(k, 2.0, ramp(8), SourceTerm::zero(), 1.0);
    const auto a = backward_euler(prob, uniform_partition(1.0, 5));
    CHECK(traj_error_c0l2(a, a, 8) == 0.0);
    Trajectory shifted(a.scheme(), a.mesh_ptr());
    auto plus = [](GridFunction u) {
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.25;
        return u;
    };
    shifted.push_initial(plus(a.state(0)));
    for (std::size_t s = 1; s <= a.steps(); ++s) shifted.push_step(a.times()[s], plus(a.state(s)), a.step_info()[s - 1]);
    CHECK(traj_error_c0l2(a, shifted, 16) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(traj_error_c0l2(a, shifted, 16, 64, ErrorExtension::Linear) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS(traj_error_c0l2(a, a, 12), NonNestedMeshes);
}

TEST_CASE("traj_error_c0l2 is symmetric and satisfies the triangle inequality") {
    auto run = [](std::size_t n, std::size_t N, double p) {
        const auto k = kernel(KernelSpec::separable_linear(), n);
        return backward_euler(Problem::kernelized(k, p, ramp(n), SourceTerm::zero(), 0.5), uniform_partition(0.5, N));
    };
    const auto a = run(8, 4, 2.0), b = run(16, 7, 2.0), c = run(32, 3, 3.0);
    for (auto ext : {ErrorExtension::Constant, ErrorExtension::Linear}) {
        const double ab = traj_error_c0l2(a, b, 32, 64, ext), ba = traj_error_c0l2(b, a, 32, 64, ext);
        const double bc = traj_error_c0l2(b, c, 32, 64, ext), ac = traj_error_c0l2(a, c, 32, 64, ext);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
        CHECK(ac <= ab + bc + 1e-12);
    }
}

TEST_CASE("two-node forward Euler error against the closed form") {
    const auto m = uniform_mesh(2);
    const auto k = std::make_shared<const DiscreteKernel>(m, std::vector<double>{1.0, 1.0, 1.0, 1.0});
    const GridFunction g(m, std::vector<double>{-0.5, 0.5});
    const auto tr = forward_euler(Problem::kernelized(k, 1.5, g, SourceTerm::zero(), 1.0), {1e-5, 0.9, 1e-8, 1});
    const TimeOracle exact = [&](double t) {
        const double w = two_node_closed_form(1.5, 1.0, 1.0, t);
        return GridFunction(m, std::vector<double>{-0.5 * w, 0.5 * w});
    };
    CHECK(traj_error_c0l2(tr, exact, 2, 64, ErrorExtension::Linear) <= 1e-4);
}

TEST_CASE("fit_rate") {
    std::vector<std::pair<double, double>> lin, two3;
    for (double x : {0.5, 0.25, 0.125, 0.0625}) {
        lin.emplace_back(x, 3.0 * x);
        two3.emplace_back(x, 0.7 * std::pow(x, 2.0 / 3.0));
    }
    const auto r1 = fit_rate(lin);
    CHECK(r1.slope == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r1.max_residual <= 1e-12);
    CHECK(std::exp(r1.intercept) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit_rate(two3).slope == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(fit_rate({{1.0, 1.0}, {2.0, 2.0}}), InvalidArgument);
    CHECK_THROWS_AS(fit_rate({{1.0, 1.0}, {1.0, 2.0}, {1.0, 3.0}}), DegenerateFit);
    CHECK_THROWS_AS(fit_rate({{1.0, 1.0}, {2.0, 0.0}, {3.0, 3.0}}), InvalidArgument);
}

TEST_CASE("space study: degenerate stationary case") {
    StudyProblem sp{KernelSpec::constant(1.0), [](double) { return 0.6; }, {}, 2.0, 0.5, ErrorExtension::Constant};
    SchemeSettings s;
    s.tau = 0.1;
    const auto r = study_space(sp, {32, 64}, 128, s);
    for (double e : r.errors) CHECK(e <= 1e-10);
    CHECK_FALSE(r.fitted);
}

TEST_CASE("space study: smooth kernel, first order") {
    StudyProblem sp{KernelSpec::separable_linear(), [](double x) { return x; }, {}, 2.0, 0.25, ErrorExtension::Constant};
    SchemeSettings s;
    s.tau = 0.0125;
    const auto r = study_space(sp, {16, 32, 64}, 256, s, true);
    REQUIRE(r.fitted);
    CHECK(r.slope == doctest::Approx(1.0).epsilon(0.1));
    REQUIRE(r.time_error_check.has_value());
    CHECK(*r.time_error_check);
    CHECK_THROWS_AS(study_space(sp, {24, 32, 64}, 256, s), NonNestedMeshes);
}

TEST_CASE("time study: backward Euler p = 3") {
    StudyProblem sp{KernelSpec::separable_linear(), [](double x) { return std::cos(3 * x); }, {}, 3.0, 0.5, ErrorExtension::Constant};
    SchemeSettings s;
    const auto r = study_time(sp, 16, {0.5 / 16, 0.5 / 32, 0.5 / 64}, s, 16);
    REQUIRE(r.fitted);
    CHECK(r.slope == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("graph study: errors shrink as rho n grows") {
    StudyProblem sp{KernelSpec::power_law(0.5), [](double x) { return x; }, {}, 2.0, 0.2, ErrorExtension::Constant};
    SchemeSettings s;
    s.tau = 0.05;
    GraphStudySettings gs;
    gs.seeds = {1, 2, 3};
    const auto r = study_graph(sp, {64, 128, 256}, s, gs);
    REQUIRE(r.errors.size() == 3);
    CHECK(r.errors[2] < r.errors[0]);
    for (std::size_t i = 0; i < 3; ++i) CHECK(r.max_errors[i] >= r.errors[i]);
    CHECK(r.parameters[0] == doctest::Approx(64 * std::pow(64.0, -0.25)));
}
