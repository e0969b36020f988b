#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nlplap/errors.hpp"
#include "nlplap/mesh.hpp"
#include "nlplap/rng.hpp"

using namespace nlplap;

TEST_CASE("uniform_mesh examples") {
    const auto m1 = uniform_mesh(1);
    CHECK(m1->size() == 1);
    CHECK(m1->max_size() == 1.0);
    const auto m4 = uniform_mesh(4);
    const double expect[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int i = 0; i < 5; ++i) CHECK(m4->boundaries()[i] == expect[i]);
    CHECK(uniform_mesh(3)->max_size() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(m4->is_uniform());
}

TEST_CASE("mesh invariants are enforced") {
    CHECK_THROWS_AS(Mesh({0.0, 0.5, 0.5, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(Mesh({0.1, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(Mesh({0.0, 0.9}), InvalidArgument);
    CHECK_THROWS_AS(uniform_mesh(0), InvalidArgument);
    const Mesh m({0.0, 0.1, 0.4, 1.0});
    CHECK(m.max_size() == doctest::Approx(0.6));
    CHECK_FALSE(m.is_uniform());
}

TEST_CASE("project_function examples") {
    const auto m = uniform_mesh(5);
    const auto c = project_function([](double) { return 4.5; }, m);
    for (std::size_t i = 0; i < 5; ++i) CHECK(c[i] == doctest::Approx(4.5).epsilon(1e-15));
    const auto lin = project_function([](double x) { return x; }, uniform_mesh(2));
    CHECK(lin[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(lin[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(project_function([](double x) { return x * x; }, uniform_mesh(1))[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(project_function([](double) { return std::nan(""); }, m), NonFiniteValue);
}

TEST_CASE("project_kernel examples") {
    const auto m = uniform_mesh(6);
    const auto kc = project_kernel(KernelSpec::constant(2.0), m);
    for (double v : kc.entries()) CHECK(v == doctest::Approx(2.0));
    for (double beta : {0.25, 0.5, 0.75}) {
        for (std::size_t n : {1u, 7u, 64u}) {
            const auto k = project_kernel(KernelSpec::power_law(beta), uniform_mesh(n));
            double total = 0.0;
            for (double v : k.entries()) total += v;
            CHECK(total / double(n * n) == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
    CHECK(project_kernel(KernelSpec::separable_linear(), uniform_mesh(1))(0, 0) == doctest::Approx(2.25).epsilon(1e-14));
}

TEST_CASE("project_kernel is exactly symmetric and finite") {
    const Mesh nonuniform({0.0, 0.05, 0.3, 0.31, 0.7, 1.0});
    const auto mp = std::make_shared<const Mesh>(nonuniform);
    for (const auto& k : {KernelSpec::power_law(0.9), KernelSpec::separable_linear(2.0)}) {
        const auto d = project_kernel(k, mp);
        for (std::size_t i = 0; i < d.size(); ++i)
            for (std::size_t j = 0; j < d.size(); ++j) {
                CHECK(d(i, j) == d(j, i));
                CHECK(std::isfinite(d(i, j)));
            }
    }
}

TEST_CASE("power-law cell averages match an independent quadrature") {
    // Off-diagonal cell pair (0, 2) on n = 4: the integrand is smooth there.
    const double beta = 0.5, c = 0.5 * (1 - beta) * (2 - beta);
    const auto k = project_kernel(KernelSpec::power_law(beta), uniform_mesh(4));
    double acc = 0.0;
    const int N = 400;
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) {
            const double x = (a + 0.5) / N * 0.25, y = 0.5 + (b + 0.5) / N * 0.25;
            acc += c * std::pow(y - x, -beta);
        }
    CHECK(k(0, 2) == doctest::Approx(acc / (N * N)).epsilon(1e-5));
}

TEST_CASE("dense limit") {
    CHECK_THROWS_AS(project_kernel(KernelSpec::constant(1.0), uniform_mesh(10), {8, 8}), DenseLimitExceeded);
}

TEST_CASE("DiscreteKernel validation") {
    const auto m = uniform_mesh(2);
    CHECK_THROWS_AS(DiscreteKernel(m, {0.0, 1.0, 2.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(DiscreteKernel(m, {0.0, -1.0, -1.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(DiscreteKernel(m, {0.0, 1.0, 1.0}), MeshMismatch);
    CHECK_THROWS(GridFunction(m, std::vector<double>{1.0}));
    CHECK_THROWS(GridFunction(m, std::vector<double>{1.0, INFINITY}));
}

TEST_CASE("inject_eval examples") {
    const auto m = uniform_mesh(2);
    const GridFunction u(m, std::vector<double>{1.0, 5.0});
    CHECK(inject_eval(GridFunction(m, 3.0), 0.77) == 3.0);
    CHECK(inject_eval(u, 0.5) == 1.0);
    CHECK(inject_eval(u, 0.51) == 5.0);
    CHECK(inject_eval(u, 0.0) == 1.0);
    CHECK(inject_eval(u, 1.0) == 5.0);
}

TEST_CASE("norm_lq examples") {
    const auto m = uniform_mesh(2);
    for (double q : {1.0, 2.0, 3.5, kInfinity}) CHECK(norm_lq(GridFunction(uniform_mesh(7), -2.0), q) == doctest::Approx(2.0));
    CHECK(norm_lq(GridFunction(m, std::vector<double>{0.0, 2.0}), 2.0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(norm_lq(GridFunction(m, std::vector<double>{-3.0, 1.0}), kInfinity) == 3.0);
}

TEST_CASE("matrix_norm_linf_q examples") {
    CHECK(matrix_norm_linf_q(project_kernel(KernelSpec::constant(1.7), uniform_mesh(8)), 1.0) == doctest::Approx(1.7));
    const DiscreteKernel k2(uniform_mesh(2), {0.0, 2.0, 2.0, 0.0});
    CHECK(matrix_norm_linf_q(k2, 2.0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(matrix_norm_linf_q(k2, kInfinity) == 2.0);
    for (std::size_t n : {4u, 32u, 256u}) {
        const auto k = KernelSpec::power_law(0.5);
        CHECK(matrix_norm_linf_q(project_kernel(k, uniform_mesh(n)), 1.0) <= norm_linf_q(k, 1.0) + 1e-9);
    }
}

TEST_CASE("modulus_of_smoothness examples") {
    CHECK(modulus_of_smoothness([](double) { return 3.0; }, 0.1, 2.0) == 0.0);
    for (double h : {0.1, 0.01}) {
        // int_0^{1-h} h^2 dx = h^2 (1-h): a value in [h - h^{3/2}, h].
        const double m = modulus_of_smoothness([](double x) { return x; }, h, 2.0);
        CHECK(m <= h * (1 + 1e-9));
        CHECK(m >= h - std::pow(h, 1.5));
        const double s = modulus_of_smoothness([](double x) { return x > 0.5 ? 1.0 : 0.0; }, h, 1.0);
        CHECK(s == doctest::Approx(h).epsilon(0.05));
    }
}

TEST_CASE("projection is idempotent on injected grid functions") {
    const auto m = uniform_mesh(16);
    const Philox4x32 rng(3);
    std::vector<double> v(16);
    for (std::size_t i = 0; i < 16; ++i) v[i] = rng.uniform(0, i) * 10 - 5;
    const GridFunction u(m, v);
    const auto back = project_function([&](double x) { return inject_eval(u, x); }, m);
    for (std::size_t i = 0; i < 16; ++i) CHECK(back[i] == u[i]);
    const auto t = transfer(u, m);
    for (std::size_t i = 0; i < 16; ++i) CHECK(t[i] == u[i]);
}

TEST_CASE("projector contraction on random piecewise cubics") {
    // Pieces (j/8, (j+1)/8]; norms of u on a 16x finer mesh.
    const Philox4x32 rng(5);
    for (std::uint64_t trial = 0; trial < 30; ++trial) {
        double coef[8][4];
        for (int j = 0; j < 8; ++j)
            for (int d = 0; d < 4; ++d) coef[j][d] = rng.uniform(trial, 4 * j + d) * 4 - 2;
        auto u = [&](double x) {
            const int j = std::min(7, std::max(0, int(std::ceil(x * 8)) - 1));
            const double s = x * 8 - j;
            return coef[j][0] + s * (coef[j][1] + s * (coef[j][2] + s * coef[j][3]));
        };
        for (std::size_t n : {8u, 64u}) {
            const auto pu = project_function(u, uniform_mesh(n));
            const auto fine = uniform_mesh(16 * n);
            for (double q : {1.0, 2.0}) {
                double acc = 0.0;
                const int M = 64;
                for (std::size_t c = 0; c < fine->size(); ++c)
                    for (int k = 0; k < M; ++k) {
                        const double x = fine->left(c) + (k + 0.5) / M * fine->h(c);
                        acc += std::pow(std::abs(u(x)), q) * fine->h(c) / M;
                    }
                CHECK(norm_lq(pu, q) <= std::pow(acc, 1.0 / q) + 1e-6);
            }
            double sup = 0.0;
            for (int k = 0; k <= 100000; ++k) sup = std::max(sup, std::abs(u(k / 100000.0)));
            CHECK(norm_lq(pu, kInfinity) <= sup + 1e-9);
        }
    }
}

TEST_CASE("projection approximation rate for f(x) = x") {
    std::vector<double> lx, le;
    for (std::size_t n = 16; n <= 512; n *= 2) {
        const auto pu = project_function([](double x) { return x; }, uniform_mesh(n));
        const auto fine = project_function([](double x) { return x; }, uniform_mesh(16 * n));
        const auto up = transfer(pu, uniform_mesh(16 * n));
        std::vector<double> d(16 * n);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = up[i] - fine[i];
        lx.push_back(std::log(1.0 / n));
        le.push_back(std::log(norm_lq(GridFunction(uniform_mesh(16 * n), d), 2.0)));
    }
    double mx = 0, me = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / lx.size(), me += le[i] / lx.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (le[i] - me), sxx += (lx[i] - mx) * (lx[i] - mx);
    CHECK(sxy / sxx == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("transfer between nested and non-nested meshes") {
    const GridFunction u(uniform_mesh(2), std::vector<double>{1.0, 3.0});
    const auto up = transfer(u, uniform_mesh(4));
    CHECK(up[0] == 1.0);
    CHECK(up[3] == 3.0);
    const auto down = transfer(up, uniform_mesh(1));
    CHECK(down[0] == doctest::Approx(2.0));
    const auto odd = transfer(u, uniform_mesh(3));
    CHECK(odd[1] == doctest::Approx(2.0));
}

TEST_CASE("CSV round trips") {
    const auto m = std::make_shared<const Mesh>(std::vector<double>{0.0, 0.3, 1.0});
    const GridFunction u(m, std::vector<double>{0.1, -2.5e-17});
    std::stringstream ss;
    write_csv(ss, u);
    const auto back = read_grid_function_csv(ss);
    CHECK(back.mesh() == *m);
    CHECK(back[0] == 0.1);
    CHECK(back[1] == -2.5e-17);
    const auto k = project_kernel(KernelSpec::power_law(0.4), uniform_mesh(5));
    std::stringstream sk;
    write_csv(sk, k);
    const auto kb = read_discrete_kernel_csv(sk);
    for (std::size_t i = 0; i < 25; ++i) CHECK(kb.entries()[i] == k.entries()[i]);
    std::stringstream bad("n=2,layout=uniform\n0,1\n");
    CHECK_THROWS_AS(read_grid_function_csv(bad), ParseError);
}
