#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "nlplap/errors.hpp"
#include "nlplap/mesh.hpp"
#include "nlplap/plaplacian.hpp"
#include "nlplap/rng.hpp"

using namespace nlplap;

namespace {

GridFunction random_grid(const MeshPtr& m, std::uint64_t stream, double scale = 1.0, std::uint64_t key = 17) {
    const Philox4x32 rng(key);
    std::vector<double> v(m->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = scale * (2.0 * rng.uniform(stream, i) - 1.0);
    return GridFunction(m, v);
}

DiscreteKernel random_kernel(const MeshPtr& m, std::uint64_t key) {
    const Philox4x32 rng(key);
    const std::size_t n = m->size();
    std::vector<double> e(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) e[i * n + j] = e[j * n + i] = 3.0 * rng.uniform(i, j);
    return DiscreteKernel(m, e);
}

double weighted_sum(const GridFunction& u) {
    double s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u.mesh().h(i) * u[i];
    return s;
}

double l1(const GridFunction& u) { return norm_lq(u, 1.0); }

}  // namespace

TEST_CASE("psi examples") {
    for (double p : {1.1, 2.0, 3.7}) CHECK(psi(p, 0.0) == 0.0);
    for (double x : {-3.0, 0.5, 7.25}) CHECK(psi(2.0, x) == x);
    CHECK(psi(3.0, -2.0) == -4.0);
    const Philox4x32 rng(2);
    for (std::uint64_t s = 0; s < 200; ++s) {
        const double p = 1.01 + 5 * rng.uniform(s, 0), x = 20 * rng.uniform(s, 1) - 10;
        CHECK(psi(p, -x) == -psi(p, x));
    }
}

TEST_CASE("apply examples") {
    const auto m2 = uniform_mesh(2);
    const DiscreteKernel k(m2, {1.5, 1.5, 1.5, 1.5});
    for (double p : {1.5, 2.0, 3.0}) {
        const double a = 0.2, b = 1.7;
        const auto lu = apply(k, p, GridFunction(m2, std::vector<double>{a, b}));
        CHECK(lu[0] == doctest::Approx(-0.75 * std::pow(b - a, p - 1)));
        CHECK(lu[1] == doctest::Approx(0.75 * std::pow(b - a, p - 1)));
    }
    const auto m = uniform_mesh(9);
    const auto kr = random_kernel(m, 4);
    const auto zero = apply(kr, 1.7, GridFunction(m, 2.0));
    for (std::size_t i = 0; i < 9; ++i) CHECK(zero[i] == 0.0);
    CHECK_THROWS_AS(apply(kr, 2.0, GridFunction(uniform_mesh(3), 1.0)), MeshMismatch);
}

TEST_CASE("mass conservation and monotonicity of apply") {
    const auto m = std::make_shared<const Mesh>(std::vector<double>{0.0, 0.1, 0.15, 0.4, 0.8, 0.9, 1.0});
    const auto k = random_kernel(m, 8);
    for (std::uint64_t s = 0; s < 50; ++s) {
        for (double p : {1.2, 2.0, 4.0}) {
            const auto u = random_grid(m, 2 * s, 5.0), v = random_grid(m, 2 * s + 1, 5.0);
            const auto lu = apply(k, p, u), lv = apply(k, p, v);
            CHECK(std::abs(weighted_sum(lu)) <= 1e-13 * std::max(1.0, l1(lu)));
            double mono = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) mono += m->h(i) * (lu[i] - lv[i]) * (u[i] - v[i]);
            CHECK(mono >= -1e-10);
        }
    }
}

TEST_CASE("one_lap_select examples") {
    const auto m2 = uniform_mesh(2);
    const DiscreteKernel k(m2, {0.0, 2.0, 2.0, 0.0});
    const auto sel = one_lap_select(k, GridFunction(m2, std::vector<double>{0.0, 1.0}));
    CHECK(sel.eta[0] == doctest::Approx(-1.0));
    CHECK(sel.eta[1] == doctest::Approx(1.0));
    CHECK(sel.w(0, 1) == 1);
    CHECK(sel.w(1, 0) == -1);
    const auto m = uniform_mesh(7);
    const auto kr = random_kernel(m, 9);
    const auto c = one_lap_select(kr, GridFunction(m, -1.0));
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(c.eta[i] == 0.0);
        for (std::size_t j = 0; j < 7; ++j) CHECK(c.w(i, j) == 0);
    }
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto u = random_grid(m, s);
        u[3] = u[5];  // a tie
        const auto r = one_lap_select(kr, u);
        CHECK(std::abs(weighted_sum(r.eta)) <= 1e-13 * std::max(1.0, l1(r.eta)));
        for (std::size_t i = 0; i < 7; ++i)
            for (std::size_t j = 0; j < 7; ++j) {
                CHECK(r.w(i, j) == -r.w(j, i));
                CHECK(r.w(i, j) * (u[j] - u[i]) == std::abs(u[j] - u[i]));
            }
        CHECK(r.w(3, 5) == 0);
    }
}

TEST_CASE("energy examples and gradient consistency") {
    const auto m2 = uniform_mesh(2);
    const DiscreteKernel k(m2, {0.7, 0.7, 0.7, 0.7});
    CHECK(energy(k, 2.0, GridFunction(m2, std::vector<double>{0.0, 1.0})) == doctest::Approx(0.7 / 8));
    CHECK(energy(k, 1.0, GridFunction(m2, std::vector<double>{0.0, 3.0})) == doctest::Approx(0.5 * 2 * 0.25 * 0.7 * 3));
    const auto m = std::make_shared<const Mesh>(std::vector<double>{0.0, 0.2, 0.25, 0.6, 1.0});
    const auto kr = random_kernel(m, 12);
    CHECK(energy(kr, 3.0, GridFunction(m, 1.0)) == 0.0);
    for (double p : {2.0, 3.0, 4.0}) {
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto u = random_grid(m, s, 2.0);
            const auto g = apply(kr, p, u);
            for (std::size_t i = 0; i < u.size(); ++i) {
                const double eps = 1e-5;
                auto up = u, dn = u;
                up[i] += eps;
                dn[i] -= eps;
                // Gradient in the h-inner product: dE/du_i = h_i (Delta_p u)_i.
                const double fd = (energy(kr, p, up) - energy(kr, p, dn)) / (2 * eps) / m->h(i);
                CHECK(fd == doctest::Approx(g[i]).epsilon(1e-6).scale(1e-6));
            }
        }
    }
}

TEST_CASE("resolvent examples") {
    const auto m = uniform_mesh(16);
    const auto k = project_kernel(KernelSpec::separable_linear(), m);
    for (double p : {1.5, 2.0, 3.0}) {
        const auto r = resolvent(k, p, 0.3, GridFunction(m, 1.25));
        for (std::size_t i = 0; i < 16; ++i) CHECK(r.u[i] == 1.25);
    }
    CHECK_THROWS_AS(resolvent(k, 2.0, 0.0, GridFunction(m, 1.0)), InvalidArgument);
    CHECK_THROWS_AS(resolvent(k, 1.0, 0.1, GridFunction(m, 1.0)), InvalidP);
}

TEST_CASE("p = 2 resolvent matches a direct linear solve") {
    const auto m = std::make_shared<const Mesh>(std::vector<double>{0.0, 0.1, 0.3, 0.35, 0.6, 0.8, 1.0});
    const auto k = random_kernel(m, 21);
    const std::size_t n = m->size();
    for (double lambda : {0.01, 1.0, 30.0}) {
        const auto b = random_grid(m, 3, 4.0);
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) {
                    A(i, j) -= lambda * m->h(j) * k(i, j);
                    A(i, i) += lambda * m->h(j) * k(i, j);
                }
        Eigen::VectorXd bv(n);
        for (std::size_t i = 0; i < n; ++i) bv[i] = b[i];
        const Eigen::VectorXd x = A.partialPivLu().solve(bv);
        const auto r = resolvent(k, 2.0, lambda, b);
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = r.u[i] - x[i];
        CHECK(norm_lq(GridFunction(m, d), 2.0) <= 10 * r.tol);
    }
}

TEST_CASE("resolvent residual contract and nonexpansiveness") {
    const auto m = uniform_mesh(24);
    const auto k = project_kernel(KernelSpec::power_law(0.5), m);
    std::uint64_t s = 0;
    for (double p : {1.5, 2.0, 3.0})
        for (double lambda : {0.01, 0.1, 1.0}) {
            const auto b1 = random_grid(m, s++), b2 = random_grid(m, s++);
            const auto r1 = resolvent(k, p, lambda, b1), r2 = resolvent(k, p, lambda, b2);
            // Independent residual check.
            const auto lu = apply(k, p, r1.u);
            std::vector<double> res(24), du(24), db(24);
            for (std::size_t i = 0; i < 24; ++i) {
                res[i] = r1.u[i] + lambda * lu[i] - b1[i];
                du[i] = r1.u[i] - r2.u[i];
                db[i] = b1[i] - b2[i];
            }
            CHECK(norm_lq(GridFunction(m, res), 2.0) <= r1.tol * (1 + 1e-6));
            const double slack = 10 * std::max(r1.tol, r2.tol);
            for (double q : {1.0, 2.0, kInfinity})
                CHECK(norm_lq(GridFunction(m, du), q) <= norm_lq(GridFunction(m, db), q) + slack);
        }
}

TEST_CASE("resolvent reports NoConvergence instead of returning silently") {
    const auto m = uniform_mesh(16);
    const auto k = project_kernel(KernelSpec::separable_linear(), m);
    const auto b = random_grid(m, 1);
    try {
        resolvent(k, 1.5, 1.0, b, {1e-300, 3});
        FAIL("expected NoConvergence");
    } catch (const NoConvergence& e) {
        CHECK(e.iterations() <= 3);
        CHECK(e.residual() > 0.0);
    }
}

TEST_CASE("sparse operators agree with dense ones") {
    const auto m = uniform_mesh(6);
    const auto kd = random_kernel(m, 30);
    std::vector<std::size_t> off{0};
    std::vector<std::uint32_t> cols;
    std::vector<double> vals;
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j)
            if (kd(i, j) > 0) cols.push_back(std::uint32_t(j)), vals.push_back(kd(i, j));
        off.push_back(cols.size());
    }
    const SparseKernel ks(m, off, cols, vals);
    const auto u = random_grid(m, 7);
    for (double p : {1.5, 2.0, 3.0}) {
        const auto a = apply(kd, p, u), b = apply(ks, p, u);
        for (std::size_t i = 0; i < 6; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
        CHECK(energy(kd, p, u) == doctest::Approx(energy(ks, p, u)).epsilon(1e-14));
        const auto rd = resolvent(kd, p, 0.5, u), rs = resolvent(ks, p, 0.5, u);
        for (std::size_t i = 0; i < 6; ++i) CHECK(rd.u[i] == doctest::Approx(rs.u[i]).epsilon(1e-8));
    }
    const auto ed = one_lap_eta(kd, u), es = one_lap_eta(ks, u);
    for (std::size_t i = 0; i < 6; ++i) CHECK(ed[i] == doctest::Approx(es[i]).epsilon(1e-14));
    CHECK(matrix_norm_linf_q(ks, 1.0) == doctest::Approx(matrix_norm_linf_q(kd, 1.0)));
}

TEST_CASE("cfl_constant examples") {
    CHECK(cfl_constant(2.0, 1.0) == doctest::Approx(0.5));
    for (double k : {0.3, 2.0, 17.0}) CHECK(cfl_constant(2.0, k) == doctest::Approx(1.0 / (2.0 * k)));
    for (double p : {1.2, 1.5, 1.9}) {
        double prev = kInfinity;
        for (double k : {0.1, 0.5, 1.0, 3.0, 10.0}) {
            const double c = cfl_constant(p, k);
            CHECK(c < prev);
            prev = c;
        }
        // Direct formula with C2 = max(2^(2-p), (p-1)2^(2-p), 1).
        const double c2 = std::max({std::pow(2.0, 2 - p), (p - 1) * std::pow(2.0, 2 - p), 1.0});
        const double direct = std::pow(2.0, (p - 2) / (2 * (p - 1))) * std::pow(std::sqrt(c2) * 2.0, 1 / (1 - p)) * (1 - 1 / p);
        CHECK(cfl_constant(p, 2.0) == doctest::Approx(direct).epsilon(1e-14));
    }
    CHECK_THROWS_AS(cfl_constant(2.5, 1.0), InvalidP);
    CHECK_THROWS_AS(cfl_constant(1.0, 1.0), InvalidP);
}

TEST_CASE("sharp inequality checks") {
    const auto a = check_monotonicity(1.7, 2.0, 0.4, 0.4);
    CHECK(a.lhs == 0.0);
    CHECK(a.rhs == 0.0);
    const auto b = check_monotonicity(2.0, 2.0, 0.0, 1.0);
    CHECK(b.lhs == 1.0);
    CHECK(b.rhs == 1.0);
    const auto c = check_continuity(2.0, 1.0, -0.3, 2.2);
    CHECK(c.lhs == doctest::Approx(2.5));
    CHECK(c.rhs == doctest::Approx(2.5));
    const auto d = check_continuity(3.0, 1.0, 1.0, 1.0);
    CHECK(d.lhs == 0.0);
    CHECK(monotonicity_constant(1.5) == doctest::Approx(std::pow(2.0, 0.5) * 0.5));
    CHECK(continuity_constant(3.0) == doctest::Approx(1.0));
    const Philox4x32 rng(99);
    for (std::uint64_t s = 0; s < 20000; ++s) {
        const double p = 1.1 + 4.9 * rng.uniform(s, 0);
        const double x = 20 * rng.uniform(s, 1) - 10, y = 20 * rng.uniform(s, 2) - 10;
        const auto m = check_monotonicity(p, std::max(p, 2.0) + 2 * rng.uniform(s, 3), x, y);
        CHECK(m.lhs >= m.rhs - 1e-12 * std::max(1.0, std::abs(m.lhs)));
        const auto cc = check_continuity(p, std::min(1.0, p - 1) * rng.uniform(s, 4), x, y);
        CHECK(cc.lhs <= cc.rhs + 1e-12 * std::max(1.0, cc.rhs));
    }
}
