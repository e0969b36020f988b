#pragma once

// Row kernels shared by the dense and the sparse operators. Internal header.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nlplap/mesh.hpp"
#include "nlplap/parallel.hpp"
#include "nlplap/plaplacian.hpp"

namespace nlplap::detail {

/// a^(p-1) for a >= 0, specialized for the exponents the studies use most.
struct PowLinear {
    double operator()(double a) const { return a; }
};
struct PowSqrt {
    double operator()(double a) const { return std::sqrt(a); }
};
struct PowSquare {
    double operator()(double a) const { return a * a; }
};
struct PowCube {
    double operator()(double a) const { return a * a * a; }
};
struct PowGeneral {
    double e;
    double operator()(double a) const { return a == 0.0 ? 0.0 : std::pow(a, e); }
};

template <class Fn>
decltype(auto) with_power(double p, Fn&& fn) {
    if (p == 2.0) return fn(PowLinear{});
    if (p == 1.5) return fn(PowSqrt{});
    if (p == 3.0) return fn(PowSquare{});
    if (p == 4.0) return fn(PowCube{});
    return fn(PowGeneral{p - 1.0});
}

/// Dense rows: visits (j, h_j K_ij).
struct DenseCoupling {
    const DiscreteKernel& k;

    std::size_t size() const { return k.size(); }
    std::span<const double> h() const { return k.mesh().cell_sizes(); }

    template <class F>
    void row(std::size_t i, F&& f) const {
        const auto r = k.row(i);
        const auto hs = h();
        const std::size_t n = r.size();
        for (std::size_t j = 0; j < n; ++j) f(j, hs[j] * r[j]);
    }
};

/// Sparse rows: visits stored neighbours only.
struct SparseCoupling {
    const SparseKernel& k;

    std::size_t size() const { return k.size(); }
    std::span<const double> h() const { return k.mesh().cell_sizes(); }

    template <class F>
    void row(std::size_t i, F&& f) const {
        const auto cols = k.columns(i);
        const auto vals = k.values(i);
        const auto hs = h();
        for (std::size_t e = 0; e < cols.size(); ++e) f(cols[e], hs[cols[e]] * vals[e]);
    }
};

/// out = Delta_p u; returns E(u) when `energy` is true (0 otherwise).
template <class C, class Pow>
double evaluate(const C& c, const Pow& pw, double p, std::span<const double> u, std::span<double> out, bool energy) {
    const std::size_t n = c.size();
    std::vector<double> row_energy(energy ? n : 0);
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double ui = u[i];
            double s = 0.0;
            double e = 0.0;
            c.row(i, [&](std::size_t j, double w) {
                const double d = u[j] - ui;
                const double a = std::abs(d);
                const double ps = pw(a);
                s += w * std::copysign(ps, d);
                if (energy) e += w * a * ps;
            });
            out[i] = -s;
            if (energy) row_energy[i] = e;
        }
    });
    if (!energy) return 0.0;
    const auto hs = c.h();
    for (std::size_t i = 0; i < n; ++i) row_energy[i] *= hs[i];
    return ordered_sum(row_energy) / (2.0 * p);
}

}  // namespace nlplap::detail
