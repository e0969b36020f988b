#include <algorithm>
#include <cmath>
#include <limits>

#include "nlplap/errors.hpp"
#include "nlplap/plaplacian.hpp"
#include "operator_core.hpp"

namespace nlplap {
namespace {

double dot_h(std::span<const double> a, std::span<const double> b, std::span<const double> h) {
    std::vector<double> t(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) t[i] = h[i] * a[i] * b[i];
    return ordered_sum(t);
}

// Weighted graph Laplacian (L v)_i = sum_j h_j W_ij (v_i - v_j) with W stored like the coupling.
struct DenseWeights {
    const DiscreteKernel& k;
    std::vector<double> w;  // empty: use K itself (p = 2)

    double at(std::size_t i, std::size_t j) const { return w.empty() ? k(i, j) : w[i * k.size() + j]; }

    void laplacian(std::span<const double> v, std::span<double> out) const {
        const std::size_t n = k.size();
        const auto h = k.mesh().cell_sizes();
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double* row = w.empty() ? k.row(i).data() : w.data() + i * n;
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += h[j] * row[j] * (v[i] - v[j]);
                out[i] = s;
            }
        });
    }

    void diagonal(std::span<double> out) const {
        const std::size_t n = k.size();
        const auto h = k.mesh().cell_sizes();
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) s += h[j] * at(i, j);
            out[i] = s;
        }
    }
};

struct SparseWeights {
    const SparseKernel& k;
    std::vector<double> w;  // per stored entry; empty: use the stored values

    void laplacian(std::span<const double> v, std::span<double> out) const {
        const std::size_t n = k.size();
        const auto h = k.mesh().cell_sizes();
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const auto cols = k.columns(i);
                const auto vals = k.values(i);
                const double* ws = w.empty() ? vals.data() : w.data() + (vals.data() - k.values(0).data());
                double s = 0.0;
                for (std::size_t e = 0; e < cols.size(); ++e) s += h[cols[e]] * ws[e] * (v[i] - v[cols[e]]);
                out[i] = s;
            }
        });
    }

    void diagonal(std::span<double> out) const {
        const auto h = k.mesh().cell_sizes();
        const double* base = k.values(0).data();
        for (std::size_t i = 0; i < k.size(); ++i) {
            const auto cols = k.columns(i);
            const auto vals = k.values(i);
            const double* ws = w.empty() ? vals.data() : w.data() + (vals.data() - base);
            double s = 0.0;
            for (std::size_t e = 0; e < cols.size(); ++e)
                if (cols[e] != i) s += h[cols[e]] * ws[e];
            out[i] = s;
        }
    }
};

// (p-1) |d|^(p-2) from a^(p-1) / a. For p < 2 the differences are floored at
// `floor`, which keeps the weight finite at ties; for p > 2 a tie has weight 0.
template <class Pow>
double curvature(const Pow& pw, double p, double d, double floor) {
    const double a = std::max(std::abs(d), floor);
    return a == 0.0 ? 0.0 : (p - 1.0) * pw(a) / a;
}

// Hessian weights (p-1) K_ij |u_j - u_i|^(p-2).
DenseWeights hessian_weights(const DiscreteKernel& k, double p, std::span<const double> u, double floor) {
    DenseWeights dw{k, {}};
    if (p == 2.0) return dw;
    const std::size_t n = k.size();
    dw.w.resize(n * n);
    detail::with_power(p, [&](const auto& pw) {
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const auto row = k.row(i);
                for (std::size_t j = 0; j < n; ++j) dw.w[i * n + j] = row[j] * curvature(pw, p, u[j] - u[i], floor);
            }
        });
    });
    return dw;
}

SparseWeights hessian_weights(const SparseKernel& k, double p, std::span<const double> u, double floor) {
    SparseWeights sw{k, {}};
    if (p == 2.0) return sw;
    sw.w.resize(k.nonzeros());
    detail::with_power(p, [&](const auto& pw) {
        std::size_t e0 = 0;
        for (std::size_t i = 0; i < k.size(); ++i) {
            const auto cols = k.columns(i);
            const auto vals = k.values(i);
            for (std::size_t e = 0; e < cols.size(); ++e)
                sw.w[e0 + e] = vals[e] * curvature(pw, p, u[cols[e]] - u[i], floor);
            e0 += cols.size();
        }
    });
    return sw;
}

template <class Weights>
void solve_newton_system(const Weights& weights, double lambda, std::span<const double> h, std::span<const double> rhs,
                         std::span<double> x, double rel_tol, std::size_t max_iters) {
    // Jacobi-preconditioned CG in the h-weighted inner product on (I + lambda L_W) x = rhs
    const std::size_t n = rhs.size();
    std::vector<double> diag(n), r(rhs.begin(), rhs.end()), z(n), d(n), ad(n);
    weights.diagonal(diag);
    for (auto& v : diag) v = 1.0 + lambda * v;
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    d = z;
    double rz = dot_h(r, z, h);
    const double target = rel_tol * std::sqrt(dot_h(rhs, rhs, h));
    for (std::size_t it = 0; it < max_iters; ++it) {
        if (std::sqrt(dot_h(r, r, h)) <= target) break;
        weights.laplacian(d, ad);
        for (std::size_t i = 0; i < n; ++i) ad[i] = d[i] + lambda * ad[i];
        const double dad = dot_h(d, ad, h);
        if (!(dad > 0.0)) break;
        const double alpha = rz / dad;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
            z[i] = r[i] / diag[i];
        }
        const double rz_new = dot_h(r, z, h);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) d[i] = z[i] + beta * d[i];
    }
}

template <class C, class K>
struct Objective {
    const K& k;
    double p;
    double lambda;
    std::span<const double> b;
    std::span<const double> h;

    // F(u) and its h-gradient u - b + lambda Delta_p u.
    double operator()(std::span<const double> u, std::span<double> grad) const {
        const double e = detail::with_power(p, [&](const auto& pw) { return detail::evaluate(C{k}, pw, p, u, grad, true); });
        std::vector<double> sq(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double diff = u[i] - b[i];
            sq[i] = h[i] * diff * diff;
            grad[i] = diff + lambda * grad[i];
        }
        return 0.5 * ordered_sum(sq) + lambda * e;
    }
};

constexpr double kArmijo = 1e-4;
constexpr double kTieFloor = 1e-14;
// stop early when the residual has not improved by 0.1% over this many iterations
constexpr std::size_t kStallWindow = 25;
constexpr double kCurvature = 0.1;
constexpr int kMaxSecant = 30;
constexpr int kMaxHalvings = 60;

// True when the Armijo test passes, or when the predicted decrease is below
// the rounding level of F and the gradient norm went down instead.
bool accept_step(double f_new, double f_old, double predicted_decrease, double g_new, double g_old) {
    const double rounding = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f_old));
    if (predicted_decrease < rounding) return g_new < g_old;
    return f_new <= f_old - kArmijo * predicted_decrease;
}

template <class C, class K>
ResolventResult solve(const K& k, double p, double lambda, const GridFunction& b, const ResolventOptions& opts) {
    if (!(p > 1.0)) throw InvalidP("the resolvent is defined for p > 1");
    if (!(lambda > 0.0)) throw InvalidArgument("resolvent step lambda must be positive");
    if (!same_mesh(k.mesh_ptr(), b.mesh_ptr())) throw MeshMismatch("operator and data live on different meshes");
    const double tol = opts.tol > 0.0 ? opts.tol : default_resolvent_tol(b);
    const std::size_t n = b.size();
    const auto h = b.mesh().cell_sizes();
    const Objective<C, K> objective{k, p, lambda, b.values(), h};

    std::vector<double> u(b.values().begin(), b.values().end());
    std::vector<double> g(n), u_try(n), g_try(n), dir(n);
    double f = objective(u, g);
    double r = std::sqrt(dot_h(g, g, h));
    // ties make the p < 2 curvature infinite; differences below this floor are treated as the floor
    const auto [lo, hi] = std::minmax_element(b.values().begin(), b.values().end());
    const double floor = p < 2.0 ? kTieFloor * std::max(std::abs(*lo), std::abs(*hi)) : 0.0;
    std::size_t it = 0;
    double best = r;
    std::size_t best_it = 0;

    for (; it < opts.max_iters && r > tol; ++it) {
        // damped Newton: the Hessian is I + lambda * (weighted graph Laplacian), SPD
        const auto weights = hessian_weights(k, p, u, floor);
        std::vector<double> rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = -g[i];
        const double forcing = std::clamp(r, 1e-3 * tol / r, 1e-2);
        solve_newton_system(weights, lambda, h, rhs, dir, forcing, 4 * n + 50);
        double slope = dot_h(g, dir, h);  // <grad, dir>_h
        if (!(slope < 0.0)) {
            for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
            slope = -r * r;
        }
        // F is convex along dir, so phi'(s) = <grad F(u + s dir), dir>_h is nondecreasing.
        // A Newton step that overshoots (phi'(1) > 0, typical at near-ties for p < 2)
        // is shortened to an approximate root of phi' by regula falsi.
        double f_try = f, r_try = r;
        auto trial = [&](double s) {
            for (std::size_t i = 0; i < n; ++i) u_try[i] = u[i] + s * dir[i];
            f_try = objective(u_try, g_try);
            r_try = std::sqrt(dot_h(g_try, g_try, h));
            return dot_h(g_try, dir, h);
        };
        double step = 1.0;
        double d_hi = trial(step);
        if (d_hi > kCurvature * std::abs(slope)) {
            double s_lo = 0.0, d_lo = slope, s_hi = 1.0;
            int side = 0;
            for (int k = 0; k < kMaxSecant; ++k) {
                step = (s_lo * d_hi - s_hi * d_lo) / (d_hi - d_lo);
                const double d = trial(step);
                if (std::abs(d) <= kCurvature * std::abs(slope)) break;
                if (d > 0.0) {
                    s_hi = step;
                    d_hi = d;
                    if (side == 1) d_lo *= 0.5;  // Illinois modification
                    side = 1;
                } else {
                    s_lo = step;
                    d_lo = d;
                    if (side == -1) d_hi *= 0.5;
                    side = -1;
                }
            }
        }
        bool accepted = accept_step(f_try, f, -step * slope, r_try, r);
        for (int halving = 0; !accepted && halving < kMaxHalvings; ++halving) {
            step *= 0.5;
            trial(step);
            accepted = accept_step(f_try, f, -step * slope, r_try, r);
        }
        if (!accepted) break;

        u.swap(u_try);
        g.swap(g_try);
        f = f_try;
        r = r_try;
        if (r < (1.0 - 1e-3) * best) {
            best = r;
            best_it = it;
        } else if (it - best_it >= kStallWindow) {
            ++it;
            break;
        }
    }

    if (r > tol)
        throw NoConvergence("resolvent did not reach tolerance " + format_double(tol) + " (residual " +
                                format_double(r) + " after " + std::to_string(it) + " iterations)",
                            it, r);
    return ResolventResult{GridFunction(b.mesh_ptr(), std::move(u)), it, r, tol};
}

}  // namespace

double default_resolvent_tol(const GridFunction& b) { return 1e-10 * std::max(1.0, norm_lq(b, 2.0)); }

ResolventResult resolvent(const DiscreteKernel& k, double p, double lambda, const GridFunction& b,
                          const ResolventOptions& opts) {
    return solve<detail::DenseCoupling>(k, p, lambda, b, opts);
}

ResolventResult resolvent(const SparseKernel& k, double p, double lambda, const GridFunction& b,
                          const ResolventOptions& opts) {
    return solve<detail::SparseCoupling>(k, p, lambda, b, opts);
}

}  // namespace nlplap
