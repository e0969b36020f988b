#include "nlplap/plaplacian.hpp"

#include <algorithm>
#include <cmath>

#include "nlplap/errors.hpp"
#include "operator_core.hpp"

namespace nlplap {
namespace {

void require_p_gt1(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw InvalidP("the p-Laplacian needs p > 1 (use the 1-Laplacian selection for p = 1)");
}

template <class K>
void require_same_mesh(const K& k, const GridFunction& u) {
    if (!same_mesh(k.mesh_ptr(), u.mesh_ptr())) throw MeshMismatch("operator and state live on different meshes");
}

template <class C, class K>
GridFunction apply_impl(const K& k, double p, const GridFunction& u) {
    require_p_gt1(p);
    require_same_mesh(k, u);
    std::vector<double> out(u.size());
    detail::with_power(p, [&](const auto& pw) { detail::evaluate(C{k}, pw, p, u.values(), out, false); });
    return GridFunction(u.mesh_ptr(), std::move(out));
}

template <class C, class K>
GridFunction eta_impl(const K& k, const GridFunction& u, SubgradientSelection* w) {
    require_same_mesh(k, u);
    const C c{k};
    const auto vals = u.values();
    std::vector<double> eta(u.size());
    parallel_for(u.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double s = 0.0;
            c.row(i, [&](std::size_t j, double wt) {
                const double d = vals[j] - vals[i];
                const int sg = (d > 0.0) - (d < 0.0);
                if (w) w->set(i, j, sg);
                s += wt * sg;
            });
            eta[i] = -s;
        }
    });
    return GridFunction(u.mesh_ptr(), std::move(eta));
}

template <class C, class K>
double energy_impl(const K& k, double p, const GridFunction& u) {
    require_same_mesh(k, u);
    if (!(p >= 1.0)) throw InvalidP("energy needs p >= 1");
    std::vector<double> scratch(u.size());
    if (p == 1.0) {
        // |d|^(p-1) = 1 away from ties; sign(0) = 0 makes ties contribute nothing either way
        struct PowOne {
            double operator()(double a) const { return a > 0.0 ? 1.0 : 0.0; }
        };
        return detail::evaluate(C{k}, PowOne{}, 1.0, u.values(), scratch, true);
    }
    return detail::with_power(p, [&](const auto& pw) { return detail::evaluate(C{k}, pw, p, u.values(), scratch, true); });
}

}  // namespace

SparseKernel::SparseKernel(MeshPtr mesh, std::vector<std::size_t> row_offsets, std::vector<std::uint32_t> columns,
                           std::vector<double> values)
    : mesh_(std::move(mesh)), offsets_(std::move(row_offsets)), columns_(std::move(columns)), values_(std::move(values)) {
    if (!mesh_) throw InvalidArgument("sparse kernel needs a mesh");
    const std::size_t n = mesh_->size();
    if (offsets_.size() != n + 1 || offsets_.front() != 0 || offsets_.back() != columns_.size() ||
        columns_.size() != values_.size())
        throw InvalidArgument("malformed CSR arrays");
    for (std::size_t i = 0; i < n; ++i) {
        if (offsets_[i] > offsets_[i + 1]) throw InvalidArgument("CSR offsets must be nondecreasing");
        for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
            if (columns_[e] >= n) throw InvalidArgument("CSR column out of range");
            if (e > offsets_[i] && columns_[e] <= columns_[e - 1]) throw InvalidArgument("CSR columns must be sorted and unique");
            if (!(values_[e] >= 0.0) || !std::isfinite(values_[e])) throw InvalidArgument("couplings must be finite and >= 0");
        }
    }
    // symmetry: every (i, j, v) has a matching (j, i, v)
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
            const std::size_t j = columns_[e];
            const auto first = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[j]);
            const auto last = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[j + 1]);
            const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(i));
            if (it == last || *it != i || values_[static_cast<std::size_t>(it - columns_.begin())] != values_[e])
                throw InvalidArgument("sparse couplings must be symmetric");
        }
}

double matrix_norm_linf_q(const SparseKernel& k, double q) {
    if (!(q == 1.0 || q == 2.0 || std::isinf(q))) throw InvalidArgument("matrix norms support q in {1, 2, inf} only");
    double best = 0.0;
    const auto h = k.mesh().cell_sizes();
    for (std::size_t i = 0; i < k.size(); ++i) {
        const auto cols = k.columns(i);
        const auto vals = k.values(i);
        double v = 0.0;
        for (std::size_t e = 0; e < cols.size(); ++e) {
            if (std::isinf(q))
                v = std::max(v, vals[e]);
            else
                v += h[cols[e]] * (q == 1.0 ? vals[e] : vals[e] * vals[e]);
        }
        if (q == 2.0) v = std::sqrt(v);
        best = std::max(best, v);
    }
    return best;
}

double psi(double p, double x) {
    if (x == 0.0) return 0.0;
    return std::copysign(std::pow(std::abs(x), p - 1.0), x);
}

GridFunction apply(const DiscreteKernel& k, double p, const GridFunction& u) {
    return apply_impl<detail::DenseCoupling>(k, p, u);
}

GridFunction apply(const SparseKernel& k, double p, const GridFunction& u) {
    return apply_impl<detail::SparseCoupling>(k, p, u);
}

OneLaplacianSelection one_lap_select(const DiscreteKernel& k, const GridFunction& u) {
    SubgradientSelection w(u.size());
    auto eta = eta_impl<detail::DenseCoupling>(k, u, &w);
    return {std::move(eta), std::move(w)};
}

OneLaplacianSelection one_lap_select(const SparseKernel& k, const GridFunction& u) {
    SubgradientSelection w(u.size());
    auto eta = eta_impl<detail::SparseCoupling>(k, u, &w);
    return {std::move(eta), std::move(w)};
}

GridFunction one_lap_eta(const DiscreteKernel& k, const GridFunction& u) {
    return eta_impl<detail::DenseCoupling>(k, u, nullptr);
}

GridFunction one_lap_eta(const SparseKernel& k, const GridFunction& u) {
    return eta_impl<detail::SparseCoupling>(k, u, nullptr);
}

double energy(const DiscreteKernel& k, double p, const GridFunction& u) {
    return energy_impl<detail::DenseCoupling>(k, p, u);
}

double energy(const SparseKernel& k, double p, const GridFunction& u) {
    return energy_impl<detail::SparseCoupling>(k, p, u);
}

double monotonicity_constant(double p) { return std::pow(2.0, 2.0 - p) * std::min(1.0, p - 1.0); }

double continuity_constant(double p) {
    const double t = std::pow(2.0, 2.0 - p);
    return std::max({t, (p - 1.0) * t, 1.0});
}

double cfl_constant(double p, double k_inf1) {
    if (!(p > 1.0 && p <= 2.0)) throw InvalidP("the forward-Euler step constant needs p in (1, 2]");
    if (!(k_inf1 > 0.0)) throw InvalidArgument("the kernel L^{inf,1} norm must be positive");
    const double c2 = continuity_constant(p);
    return std::pow(2.0, (p - 2.0) / (2.0 * (p - 1.0))) * std::pow(std::sqrt(c2) * k_inf1, 1.0 / (1.0 - p)) *
           (1.0 - 1.0 / p);
}

InequalitySides check_monotonicity(double p, double beta_exp, double x, double y) {
    require_p_gt1(p);
    if (!(beta_exp >= std::max(p, 2.0))) throw InvalidArgument("monotonicity exponent must be >= max(p, 2)");
    if (x == y) return {0.0, 0.0};
    const double lhs = (psi(p, y) - psi(p, x)) * (y - x);
    const double rhs = monotonicity_constant(p) * std::pow(std::abs(y - x), beta_exp) *
                       std::pow(std::abs(y) + std::abs(x), p - beta_exp);
    return {lhs, rhs};
}

InequalitySides check_continuity(double p, double alpha_exp, double x, double y) {
    require_p_gt1(p);
    if (!(alpha_exp >= 0.0 && alpha_exp <= std::min(1.0, p - 1.0)))
        throw InvalidArgument("continuity exponent must lie in [0, min(1, p-1)]");
    if (x == y) return {0.0, 0.0};
    const double lhs = std::abs(psi(p, y) - psi(p, x));
    const double rhs = continuity_constant(p) * std::pow(std::abs(y - x), alpha_exp) *
                       std::pow(std::abs(y) + std::abs(x), p - 1.0 - alpha_exp);
    return {lhs, rhs};
}

}  // namespace nlplap
