#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nlplap/mesh.hpp"

namespace nlplap {

/// Symmetric nonnegative couplings stored by rows (CSR), e.g. the weighted
/// adjacency of a sampled graph. Row i holds the pairs (j, K_ij) with K_ij > 0.
class SparseKernel {
public:
    SparseKernel(MeshPtr mesh, std::vector<std::size_t> row_offsets, std::vector<std::uint32_t> columns,
                 std::vector<double> values);

    const Mesh& mesh() const noexcept { return *mesh_; }
    const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
    std::size_t size() const noexcept { return mesh_->size(); }
    std::size_t nonzeros() const noexcept { return columns_.size(); }
    std::span<const std::uint32_t> columns(std::size_t i) const {
        return {columns_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    std::span<const double> values(std::size_t i) const {
        return {values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }

private:
    MeshPtr mesh_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> columns_;
    std::vector<double> values_;
};

double matrix_norm_linf_q(const SparseKernel& k, double q);

/// Psi(x) = sign(x)|x|^(p-1) with sign(0) = 0.
double psi(double p, double x);

/// (Delta_p u)_i = -sum_j h_j K_ij Psi(u_j - u_i), p > 1.
GridFunction apply(const DiscreteKernel& k, double p, const GridFunction& u);
GridFunction apply(const SparseKernel& k, double p, const GridFunction& u);

/// w_ij = sign(u_j - u_i) (0 at ties), stored densely as int8.
class SubgradientSelection {
public:
    explicit SubgradientSelection(std::size_t n) : n_(n), w_(n * n, 0) {}
    std::size_t size() const noexcept { return n_; }
    int operator()(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
    void set(std::size_t i, std::size_t j, int v) { w_[i * n_ + j] = static_cast<std::int8_t>(v); }

private:
    std::size_t n_;
    std::vector<std::int8_t> w_;
};

struct OneLaplacianSelection {
    GridFunction eta;
    SubgradientSelection w;
};

/// eta_i = -sum_j h_j K_ij w_ij with w_ij = sign(u_j - u_i): an element of the
/// set-valued 1-Laplacian.
OneLaplacianSelection one_lap_select(const DiscreteKernel& k, const GridFunction& u);
OneLaplacianSelection one_lap_select(const SparseKernel& k, const GridFunction& u);
/// Only the eta part of one_lap_select.
GridFunction one_lap_eta(const DiscreteKernel& k, const GridFunction& u);
GridFunction one_lap_eta(const SparseKernel& k, const GridFunction& u);

/// E(u) = 1/(2p) sum_ij h_i h_j K_ij |u_j - u_i|^p (factor 1/2 for p = 1).
/// Its gradient in the h-weighted inner product is Delta_p u.
double energy(const DiscreteKernel& k, double p, const GridFunction& u);
double energy(const SparseKernel& k, double p, const GridFunction& u);

struct ResolventOptions {
    /// Residual target on ||u + lambda Delta_p u - b||_{h,2}; <= 0 selects 1e-10 * max(1, ||b||_{h,2}).
    double tol = -1.0;
    std::size_t max_iters = 500;
};

struct ResolventResult {
    GridFunction u;
    std::size_t iterations = 0;
    double residual = 0.0;
    double tol = 0.0;
};

double default_resolvent_tol(const GridFunction& b);

/// u = (I + lambda Delta_p)^{-1} b, computed by minimizing the strongly convex
/// F(u) = 1/2 ||u - b||_h^2 + lambda E(u) from the warm start u = b.
/// Throws NoConvergence if the residual target is not met within max_iters.
ResolventResult resolvent(const DiscreteKernel& k, double p, double lambda, const GridFunction& b,
                          const ResolventOptions& opts = {});
ResolventResult resolvent(const SparseKernel& k, double p, double lambda, const GridFunction& b,
                          const ResolventOptions& opts = {});

/// C1 = 2^(2-p) min(1, p-1).
double monotonicity_constant(double p);
/// C2 = max(2^(2-p), (p-1) 2^(2-p), 1).
double continuity_constant(double p);

/// Step-size constant of the forward scheme for p in (1, 2]:
/// 2^((p-2)/(2(p-1))) (C2^(1/2) k_inf1)^(1/(1-p)) (1 - 1/p).
double cfl_constant(double p, double k_inf1);

struct InequalitySides {
    double lhs;
    double rhs;
};

/// lhs = (Psi(y) - Psi(x))(y - x), rhs = C1 |y-x|^b (|y|+|x|)^(p-b); lhs >= rhs.
InequalitySides check_monotonicity(double p, double beta_exp, double x, double y);
/// lhs = |Psi(y) - Psi(x)|, rhs = C2 |y-x|^a (|y|+|x|)^(p-1-a); lhs <= rhs.
InequalitySides check_continuity(double p, double alpha_exp, double x, double y);

}  // namespace nlplap
