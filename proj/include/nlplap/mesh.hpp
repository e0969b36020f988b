#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nlplap/kernel.hpp"

namespace nlplap {

/// Partition 0 = x_0 < x_1 < ... < x_n = 1 of the unit interval. Cell i
/// (0-based) is the left-open, right-closed interval (x_i, x_{i+1}]; the point
/// x = 0 belongs to cell 0.
class Mesh {
public:
    explicit Mesh(std::vector<double> boundaries);

    std::size_t size() const noexcept { return sizes_.size(); }
    std::span<const double> boundaries() const noexcept { return boundaries_; }
    std::span<const double> cell_sizes() const noexcept { return sizes_; }
    double h(std::size_t i) const { return sizes_[i]; }
    double left(std::size_t i) const { return boundaries_[i]; }
    double right(std::size_t i) const { return boundaries_[i + 1]; }
    double center(std::size_t i) const { return 0.5 * (boundaries_[i] + boundaries_[i + 1]); }
    /// delta_n = max_i h_i.
    double max_size() const noexcept { return max_size_; }
    bool is_uniform() const noexcept { return uniform_; }

    std::size_t cell_of(double x) const;

    friend bool operator==(const Mesh& a, const Mesh& b) { return a.boundaries_ == b.boundaries_; }

private:
    std::vector<double> boundaries_;
    std::vector<double> sizes_;
    double max_size_ = 0.0;
    bool uniform_ = false;
};

using MeshPtr = std::shared_ptr<const Mesh>;

MeshPtr uniform_mesh(std::size_t n);

/// True when both pointers refer to the same partition.
bool same_mesh(const MeshPtr& a, const MeshPtr& b);

/// Cell values u_i on a mesh.
class GridFunction {
public:
    GridFunction(MeshPtr mesh, std::vector<double> values);
    GridFunction(MeshPtr mesh, double value);

    const Mesh& mesh() const noexcept { return *mesh_; }
    const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

private:
    MeshPtr mesh_;
    std::vector<double> values_;
};

/// Default upper bound on n for dense kernel storage.
inline constexpr std::size_t kDefaultDenseLimit = 4096;

/// Symmetric nonnegative n x n matrix of cell-averaged kernel values.
class DiscreteKernel {
public:
    /// Row-major entries; validated for size, symmetry, sign and finiteness.
    DiscreteKernel(MeshPtr mesh, std::vector<double> entries, std::size_t dense_limit = kDefaultDenseLimit);

    const Mesh& mesh() const noexcept { return *mesh_; }
    const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
    std::size_t size() const noexcept { return mesh_->size(); }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * size() + j]; }
    std::span<const double> row(std::size_t i) const { return {entries_.data() + i * size(), size()}; }
    std::span<const double> entries() const noexcept { return entries_; }

private:
    MeshPtr mesh_;
    std::vector<double> entries_;
};

/// (P_n f)_i = (1/h_i) int_{cell i} f, by `order`-point Gauss quadrature per cell.
GridFunction project_function(const std::function<double(double)>& f, const MeshPtr& mesh, std::size_t order = 8);

struct KernelProjectionOptions {
    std::size_t quadrature_order = 8;
    std::size_t dense_limit = kDefaultDenseLimit;
};

/// K_ij = (1/(h_i h_j)) int int_{cell i x cell j} K. Exact double antiderivatives
/// for the power law (the diagonal cells stay finite), tensor Gauss quadrature
/// for the other analytic variants.
DiscreteKernel project_kernel(const KernelSpec& k, const MeshPtr& mesh, const KernelProjectionOptions& opts = {});

/// (I_n u)(x).
double inject_eval(const GridFunction& u, double x);

/// L^q norm of I_n u: (sum h_i |u_i|^q)^(1/q), max |u_i| for q = inf.
double norm_lq(const GridFunction& u, double q);
double norm_lq(std::span<const double> values, std::span<const double> cell_sizes, double q);

/// L^{inf,q} norm of I_n K: max_i (sum_j h_j K_ij^q)^(1/q), q in {1, 2, inf}.
double matrix_norm_linf_q(const DiscreteKernel& k, double q);

/// Estimate of sup_{0<|z|<=h} (int |f(x+z) - f(x)|^q dx)^(1/q) over x, x+z in [0,1].
/// `samples` shifts in (0, h] (both signs) and `samples` panels in x.
double modulus_of_smoothness(const std::function<double(double)>& f, double h, double q, std::size_t samples = 64);

/// P_target I_source u: exact cell-overlap averaging. On nested meshes this is
/// an exact copy of values (refinement) or exact averaging (coarsening).
GridFunction transfer(const GridFunction& u, const MeshPtr& target);

/// CSV with a one-line header "n=<n>,layout=uniform" (or "layout=<x0;x1;...;xn>"),
/// then one "cell,value" row per cell (0-based cell index).
void write_csv(std::ostream& out, const GridFunction& u);
GridFunction read_grid_function_csv(std::istream& in);

/// Same header, then n rows of n comma-separated entries.
void write_csv(std::ostream& out, const DiscreteKernel& k);
DiscreteKernel read_discrete_kernel_csv(std::istream& in, std::size_t dense_limit = kDefaultDenseLimit);

/// Shortest round-trip decimal representation used by every text writer.
std::string format_double(double v);

}  // namespace nlplap
