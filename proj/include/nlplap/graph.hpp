#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlplap/mesh.hpp"
#include "nlplap/plaplacian.hpp"

namespace nlplap {

/// min(K_ij, 1/rho), the edge weights whose rho-multiples are edge probabilities.
class TruncatedWeights {
public:
    TruncatedWeights(MeshPtr mesh, double rho, std::vector<double> entries);

    const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
    std::size_t size() const noexcept { return mesh_->size(); }
    double rho() const noexcept { return rho_; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * size() + j]; }
    std::span<const double> entries() const noexcept { return entries_; }

    /// The weights as a (dense) discrete kernel on the same mesh.
    DiscreteKernel as_kernel(std::size_t dense_limit = kDefaultDenseLimit) const;

private:
    MeshPtr mesh_;
    double rho_;
    std::vector<double> entries_;
};

TruncatedWeights truncate(const DiscreteKernel& k, double rho);

/// L^1 distance between I K-hat and I K: sum_ij h_i h_j (K_ij - 1/rho)_+.
double truncation_defect(const DiscreteKernel& k, double rho);

/// Simple undirected graph on n vertices (no self-loops). Each present edge
/// carries the implied weight 1/rho.
class GraphSample {
public:
    GraphSample(std::size_t n, double rho, std::uint64_t seed, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges);

    std::size_t size() const noexcept { return n_; }
    double rho() const noexcept { return rho_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    /// Edges (i, j), i < j, in lexicographic order (0-based).
    std::span<const std::pair<std::uint32_t, std::uint32_t>> edges() const noexcept { return edges_; }
    std::span<const std::uint32_t> neighbors(std::size_t i) const {
        return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }

    /// Weighted adjacency Lambda_ij = 1/rho on edges, on the uniform mesh of size n.
    SparseKernel operator_kernel() const;

    friend bool operator==(const GraphSample& a, const GraphSample& b) {
        return a.n_ == b.n_ && a.rho_ == b.rho_ && a.seed_ == b.seed_ && a.edges_ == b.edges_;
    }

private:
    std::size_t n_;
    double rho_;
    std::uint64_t seed_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> adjacency_;
};

/// Includes each pair i < j independently with probability rho * W_ij. The
/// uniform draw for a pair is a pure function of (seed, i, j), so the result
/// does not depend on the thread count.
GraphSample sample(const TruncatedWeights& w, double rho, std::uint64_t seed);

struct GraphStats {
    std::size_t edge_count = 0;
    std::vector<std::size_t> degrees;
    double mean_degree = 0.0;
    std::size_t max_degree = 0;
};

GraphStats stats(const GraphSample& g);

/// L^{inf,1} norm of the injected weighted adjacency: max_i deg(i) / (rho n).
double linf1_norm(const GraphSample& g);

/// "n rho seed" header, then one "i j" line per edge with 1-based indices.
void write_edge_list(std::ostream& out, const GraphSample& g);
GraphSample read_edge_list(std::istream& in);

/// Statistics as a JSON document (edge count, mean/max degree, L^{inf,1} norm, degrees).
std::string stats_json(const GraphSample& g);

}  // namespace nlplap
