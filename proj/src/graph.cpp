#include "nlplap/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include "json.hpp"
#include <ostream>
#include <sstream>

#include "nlplap/errors.hpp"
#include "nlplap/parallel.hpp"
#include "nlplap/rng.hpp"

namespace nlplap {

TruncatedWeights::TruncatedWeights(MeshPtr mesh, double rho, std::vector<double> entries)
    : mesh_(std::move(mesh)), rho_(rho), entries_(std::move(entries)) {
    if (!mesh_) throw InvalidArgument("truncated weights need a mesh");
    if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
    if (entries_.size() != size() * size()) throw MeshMismatch("truncated weights must be n x n");
}

DiscreteKernel TruncatedWeights::as_kernel(std::size_t dense_limit) const {
    return DiscreteKernel(mesh_, entries_, dense_limit);
}

TruncatedWeights truncate(const DiscreteKernel& k, double rho) {
    if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
    const double cap = 1.0 / rho;
    std::vector<double> e(k.entries().begin(), k.entries().end());
    for (auto& v : e) v = std::min(v, cap);
    return TruncatedWeights(k.mesh_ptr(), rho, std::move(e));
}

double truncation_defect(const DiscreteKernel& k, double rho) {
    const double cap = 1.0 / rho;
    const auto h = k.mesh().cell_sizes();
    double total = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
        for (std::size_t j = 0; j < k.size(); ++j) total += h[i] * h[j] * std::max(0.0, k(i, j) - cap);
    return total;
}

GraphSample::GraphSample(std::size_t n, double rho, std::uint64_t seed,
                         std::vector<std::pair<std::uint32_t, std::uint32_t>> edges)
    : n_(n), rho_(rho), seed_(seed), edges_(std::move(edges)) {
    if (n == 0) throw InvalidArgument("graph needs at least one vertex");
    if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
    for (auto& [i, j] : edges_) {
        if (i == j) throw InvalidArgument("self-loops are not stored");
        if (i >= n || j >= n) throw InvalidArgument("edge endpoint out of range");
        if (i > j) std::swap(i, j);
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) throw InvalidArgument("duplicate edge");

    std::vector<std::size_t> deg(n, 0);
    for (const auto& [i, j] : edges_) {
        ++deg[i];
        ++deg[j];
    }
    offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
    adjacency_.resize(offsets_[n]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    // edges are sorted by (i, j): pushing j into row i and i into row j keeps every row sorted
    for (const auto& [i, j] : edges_) adjacency_[fill[j]++] = i;
    for (const auto& [i, j] : edges_) adjacency_[fill[i]++] = j;
    for (std::size_t v = 0; v < n; ++v)
        std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
                  adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]));
}

SparseKernel GraphSample::operator_kernel() const {
    std::vector<double> values(adjacency_.size(), 1.0 / rho_);
    return SparseKernel(uniform_mesh(n_), offsets_, adjacency_, std::move(values));
}

GraphSample sample(const TruncatedWeights& w, double rho, std::uint64_t seed) {
    if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
    const std::size_t n = w.size();
    const Philox4x32 rng(mix64(seed));
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> rows(n);
    parallel_for(
        n,
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double prob = rho * w(i, j);
                    if (prob <= 0.0) continue;
                    if (rng.uniform(i, j) < prob)
                        rows[i].emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
                }
        },
        16);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (auto& r : rows) edges.insert(edges.end(), r.begin(), r.end());
    return GraphSample(n, rho, seed, std::move(edges));
}

GraphStats stats(const GraphSample& g) {
    GraphStats s;
    s.edge_count = g.edge_count();
    s.degrees.resize(g.size());
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        s.degrees[i] = g.degree(i);
        s.max_degree = std::max(s.max_degree, s.degrees[i]);
        total += static_cast<double>(s.degrees[i]);
    }
    s.mean_degree = total / static_cast<double>(g.size());
    return s;
}

double linf1_norm(const GraphSample& g) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < g.size(); ++i) best = std::max(best, g.degree(i));
    return static_cast<double>(best) / (g.rho() * static_cast<double>(g.size()));
}

void write_edge_list(std::ostream& out, const GraphSample& g) {
    out << g.size() << ' ' << format_double(g.rho()) << ' ' << g.seed() << '\n';
    for (const auto& [i, j] : g.edges()) out << i + 1 << ' ' << j + 1 << '\n';
}

GraphSample read_edge_list(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty edge list");
    std::istringstream header(line);
    std::size_t n = 0;
    double rho = 0.0;
    std::uint64_t seed = 0;
    if (!(header >> n >> rho >> seed)) throw ParseError("edge list header must read 'n rho seed'");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::istringstream row(line);
        long i = 0, j = 0;
        if (!(row >> i >> j) || i < 1 || j < 1 || static_cast<std::size_t>(i) > n || static_cast<std::size_t>(j) > n)
            throw ParseError("bad edge line: '" + line + "'");
        edges.emplace_back(static_cast<std::uint32_t>(i - 1), static_cast<std::uint32_t>(j - 1));
    }
    return GraphSample(n, rho, seed, std::move(edges));
}

std::string stats_json(const GraphSample& g) {
    const auto s = stats(g);
    nlohmann::ordered_json j;
    j["n"] = g.size();
    j["rho"] = g.rho();
    j["seed"] = g.seed();
    j["edge_count"] = s.edge_count;
    j["mean_degree"] = s.mean_degree;
    j["max_degree"] = s.max_degree;
    j["linf1_norm"] = linf1_norm(g);
    j["degrees"] = s.degrees;
    return j.dump(2);
}

}  // namespace nlplap
