#include "nlplap/mesh.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "nlplap/errors.hpp"
#include "nlplap/parallel.hpp"
#include "nlplap/quadrature.hpp"

namespace nlplap {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double parse_double(std::string_view s) {
    std::string tmp(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tmp, &used);
    } catch (const std::exception&) {
        throw ParseError("not a number: '" + tmp + "'");
    }
    if (used != tmp.size()) throw ParseError("trailing characters in number: '" + tmp + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::string strip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
}

// Average of f over [a, b] by a normalized Gauss rule, written relative to the
// first node value so that constants are reproduced bit-exactly.
double cell_average(const std::function<double(double)>& f, double a, double b, const GaussRule& rule) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double ref = f(mid + half * rule.nodes[0]);
    double acc = 0.0;
    for (std::size_t q = 1; q < rule.nodes.size(); ++q)
        acc += 0.5 * rule.weights[q] * (f(mid + half * rule.nodes[q]) - ref);
    return ref + acc;
}

// c_beta * int_a^b int_c^d |x - y|^-beta dy dx via the double antiderivative |z|^(2-beta)/2.
double power_law_cell_integral(double beta, double a, double b, double c, double d) {
    const double e = 2.0 - beta;
    auto g = [e](double z) { return 0.5 * std::pow(std::abs(z), e); };
    return g(b - c) - g(a - c) - g(b - d) + g(a - d);
}

// Cell average of J on a uniform mesh for cells m = |i - j| apart, divided by h^-beta:
// int_{-1}^{1} (1 - |s|) c_beta |m + s|^-beta ds.
double power_law_offset_average(double beta, std::size_t m) {
    const double e = 2.0 - beta;
    const double md = static_cast<double>(m);
    if (m < 2) {
        // second difference of |z|^e / 2 at z = m; no cancellation issue this close
        return 0.5 * (std::pow(md + 1.0, e) - 2.0 * std::pow(md, e) + std::pow(std::abs(md - 1.0), e));
    }
    const auto& rule = gauss_legendre(12);
    const double c = power_law_constant(beta);
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double s = 0.5 * (rule.nodes[q] + 1.0);  // s in (0, 1)
        const double w = 0.5 * rule.weights[q] * (1.0 - s);
        acc += w * (std::pow(md + s, -beta) + std::pow(md - s, -beta));
    }
    return c * acc;
}

std::string header_of(const Mesh& m) {
    std::string out = "n=" + std::to_string(m.size()) + ",layout=";
    if (m.is_uniform()) return out + "uniform";
    const auto b = m.boundaries();
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (i) out += ';';
        out += format_double(b[i]);
    }
    return out;
}

MeshPtr mesh_from_header(const std::string& line) {
    const auto fields = split(strip(line), ',');
    if (fields.size() != 2 || fields[0].rfind("n=", 0) != 0 || fields[1].rfind("layout=", 0) != 0)
        throw ParseError("expected header 'n=<n>,layout=<...>', got '" + line + "'");
    const long n = std::stol(fields[0].substr(2));
    if (n < 1) throw ParseError("header n must be positive");
    const std::string layout = fields[1].substr(7);
    if (layout == "uniform") return uniform_mesh(static_cast<std::size_t>(n));
    std::vector<double> b;
    for (const auto& tok : split(layout, ';')) b.push_back(parse_double(tok));
    if (b.size() != static_cast<std::size_t>(n) + 1) throw ParseError("layout must list n+1 boundaries");
    return std::make_shared<const Mesh>(std::move(b));
}

}  // namespace

std::string format_double(double v) { return fmt::format("{}", v); }

Mesh::Mesh(std::vector<double> boundaries) : boundaries_(std::move(boundaries)) {
    if (boundaries_.size() < 2) throw InvalidArgument("mesh needs at least one cell");
    if (boundaries_.front() != 0.0 || boundaries_.back() != 1.0)
        throw InvalidArgument("mesh boundaries must start at 0 and end at 1");
    sizes_.resize(boundaries_.size() - 1);
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        sizes_[i] = boundaries_[i + 1] - boundaries_[i];
        if (!(sizes_[i] > 0.0)) throw InvalidArgument("mesh boundaries must be strictly increasing");
    }
    max_size_ = *std::max_element(sizes_.begin(), sizes_.end());
    const std::size_t n = sizes_.size();
    uniform_ = true;
    for (std::size_t i = 0; i <= n && uniform_; ++i)
        uniform_ = boundaries_[i] == static_cast<double>(i) / static_cast<double>(n);
}

std::size_t Mesh::cell_of(double x) const {
    if (x <= boundaries_.front()) return 0;
    if (x >= boundaries_.back()) return size() - 1;
    const auto it = std::lower_bound(boundaries_.begin() + 1, boundaries_.end(), x);
    return static_cast<std::size_t>(it - (boundaries_.begin() + 1));
}

MeshPtr uniform_mesh(std::size_t n) {
    if (n == 0) throw InvalidArgument("uniform mesh needs n >= 1");
    std::vector<double> b(n + 1);
    for (std::size_t i = 0; i <= n; ++i) b[i] = static_cast<double>(i) / static_cast<double>(n);
    return std::make_shared<const Mesh>(std::move(b));
}

bool same_mesh(const MeshPtr& a, const MeshPtr& b) { return a == b || (a && b && *a == *b); }

GridFunction::GridFunction(MeshPtr mesh, std::vector<double> values) : mesh_(std::move(mesh)), values_(std::move(values)) {
    if (!mesh_) throw InvalidArgument("grid function needs a mesh");
    if (values_.size() != mesh_->size()) throw MeshMismatch("grid function length differs from mesh size");
    for (double v : values_)
        if (!std::isfinite(v)) throw NonFiniteValue("grid function values must be finite");
}

GridFunction::GridFunction(MeshPtr mesh, double value)
    : GridFunction(mesh, std::vector<double>(mesh ? mesh->size() : 0, value)) {}

DiscreteKernel::DiscreteKernel(MeshPtr mesh, std::vector<double> entries, std::size_t dense_limit)
    : mesh_(std::move(mesh)), entries_(std::move(entries)) {
    if (!mesh_) throw InvalidArgument("discrete kernel needs a mesh");
    const std::size_t n = mesh_->size();
    if (n > dense_limit)
        throw DenseLimitExceeded("dense kernel of size " + std::to_string(n) + " exceeds the limit " +
                                 std::to_string(dense_limit));
    if (entries_.size() != n * n) throw MeshMismatch("kernel matrix must be n x n");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = entries_[i * n + j];
            if (!std::isfinite(v)) throw NonFiniteValue("kernel entries must be finite");
            if (v < 0.0) throw InvalidArgument("kernel entries must be nonnegative");
            if (j > i && v != entries_[j * n + i]) throw InvalidArgument("kernel matrix must be symmetric");
        }
}

GridFunction project_function(const std::function<double(double)>& f, const MeshPtr& mesh, std::size_t order) {
    const auto& rule = gauss_legendre(order);
    std::vector<double> v(mesh->size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = cell_average(f, mesh->left(i), mesh->right(i), rule);
        if (!std::isfinite(v[i])) throw NonFiniteValue("projection produced a non-finite cell average");
    }
    return GridFunction(mesh, std::move(v));
}

DiscreteKernel project_kernel(const KernelSpec& k, const MeshPtr& mesh, const KernelProjectionOptions& opts) {
    const std::size_t n = mesh->size();
    if (n > opts.dense_limit)
        throw DenseLimitExceeded("dense kernel of size " + std::to_string(n) + " exceeds the limit " +
                                 std::to_string(opts.dense_limit));
    std::vector<double> entries(n * n, 0.0);
    const auto& rule = gauss_legendre(opts.quadrature_order);

    std::visit(
        overloaded{
            [&](const ConvolutionPowerLaw& pl) {
                if (mesh->is_uniform()) {
                    const double scale = std::pow(static_cast<double>(n), pl.beta);  // h^-beta
                    std::vector<double> by_offset(n);
                    for (std::size_t m = 0; m < n; ++m) by_offset[m] = scale * power_law_offset_average(pl.beta, m);
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < n; ++j) entries[i * n + j] = by_offset[i > j ? i - j : j - i];
                    return;
                }
                const double c = power_law_constant(pl.beta);
                parallel_for(n, [&](std::size_t lo, std::size_t hi) {
                    for (std::size_t i = lo; i < hi; ++i)
                        for (std::size_t j = i; j < n; ++j) {
                            const double a = mesh->left(i), b = mesh->right(i);
                            const double cc = mesh->left(j), d = mesh->right(j);
                            const double gap = std::max(cc - b, a - d);
                            double integral;
                            if (gap >= std::max(mesh->h(i), mesh->h(j))) {
                                integral = 0.0;
                                for (std::size_t p = 0; p < rule.nodes.size(); ++p)
                                    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                                        const double x = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[p];
                                        const double y = 0.5 * (cc + d) + 0.5 * (d - cc) * rule.nodes[q];
                                        integral += rule.weights[p] * rule.weights[q] * c * std::pow(std::abs(x - y), -pl.beta);
                                    }
                                integral *= 0.25 * (b - a) * (d - cc);
                            } else {
                                integral = power_law_cell_integral(pl.beta, a, b, cc, d);
                            }
                            const double avg = integral / (mesh->h(i) * mesh->h(j));
                            entries[i * n + j] = avg;
                            entries[j * n + i] = avg;
                        }
                });
            },
            [&](const Constant& c) { std::fill(entries.begin(), entries.end(), c.c); },
            [&](const SeparableSmooth& sep) {
                // the tensor Gauss rule factorizes: K_ij = A_i A_j with A the per-cell Gauss average of a
                std::vector<double> avg(n);
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < rule.nodes.size(); ++p)
                        acc += 0.5 * rule.weights[p] * sep.a(mesh->center(i) + 0.5 * mesh->h(i) * rule.nodes[p]);
                    if (!std::isfinite(acc))
                        throw UnsupportedSingularity("kernel " + k.name() + " is singular on a quadrature node");
                    avg[i] = acc;
                }
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) entries[i * n + j] = avg[i] * avg[j];
            },
            [&](const Tabulated& t) {
                // exact overlap averaging of the piecewise-constant source table
                const auto& src = t.table->mesh();
                const std::size_t m = src.size();
                std::vector<std::vector<std::pair<std::size_t, double>>> overlap(n);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t s = src.cell_of(mesh->left(i)); s < m; ++s) {
                        const double len = std::min(mesh->right(i), src.right(s)) - std::max(mesh->left(i), src.left(s));
                        if (len > 0.0) overlap[i].emplace_back(s, len / mesh->h(i));
                        if (src.right(s) >= mesh->right(i)) break;
                    }
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = i; j < n; ++j) {
                        double acc = 0.0;
                        for (const auto& [a, wa] : overlap[i])
                            for (const auto& [b, wb] : overlap[j]) acc += wa * wb * (*t.table)(a, b);
                        entries[i * n + j] = acc;
                        entries[j * n + i] = acc;
                    }
            },
        },
        k.variant());
    return DiscreteKernel(mesh, std::move(entries), opts.dense_limit);
}

double inject_eval(const GridFunction& u, double x) { return u[u.mesh().cell_of(x)]; }

double norm_lq(std::span<const double> values, std::span<const double> cell_sizes, double q) {
    if (!(q >= 1.0)) throw InvalidArgument("norm exponent must be >= 1");
    if (std::isinf(q)) {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    std::vector<double> terms(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        terms[i] = cell_sizes[i] * (q == 2.0 ? values[i] * values[i] : std::pow(std::abs(values[i]), q));
    const double s = ordered_sum(terms);
    return q == 2.0 ? std::sqrt(s) : std::pow(s, 1.0 / q);
}

double norm_lq(const GridFunction& u, double q) { return norm_lq(u.values(), u.mesh().cell_sizes(), q); }

double matrix_norm_linf_q(const DiscreteKernel& k, double q) {
    if (!(q == 1.0 || q == 2.0 || std::isinf(q))) throw InvalidArgument("matrix norms support q in {1, 2, inf} only");
    const std::size_t n = k.size();
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = k.row(i);
        double v = 0.0;
        if (std::isinf(q)) {
            v = *std::max_element(row.begin(), row.end());
        } else {
            for (std::size_t j = 0; j < n; ++j) v += k.mesh().h(j) * (q == 1.0 ? row[j] : row[j] * row[j]);
            if (q == 2.0) v = std::sqrt(v);
        }
        best = std::max(best, v);
    }
    return best;
}

double modulus_of_smoothness(const std::function<double(double)>& f, double h, double q, std::size_t samples) {
    if (!(h > 0.0)) throw InvalidArgument("modulus of smoothness needs h > 0");
    if (!(q >= 1.0)) throw InvalidArgument("norm exponent must be >= 1");
    if (samples == 0) throw InvalidArgument("samples must be positive");
    // the integral for -z equals the one for +z after the substitution x -> x - z
    double best = 0.0;
    for (std::size_t k = 1; k <= samples; ++k) {
        const double z = std::min(h, 1.0) * static_cast<double>(k) / static_cast<double>(samples);
        if (z >= 1.0) continue;
        double value;
        if (std::isinf(q)) {
            value = 0.0;
            const std::size_t pts = 16 * samples;
            for (std::size_t i = 0; i <= pts; ++i) {
                const double x = (1.0 - z) * static_cast<double>(i) / static_cast<double>(pts);
                value = std::max(value, std::abs(f(x + z) - f(x)));
            }
        } else {
            const double integral =
                integrate([&](double x) { return std::pow(std::abs(f(x + z) - f(x)), q); }, 0.0, 1.0 - z, 4 * samples, 8);
            value = std::pow(integral, 1.0 / q);
        }
        best = std::max(best, value);
    }
    return best;
}

GridFunction transfer(const GridFunction& u, const MeshPtr& target) {
    const Mesh& src = u.mesh();
    std::vector<double> out(target->size(), 0.0);
    for (std::size_t i = 0; i < target->size(); ++i) {
        const double a = target->left(i), b = target->right(i);
        const std::size_t first = src.cell_of(a);
        if (src.left(first) <= a && src.right(first) >= b) {
            out[i] = u[first];
            continue;
        }
        double acc = 0.0;
        for (std::size_t s = first; s < src.size(); ++s) {
            const double len = std::min(b, src.right(s)) - std::max(a, src.left(s));
            if (len > 0.0) acc += len * u[s];
            if (src.right(s) >= b) break;
        }
        out[i] = acc / target->h(i);
    }
    return GridFunction(target, std::move(out));
}

void write_csv(std::ostream& out, const GridFunction& u) {
    out << header_of(u.mesh()) << '\n';
    for (std::size_t i = 0; i < u.size(); ++i) out << i << ',' << format_double(u[i]) << '\n';
}

GridFunction read_grid_function_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty grid function CSV");
    auto mesh = mesh_from_header(line);
    std::vector<double> v(mesh->size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::getline(in, line)) throw ParseError("grid function CSV ended early");
        const auto f = split(strip(line), ',');
        if (f.size() != 2 || std::stoul(f[0]) != i) throw ParseError("bad grid function row: '" + line + "'");
        v[i] = parse_double(f[1]);
    }
    return GridFunction(mesh, std::move(v));
}

void write_csv(std::ostream& out, const DiscreteKernel& k) {
    out << header_of(k.mesh()) << '\n';
    const std::size_t n = k.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) out << ',';
            out << format_double(k(i, j));
        }
        out << '\n';
    }
}

DiscreteKernel read_discrete_kernel_csv(std::istream& in, std::size_t dense_limit) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty kernel CSV");
    auto mesh = mesh_from_header(line);
    const std::size_t n = mesh->size();
    if (n > dense_limit) throw DenseLimitExceeded("kernel CSV exceeds the dense limit");
    std::vector<double> e;
    e.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw ParseError("kernel CSV ended early");
        const auto f = split(strip(line), ',');
        if (f.size() != n) throw ParseError("kernel CSV row " + std::to_string(i) + " has wrong length");
        for (const auto& tok : f) e.push_back(parse_double(tok));
    }
    return DiscreteKernel(mesh, std::move(e), dense_limit);
}

}  // namespace nlplap
