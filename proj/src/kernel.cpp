#include "nlplap/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "nlplap/errors.hpp"
#include "nlplap/mesh.hpp"
#include "nlplap/quadrature.hpp"

namespace nlplap {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_q(double q) {
    if (!(q == 1.0 || q == 2.0 || std::isinf(q)))
        throw InvalidArgument("kernel norms support q in {1, 2, inf} only");
}

// sup over a grid of x of |a(x)|, and (int |a|^q)^(1/q).
double sup_abs(const std::function<double(double)>& a, std::size_t resolution) {
    double m = 0.0;
    for (std::size_t i = 0; i <= resolution; ++i)
        m = std::max(m, std::abs(a(static_cast<double>(i) / static_cast<double>(resolution))));
    return m;
}

double lq_norm_of(const std::function<double(double)>& a, double q, std::size_t resolution) {
    if (std::isinf(q)) return sup_abs(a, resolution);
    const std::size_t panels = std::max<std::size_t>(1, resolution / 8);
    const double integral = integrate([&](double x) { return std::pow(std::abs(a(x)), q); }, 0.0, 1.0, panels, 8);
    return std::pow(integral, 1.0 / q);
}

}  // namespace

double power_law_constant(double beta) { return 0.5 * (1.0 - beta) * (2.0 - beta); }

double power_law_row_integral(double beta, double x) {
    return 0.5 * (2.0 - beta) * (std::pow(x, 1.0 - beta) + std::pow(1.0 - x, 1.0 - beta));
}

KernelSpec KernelSpec::power_law(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("power-law kernel needs beta in (0, 1)");
    return KernelSpec(ConvolutionPowerLaw{beta});
}

KernelSpec KernelSpec::constant(double c) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("constant kernel needs a finite c >= 0");
    return KernelSpec(Constant{c});
}

KernelSpec KernelSpec::separable(std::string description, std::function<double(double)> a) {
    if (!a) throw InvalidArgument("separable kernel needs a profile a(x)");
    return KernelSpec(SeparableSmooth{std::move(description), std::move(a)});
}

KernelSpec KernelSpec::separable_linear(double slope) {
    if (!(slope > -1.0)) throw InvalidArgument("a(x) = 1 + slope*x must stay positive on [0,1]");
    return separable("1+" + format_double(slope) + "*x", [slope](double x) { return 1.0 + slope * x; });
}

KernelSpec KernelSpec::tabulated(std::shared_ptr<const DiscreteKernel> table) {
    if (!table) throw InvalidArgument("tabulated kernel needs a table");
    return KernelSpec(Tabulated{std::move(table)});
}

std::string KernelSpec::name() const {
    return std::visit(overloaded{
                          [](const ConvolutionPowerLaw& k) { return "power_law(beta=" + format_double(k.beta) + ")"; },
                          [](const Constant& k) { return "constant(c=" + format_double(k.c) + ")"; },
                          [](const SeparableSmooth& k) { return "separable(a=" + k.description + ")"; },
                          [](const Tabulated& k) { return "tabulated(n=" + std::to_string(k.table->size()) + ")"; },
                      },
                      variant_);
}

double KernelSpec::operator()(double x, double y) const {
    return std::visit(overloaded{
                          [&](const ConvolutionPowerLaw& k) {
                              const double z = std::abs(x - y);
                              if (z == 0.0) return kInfinity;
                              return power_law_constant(k.beta) * std::pow(z, -k.beta);
                          },
                          [](const Constant& k) { return k.c; },
                          // a(x)a(y) and a(y)a(x) are the same product
                          [&](const SeparableSmooth& k) { return k.a(x) * k.a(y); },
                          [&](const Tabulated& k) {
                              const auto& m = k.table->mesh();
                              return (*k.table)(m.cell_of(x), m.cell_of(y));
                          },
                      },
                      variant_);
}

double eval(const KernelSpec& k, double x, double y) { return k(x, y); }

double norm_linf_q(const KernelSpec& k, double q, std::size_t resolution) {
    check_q(q);
    if (resolution == 0) throw InvalidArgument("resolution must be positive");
    return std::visit(
        overloaded{
            [&](const ConvolutionPowerLaw& pl) -> double {
                if (std::isinf(q) || q * pl.beta >= 1.0)
                    throw DivergentNorm("power-law kernel has no L^{inf,q} norm for q*beta >= 1");
                // int_0^1 c^q |x-y|^(-q beta) dy = c^q (x^e + (1-x)^e)/e with e = 1 - q beta,
                // concave in x and symmetric about 1/2, so the sup sits at x = 1/2.
                const double e = 1.0 - q * pl.beta;
                const double c = power_law_constant(pl.beta);
                const double integral = std::pow(c, q) * 2.0 * std::pow(0.5, e) / e;
                return std::pow(integral, 1.0 / q);
            },
            [&](const Constant& c) -> double { return c.c; },
            [&](const SeparableSmooth& s) -> double {
                return sup_abs(s.a, resolution) * lq_norm_of(s.a, q, resolution);
            },
            [&](const Tabulated& t) -> double { return matrix_norm_linf_q(*t.table, q); },
        },
        k.variant());
}

double norm_l1(const KernelSpec& k, std::size_t resolution) {
    if (resolution == 0) throw InvalidArgument("resolution must be positive");
    return std::visit(overloaded{
                          [](const ConvolutionPowerLaw&) { return 1.0; },
                          [](const Constant& c) { return c.c; },
                          [&](const SeparableSmooth& s) {
                              const double m = lq_norm_of(s.a, 1.0, resolution);
                              return m * m;
                          },
                          [](const Tabulated& t) {
                              const auto& mesh = t.table->mesh();
                              double total = 0.0;
                              for (std::size_t i = 0; i < mesh.size(); ++i)
                                  for (std::size_t j = 0; j < mesh.size(); ++j)
                                      total += mesh.h(i) * mesh.h(j) * (*t.table)(i, j);
                              return total;
                          },
                      },
                      k.variant());
}

}  // namespace nlplap
