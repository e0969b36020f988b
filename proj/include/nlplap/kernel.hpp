#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <variant>

namespace nlplap {

class DiscreteKernel;

/// J(x - y) with J(z) = (1 - beta)(2 - beta)/2 * |z|^-beta, beta in (0, 1).
/// Integrable but unbounded on the diagonal; normalized so that its integral
/// over the unit square is 1.
struct ConvolutionPowerLaw {
    double beta;
};

struct Constant {
    double c;
};

/// K(x, y) = a(x) a(y) with a smooth and positive.
struct SeparableSmooth {
    std::string description;
    std::function<double(double)> a;
};

/// Piecewise-constant kernel given by a cell-averaged matrix on its mesh.
struct Tabulated {
    std::shared_ptr<const DiscreteKernel> table;
};

/// Symmetric nonnegative kernel on [0,1]^2. Immutable once built.
class KernelSpec {
public:
    using Variant = std::variant<ConvolutionPowerLaw, Constant, SeparableSmooth, Tabulated>;

    static KernelSpec power_law(double beta);
    static KernelSpec constant(double c);
    static KernelSpec separable(std::string description, std::function<double(double)> a);
    /// a(x) = 1 + slope * x, the default smooth kernel used by the rate studies.
    static KernelSpec separable_linear(double slope = 1.0);
    static KernelSpec tabulated(std::shared_ptr<const DiscreteKernel> table);

    const Variant& variant() const noexcept { return variant_; }
    std::string name() const;
    bool is_power_law() const noexcept { return std::holds_alternative<ConvolutionPowerLaw>(variant_); }

    /// K(x, y); +inf on the diagonal of the power-law kernel.
    double operator()(double x, double y) const;

private:
    explicit KernelSpec(Variant v) : variant_(std::move(v)) {}
    Variant variant_;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

double eval(const KernelSpec& k, double x, double y);

/// sup_x (int_0^1 |K(x,y)|^q dy)^(1/q) for q in {1, 2, inf}. Closed form for
/// the power-law, constant, and separable kernels; `resolution` sets the number
/// of sample points of x (and of the a(.) quadrature) otherwise.
/// Throws DivergentNorm when q*beta >= 1 for the power law.
double norm_linf_q(const KernelSpec& k, double q, std::size_t resolution = 4096);

/// int int K over the unit square.
double norm_l1(const KernelSpec& k, std::size_t resolution = 4096);

/// Normalization constant (1 - beta)(2 - beta)/2 of the power-law kernel.
double power_law_constant(double beta);

/// int_0^1 J(x - y) dy = (2 - beta)/2 * (x^(1-beta) + (1-x)^(1-beta)).
double power_law_row_integral(double beta, double x);

}  // namespace nlplap
