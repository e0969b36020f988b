#include "nlplap/quadrature.hpp"

#include <array>
#include <cmath>
#include <mutex>
#include <numbers>

#include "nlplap/errors.hpp"

namespace nlplap {
namespace {

constexpr std::size_t kMaxOrder = 64;

GaussRule build_rule(std::size_t order) {
    GaussRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    // Newton iteration on P_order from the Chebyshev-like initial guess.
    for (std::size_t i = 0; i < (order + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(order) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t k = 2; k <= order; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            if (order == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = static_cast<double>(order) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t k = 2; k <= order; ++k) {
            const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
            p0 = p1;
            p1 = pk;
        }
        dp = order == 1 ? 1.0 : static_cast<double>(order) * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
    if (order == 1) rule.weights[0] = 2.0;
    return rule;
}

}  // namespace

const GaussRule& gauss_legendre(std::size_t order) {
    if (order == 0 || order > kMaxOrder) throw InvalidArgument("Gauss-Legendre order must be in [1, 64]");
    static std::array<GaussRule, kMaxOrder + 1> cache;
    static std::array<std::once_flag, kMaxOrder + 1> once;
    std::call_once(once[order], [order] { cache[order] = build_rule(order); });
    return cache[order];
}

double integrate(const std::function<double(double)>& f, double a, double b, std::size_t panels,
                 std::size_t order) {
    const auto& rule = gauss_legendre(order);
    const double width = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t k = 0; k < panels; ++k) {
        const double lo = a + width * static_cast<double>(k);
        const double mid = lo + 0.5 * width;
        double s = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) s += rule.weights[q] * f(mid + 0.5 * width * rule.nodes[q]);
        total += 0.5 * width * s;
    }
    return total;
}

}  // namespace nlplap
