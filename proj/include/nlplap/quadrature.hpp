#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace nlplap {

/// Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree 2*order-1.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Cached rule of the given order (1..64).
const GaussRule& gauss_legendre(std::size_t order);

/// Integral of f over [a, b] with `panels` equal sub-intervals of `order` points each.
double integrate(const std::function<double(double)>& f, double a, double b, std::size_t panels = 1,
                 std::size_t order = 8);

}  // namespace nlplap
