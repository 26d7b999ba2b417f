#ifndef TRIFLOW_QUADRATURE_HPP_
#define TRIFLOW_QUADRATURE_HPP_

#include <functional>
#include <span>
#include <vector>

#include "triflow/common.hpp"

namespace triflow {

/// Gauss-Legendre rule on [-1,1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    int size() const { return static_cast<int>(nodes.size()); }
};

/// Nodes and weights for an n-point rule, computed by Newton iteration on
/// the Legendre recurrence and cached per order.  Thread-safe.
const GaussLegendre& gauss_legendre(int n);

/// \int_a^b fn(t) dt with an n-point rule.
double integrate(const std::function<double(double)>& fn, double a, double b, int n);

/// Tensor-product integral of fn over a 2-d box, n nodes per axis.
double integrate2d(const std::function<double(double, double)>& fn, const SupportBox& box,
                   int n);

/// Legendre polynomial values P_0..P_deg at xi in [-1,1].
void legendre_values(double xi, int deg, std::span<double> out);

/// Values and first derivatives of P_0..P_deg at xi.
void legendre_values_derivs(double xi, int deg, std::span<double> vals, std::span<double> derivs);

/// Standard normal cdf.
double normal_cdf(double x);

/// Standard normal quantile (Acklam's approximation plus one Halley step);
/// accurate to ~1e-15 on (0,1).
double normal_quantile(double p);

}  // namespace triflow

#endif  // TRIFLOW_QUADRATURE_HPP_
