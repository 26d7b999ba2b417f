#include "triflow/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace triflow {

namespace {

GaussLegendre compute_rule(int n) {
    GaussLegendre rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double pi = 3.14159265358979323846264338328;
    // Symmetric rule: solve for the positive half and mirror.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            // Recurrence for P_n(x) and its derivative.
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

}  // namespace

const GaussLegendre& gauss_legendre(int n) {
    if (n < 1) throw ConfigError("gauss_legendre: order must be >= 1");
    static std::map<int, GaussLegendre> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_rule(n)).first;
    return it->second;
}

double integrate(const std::function<double(double)>& fn, double a, double b, int n) {
    const GaussLegendre& rule = gauss_legendre(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (int q = 0; q < n; ++q) acc += rule.weights[q] * fn(mid + half * rule.nodes[q]);
    return half * acc;
}

double integrate2d(const std::function<double(double, double)>& fn, const SupportBox& box,
                   int n) {
    if (box.dim() != 2) throw ConfigError("integrate2d: box must be 2-d");
    const GaussLegendre& rule = gauss_legendre(n);
    const double mid0 = 0.5 * (box.lower[0] + box.upper[0]);
    const double half0 = 0.5 * box.width(0);
    const double mid1 = 0.5 * (box.lower[1] + box.upper[1]);
    const double half1 = 0.5 * box.width(1);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double xi = mid0 + half0 * rule.nodes[i];
        double inner = 0.0;
        for (int j = 0; j < n; ++j)
            inner += rule.weights[j] * fn(xi, mid1 + half1 * rule.nodes[j]);
        acc += rule.weights[i] * inner;
    }
    return half0 * half1 * acc;
}

void legendre_values(double xi, int deg, std::span<double> out) {
    out[0] = 1.0;
    if (deg >= 1) out[1] = xi;
    for (int j = 2; j <= deg; ++j)
        out[j] = ((2.0 * j - 1.0) * xi * out[j - 1] - (j - 1.0) * out[j - 2]) / j;
}

void legendre_values_derivs(double xi, int deg, std::span<double> vals,
                            std::span<double> derivs) {
    legendre_values(xi, deg, vals);
    derivs[0] = 0.0;
    if (deg >= 1) derivs[1] = 1.0;
    for (int j = 2; j <= deg; ++j)
        derivs[j] = derivs[j - 2] + (2.0 * j - 1.0) * vals[j - 1];
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return kNegInf;
        if (p == 1.0) return kPosInf;
        throw DomainError("normal_quantile: p outside [0,1]");
    }
    // Acklam's rational approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley refinement against the exact cdf.
    const double sqrt2pi = 2.50662827463100050241576528481;
    double e = normal_cdf(x) - p;
    double u = e * sqrt2pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace triflow
