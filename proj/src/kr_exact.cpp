#include "triflow/kr_exact.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "triflow/quadrature.hpp"

namespace triflow {

std::vector<double> TriangularMap::eval(std::span<const double> x) const {
    std::vector<double> y(dim());
    for (int k = 0; k < dim(); ++k) y[k] = component(k, x);
    return y;
}

double TriangularMap::log_det_jacobian(std::span<const double> x) const {
    double acc = 0.0;
    for (int k = 0; k < dim(); ++k) {
        double dk = diag_partial(k, x);
        if (!(dk > 0.0)) throw MonotonicityError("log_det_jacobian: nonpositive diagonal");
        acc += std::log(dk);
    }
    return acc;
}

std::vector<double> invert_triangular_map(const TriangularMap& map, std::span<const double> y,
                                          double tol) {
    if (!(tol > 0.0)) throw ConfigError("invert_triangular_map: tol must be positive");
    const int d = map.dim();
    const SupportBox& in = map.support_in();
    std::vector<double> x(d, 0.0);
    for (int k = d - 1; k >= 0; --k) {
        double lo = in.lower[k], hi = in.upper[k];
        auto sk = [&](double t) {
            x[k] = t;
            return map.component(k, x);
        };
        double flo = sk(lo), fhi = sk(hi);
        const double slack = 1e-9 * (1.0 + std::abs(y[k]));
        if (y[k] < flo - slack || y[k] > fhi + slack)
            throw BracketError("invert_triangular_map: y outside image of component");
        double target = std::clamp(static_cast<double>(y[k]), flo, fhi);
        for (int it = 0; it < 200 && hi - lo > 1e-16 * (1.0 + std::abs(lo)); ++it) {
            double mid = 0.5 * (lo + hi);
            double v = sk(mid);
            if (std::abs(v - target) <= 0.25 * tol) {
                lo = hi = mid;
                break;
            }
            if (v < target)
                lo = mid;
            else
                hi = mid;
        }
        x[k] = 0.5 * (lo + hi);
    }
    return x;
}

double pushforward_density(const TriangularMap& map, const Density& g,
                           std::span<const double> x) {
    std::vector<double> y = map.eval(x);
    double logdet = map.log_det_jacobian(x);
    double lg = g.log_density(y);
    if (lg == kNegInf) return 0.0;
    return std::exp(lg + logdet);
}

// ---------------------------------------------------------------------------
// AffineGaussianKrMap
// ---------------------------------------------------------------------------

AffineGaussianKrMap::AffineGaussianKrMap(std::shared_ptr<const GaussianDensity> f,
                                         std::shared_ptr<const GaussianDensity> g)
    : f_(std::move(f)), g_(std::move(g)) {
    if (f_->dim() != 2 || g_->dim() != 2)
        throw ConfigError("gaussian_to_gaussian_kr: both densities must be 2-d");
    if (g_->rho() != 0.0 || g_->mean(0) != 0.0 || g_->mean(1) != 0.0 || g_->sigma(0) != 1.0 ||
        g_->sigma(1) != 1.0)
        throw ConfigError("gaussian_to_gaussian_kr: target must be the standard Gaussian");
    if (!(std::abs(f_->rho()) < 1.0)) throw ConfigError("gaussian_to_gaussian_kr: |rho| >= 1");
    scale0_ = 1.0 / (f_->sigma(0) * std::sqrt(1.0 - f_->rho() * f_->rho()));
    scale1_ = 1.0 / f_->sigma(1);
}

double AffineGaussianKrMap::component(int k, std::span<const double> x) const {
    if (k == 1) return (x[1] - f_->mean(1)) * scale1_;
    double shift = f_->rho() * (f_->sigma(0) / f_->sigma(1)) * (x[1] - f_->mean(1));
    return (x[0] - f_->mean(0) - shift) * scale0_;
}

double AffineGaussianKrMap::diag_partial(int k, std::span<const double>) const {
    return k == 1 ? scale1_ : scale0_;
}

std::shared_ptr<AffineGaussianKrMap> gaussian_to_gaussian_kr(
    std::shared_ptr<const GaussianDensity> f, std::shared_ptr<const GaussianDensity> g) {
    return std::make_shared<AffineGaussianKrMap>(std::move(f), std::move(g));
}

// ---------------------------------------------------------------------------
// RosenblattMap
// ---------------------------------------------------------------------------

RosenblattMap::RosenblattMap(DensityPtr f) : f_(std::move(f)), unit_(SupportBox::unit(f_->dim())) {}

double RosenblattMap::component(int k, std::span<const double> x) const {
    std::vector<double> xc(x.begin(), x.end());
    f_->support().clamp(xc);
    std::span<const double> tail(xc.data() + k + 1, static_cast<std::size_t>(dim() - k - 1));
    return f_->conditional_cdf(k, xc[k], tail);
}

double RosenblattMap::diag_partial(int k, std::span<const double> x) const {
    std::vector<double> xc(x.begin(), x.end());
    f_->support().clamp(xc);
    if (f_->has_closed_conditionals()) return std::exp(f_->conditional_log_density(k, xc));
    std::span<const double> tail(xc.data() + k + 1, static_cast<std::size_t>(dim() - k - 1));
    return f_->conditional_density_quadrature(k, xc[k], tail, 64);
}

std::shared_ptr<RosenblattMap> rosenblatt_transform(DensityPtr f) {
    return std::make_shared<RosenblattMap>(std::move(f));
}

// ---------------------------------------------------------------------------
// NumericalKrMap
// ---------------------------------------------------------------------------

namespace {
// Cubic Hermite on [x0,x1] with values y0,y1 and slopes m0,m1.
double hermite(double x, double x0, double x1, double y0, double y1, double m0, double m1) {
    double h = x1 - x0;
    double t = (x - x0) / h;
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1 +
           (t3 - t2) * h * m1;
}
double hermite_deriv(double x, double x0, double x1, double y0, double y1, double m0, double m1) {
    double h = x1 - x0;
    double t = (x - x0) / h;
    double t2 = t * t;
    return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * h * m0 + (-6 * t2 + 6 * t) * y1 +
            (3 * t2 - 2 * t) * h * m1) /
           h;
}
}  // namespace

double NumericalKrMap::MarginalTable::eval_cdf(double x) const {
    if (x <= t.front()) return 0.0;
    if (x >= t.back()) return 1.0;
    auto it = std::upper_bound(t.begin(), t.end(), x);
    std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
    double v = hermite(x, t[i], t[i + 1], cdf[i], cdf[i + 1], pdf[i], pdf[i + 1]);
    return std::clamp(v, cdf[i], cdf[i + 1]);
}

double NumericalKrMap::MarginalTable::eval_pdf(double x) const {
    double xc = std::clamp(x, t.front(), t.back());
    auto it = std::upper_bound(t.begin(), t.end(), xc);
    std::size_t i = std::min(t.size() - 2, static_cast<std::size_t>(std::max<std::ptrdiff_t>(
                                               0, (it - t.begin()) - 1)));
    return std::max(0.0, hermite_deriv(xc, t[i], t[i + 1], cdf[i], cdf[i + 1], pdf[i], pdf[i + 1]));
}

double NumericalKrMap::MarginalTable::inverse(double p, double tol) const {
    double pc = std::clamp(p, 0.0, 1.0);
    // Locate the panel by the cdf edges, then bisect inside it.
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pc);
    std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - cdf.begin()) - 1));
    if (i >= t.size() - 1) i = t.size() - 2;
    double lo = t[i], hi = t[i + 1];
    for (int iter = 0; iter < 100 && hi - lo > tol; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (eval_cdf(mid) < pc)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

NumericalKrMap::MarginalTable NumericalKrMap::build_marginal_table(const Density& den,
                                                                   int nodes) {
    const int d = den.dim();
    const SupportBox& box = den.support();
    const int last = d - 1;
    auto marg = [&](double t) -> double {
        if (d == 1) {
            std::array<double, 1> x{t};
            return den.density(x);
        }
        return integrate(
            [&](double s) {
                std::array<double, 2> x{s, t};
                return den.density(x);
            },
            box.lower[0], box.upper[0], nodes);
    };
    const int panels = 512;
    MarginalTable tab;
    tab.t.resize(panels + 1);
    tab.cdf.resize(panels + 1);
    tab.pdf.resize(panels + 1);
    double lo = box.lower[last], hi = box.upper[last];
    double h = (hi - lo) / panels;
    tab.t[0] = lo;
    tab.cdf[0] = 0.0;
    tab.pdf[0] = marg(lo);
    for (int i = 0; i < panels; ++i) {
        double a = lo + i * h, b = lo + (i + 1) * h;
        tab.t[i + 1] = b;
        tab.cdf[i + 1] = tab.cdf[i] + integrate(marg, a, b, 16);
        tab.pdf[i + 1] = marg(b);
    }
    double total = tab.cdf[panels];
    if (!(total > 0.0)) throw DomainError("numerical_kr: zero marginal mass");
    for (int i = 0; i <= panels; ++i) {
        tab.cdf[i] /= total;
        tab.pdf[i] /= total;
    }
    tab.cdf[panels] = 1.0;
    return tab;
}

NumericalKrMap::NumericalKrMap(DensityPtr f, DensityPtr g, int quad_nodes, double bisect_tol)
    : f_(std::move(f)), g_(std::move(g)), nodes_(quad_nodes), bisect_tol_(bisect_tol) {
    if (f_->dim() > 2) throw ConfigError("numerical_kr: restricted to d <= 2");
    if (f_->dim() != g_->dim()) throw ConfigError("numerical_kr: dimension mismatch");
    if (!(bisect_tol_ >= 1e-12)) throw ConfigError("numerical_kr: bisect_tol must be >= 1e-12");
    if (nodes_ < 16) throw ConfigError("numerical_kr: quad_nodes must be >= 16");
    f_last_ = build_marginal_table(*f_, nodes_);
    g_last_ = build_marginal_table(*g_, nodes_);
}

double NumericalKrMap::conditional_cdf_first(const Density& den, double x0, double x1) const {
    const SupportBox& box = den.support();
    auto joint = [&](double s) {
        std::array<double, 2> x{s, x1};
        return den.density(x);
    };
    double xc = std::clamp(x0, box.lower[0], box.upper[0]);
    double den_total = integrate(joint, box.lower[0], box.upper[0], nodes_);
    if (!(den_total > 0.0)) throw DomainError("numerical_kr: zero conditional mass");
    double num = integrate(joint, box.lower[0], xc, nodes_);
    return std::clamp(num / den_total, 0.0, 1.0);
}

double NumericalKrMap::conditional_density_first(const Density& den, double x0,
                                                 double x1) const {
    const SupportBox& box = den.support();
    auto joint = [&](double s) {
        std::array<double, 2> x{s, x1};
        return den.density(x);
    };
    double den_total = integrate(joint, box.lower[0], box.upper[0], nodes_);
    if (!(den_total > 0.0)) throw DomainError("numerical_kr: zero conditional mass");
    return joint(std::clamp(x0, box.lower[0], box.upper[0])) / den_total;
}

double NumericalKrMap::quantile_first(const Density& den, double p, double x1) const {
    const SupportBox& box = den.support();
    auto joint = [&](double s) {
        std::array<double, 2> x{s, x1};
        return den.density(x);
    };
    double total = integrate(joint, box.lower[0], box.upper[0], nodes_);
    if (!(total > 0.0)) throw BracketError("numerical_kr: quantile bracket has zero mass");
    double lo = box.lower[0], hi = box.upper[0];
    double target = std::clamp(p, 0.0, 1.0);
    for (int iter = 0; iter < 100 && hi - lo > bisect_tol_; ++iter) {
        double mid = 0.5 * (lo + hi);
        double c = integrate(joint, box.lower[0], mid, nodes_) / total;
        if (c < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double NumericalKrMap::component(int k, std::span<const double> x) const {
    const int d = dim();
    std::vector<double> xc(x.begin(), x.begin() + d);
    f_->support().clamp(xc);
    if (k == d - 1) {
        double p = f_last_.eval_cdf(xc[d - 1]);
        return g_last_.inverse(p, bisect_tol_);
    }
    // k == 0, d == 2
    double p = conditional_cdf_first(*f_, xc[0], xc[1]);
    double y1 = component(d - 1, xc);
    return quantile_first(*g_, p, y1);
}

double NumericalKrMap::diag_partial(int k, std::span<const double> x) const {
    const int d = dim();
    std::vector<double> xc(x.begin(), x.begin() + d);
    f_->support().clamp(xc);
    if (k == d - 1) {
        double num = f_last_.eval_pdf(xc[d - 1]);
        double y = component(k, xc);
        double den = g_last_.eval_pdf(y);
        if (!(den > 0.0)) throw MonotonicityError("numerical_kr: zero target marginal");
        return num / den;
    }
    double num = conditional_density_first(*f_, xc[0], xc[1]);
    double y1 = component(d - 1, xc);
    double y0 = component(0, xc);
    double den = conditional_density_first(*g_, y0, y1);
    if (!(den > 0.0)) throw MonotonicityError("numerical_kr: zero target conditional");
    return num / den;
}

std::shared_ptr<NumericalKrMap> numerical_kr(DensityPtr f, DensityPtr g, int quad_nodes,
                                             double bisect_tol) {
    return std::make_shared<NumericalKrMap>(std::move(f), std::move(g), quad_nodes, bisect_tol);
}

}  // namespace triflow
