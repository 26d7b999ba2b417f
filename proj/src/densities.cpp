#include "triflow/densities.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "triflow/quadrature.hpp"

namespace triflow {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double normal_logpdf(double x, double mu, double sd) {
    double z = (x - mu) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * kLogTwoPi;
}

double logsumexp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}
}  // namespace

// ---------------------------------------------------------------------------
// Density base: quadrature fallbacks
// ---------------------------------------------------------------------------

double Density::density(std::span<const double> x) const {
    if (!support().contains(x)) return 0.0;
    double ld;
    try {
        ld = log_density(x);
    } catch (const DomainError&) {
        return 0.0;
    }
    return ld == kNegInf ? 0.0 : std::exp(ld);
}

double Density::conditional_density_quadrature(int k, double xk, std::span<const double> tail,
                                               int nodes) const {
    check_index(k);
    const int d = dim();
    if (d > 2) throw UnsupportedError("quadrature conditionals limited to d <= 2");
    const SupportBox& box = support();
    if (d == 1) {
        std::array<double, 1> x{xk};
        return density(x);
    }
    // d == 2
    if (k == 1) {
        // marginal of the last coordinate, normalized over the box
        auto marg = [&](double t) {
            return integrate(
                [&](double s) {
                    std::array<double, 2> x{s, t};
                    return density(x);
                },
                box.lower[0], box.upper[0], nodes);
        };
        double total = integrate(marg, box.lower[1], box.upper[1], nodes);
        return marg(xk) / total;
    }
    // k == 0: conditional given x1 = tail[0]
    auto joint = [&](double s) {
        std::array<double, 2> x{s, tail[0]};
        return density(x);
    };
    double denom = integrate(joint, box.lower[0], box.upper[0], nodes);
    if (denom <= 0.0) throw DomainError("conditional density: zero tail marginal");
    return joint(xk) / denom;
}

double Density::conditional_cdf_quadrature(int k, double xk, std::span<const double> tail,
                                           int nodes) const {
    check_index(k);
    const int d = dim();
    if (d > 2) throw UnsupportedError("quadrature conditionals limited to d <= 2");
    const SupportBox& box = support();
    double lo = box.lower[k], hi = box.upper[k];
    double x = std::clamp(xk, lo, hi);
    double num, den;
    if (d == 1) {
        auto f = [&](double t) {
            std::array<double, 1> p{t};
            return density(p);
        };
        num = integrate(f, lo, x, nodes);
        den = integrate(f, lo, hi, nodes);
    } else if (k == 1) {
        auto marg = [&](double t) {
            return integrate(
                [&](double s) {
                    std::array<double, 2> p{s, t};
                    return density(p);
                },
                box.lower[0], box.upper[0], nodes);
        };
        num = integrate(marg, lo, x, nodes);
        den = integrate(marg, lo, hi, nodes);
    } else {
        auto joint = [&](double s) {
            std::array<double, 2> p{s, tail[0]};
            return density(p);
        };
        num = integrate(joint, lo, x, nodes);
        den = integrate(joint, lo, hi, nodes);
    }
    if (den <= 0.0) throw DomainError("conditional cdf: zero normalization");
    // Clamp to [0,1] to absorb quadrature roundoff.
    return std::clamp(num / den, 0.0, 1.0);
}

double Density::conditional_cdf(int k, double xk, std::span<const double> tail) const {
    return conditional_cdf_quadrature(k, xk, tail, 64);
}

double Density::conditional_log_density(int k, std::span<const double>) const {
    check_index(k);
    throw UnsupportedError("conditional_log_density: no closed form for kind " + label());
}

double quadrature_normalization(const Density& den, int nodes_per_axis) {
    if (nodes_per_axis < 16) throw ConfigError("quadrature_normalization: need >= 16 nodes");
    const int d = den.dim();
    if (d == 1) {
        return integrate(
            [&](double t) {
                std::array<double, 1> x{t};
                return den.density(x);
            },
            den.support().lower[0], den.support().upper[0], nodes_per_axis);
    }
    if (d == 2) {
        return integrate2d(
            [&](double a, double b) {
                std::array<double, 2> x{a, b};
                return den.density(x);
            },
            den.support(), nodes_per_axis);
    }
    throw UnsupportedError("quadrature_normalization: d > 2");
}

// ---------------------------------------------------------------------------
// GaussianDensity
// ---------------------------------------------------------------------------

GaussianDensity::GaussianDensity(std::vector<double> mean, std::vector<double> sigma, double rho)
    : mean_(std::move(mean)),
      sigma_(std::move(sigma)),
      rho_(rho),
      smoothness_(std::vector<int>(mean_.size(), 9)) {
    const int d = static_cast<int>(mean_.size());
    if (d < 1 || sigma_.size() != mean_.size())
        throw ConfigError("gaussian: mean/sigma size mismatch");
    for (double s : sigma_)
        if (!(s > 0.0)) throw ConfigError("gaussian: sigma must be positive");
    if (rho_ != 0.0 && d != 2) throw ConfigError("gaussian: rho requires d == 2");
    if (!(std::abs(rho_) < 1.0)) throw ConfigError("gaussian: |rho| must be < 1");
    std::vector<double> lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
        lo[k] = mean_[k] - 6.0 * sigma_[k];
        hi[k] = mean_[k] + 6.0 * sigma_[k];
    }
    support_ = SupportBox(std::move(lo), std::move(hi));
}

std::shared_ptr<GaussianDensity> GaussianDensity::standard(int d) {
    return std::make_shared<GaussianDensity>(std::vector<double>(d, 0.0),
                                             std::vector<double>(d, 1.0), 0.0);
}

std::string GaussianDensity::label() const {
    std::ostringstream os;
    os << "gaussian";
    if (rho_ != 0.0) os << "-rho" << rho_;
    return os.str();
}

double GaussianDensity::cond_mean0(double x1) const {
    return mean_[0] + rho_ * (sigma_[0] / sigma_[1]) * (x1 - mean_[1]);
}
double GaussianDensity::cond_sd0() const { return sigma_[0] * std::sqrt(1.0 - rho_ * rho_); }

double GaussianDensity::log_density(std::span<const double> x) const {
    if (!support_.contains(x)) return kNegInf;
    const int d = dim();
    if (d == 2 && rho_ != 0.0) {
        double z0 = (x[0] - mean_[0]) / sigma_[0];
        double z1 = (x[1] - mean_[1]) / sigma_[1];
        double q = (z0 * z0 - 2.0 * rho_ * z0 * z1 + z1 * z1) / (1.0 - rho_ * rho_);
        return -0.5 * q - std::log(kTwoPi * sigma_[0] * sigma_[1] * std::sqrt(1.0 - rho_ * rho_));
    }
    double acc = 0.0;
    for (int k = 0; k < d; ++k) acc += normal_logpdf(x[k], mean_[k], sigma_[k]);
    return acc;
}

std::vector<double> GaussianDensity::grad_log_density(std::span<const double> x) const {
    if (!support_.contains(x, 1e-12)) throw SupportError("grad_log_density: x outside support");
    const int d = dim();
    std::vector<double> g(d);
    if (d == 2 && rho_ != 0.0) {
        double z0 = (x[0] - mean_[0]) / sigma_[0];
        double z1 = (x[1] - mean_[1]) / sigma_[1];
        double c = 1.0 / (1.0 - rho_ * rho_);
        g[0] = -c * (z0 - rho_ * z1) / sigma_[0];
        g[1] = -c * (z1 - rho_ * z0) / sigma_[1];
        return g;
    }
    for (int k = 0; k < d; ++k) g[k] = -(x[k] - mean_[k]) / (sigma_[k] * sigma_[k]);
    return g;
}

Matrix GaussianDensity::sample(int n, SeedSpec seed) const {
    if (n < 1) throw ConfigError("sample: n must be >= 1");
    const int d = dim();
    Matrix out(n, d);
    Rng rng(seed);
    std::vector<double> x(d);
    for (int i = 0; i < n; ++i) {
        for (;;) {
            if (d == 2 && rho_ != 0.0) {
                double z1 = rng.normal();
                double z0 = rng.normal();
                x[1] = mean_[1] + sigma_[1] * z1;
                x[0] = mean_[0] + sigma_[0] * (rho_ * z1 + std::sqrt(1.0 - rho_ * rho_) * z0);
            } else {
                for (int k = 0; k < d; ++k) x[k] = mean_[k] + sigma_[k] * rng.normal();
            }
            if (support_.contains(x)) break;  // 6-sigma rejection, ~never taken
        }
        for (int k = 0; k < d; ++k) out(i, k) = x[k];
    }
    return out;
}

double GaussianDensity::conditional_cdf(int k, double xk, std::span<const double> tail) const {
    check_index(k);
    const int d = dim();
    if (d == 2 && rho_ != 0.0) {
        if (k == 1) return normal_cdf((xk - mean_[1]) / sigma_[1]);
        return normal_cdf((xk - cond_mean0(tail[0])) / cond_sd0());
    }
    return normal_cdf((xk - mean_[k]) / sigma_[k]);
}

double GaussianDensity::conditional_log_density(int k, std::span<const double> x) const {
    check_index(k);
    const int d = dim();
    if (d == 2 && rho_ != 0.0) {
        if (k == 1) return normal_logpdf(x[1], mean_[1], sigma_[1]);
        return normal_logpdf(x[0], cond_mean0(x[1]), cond_sd0());
    }
    return normal_logpdf(x[k], mean_[k], sigma_[k]);
}

// ---------------------------------------------------------------------------
// GaussianMixtureDensity
// ---------------------------------------------------------------------------

GaussianMixtureDensity::GaussianMixtureDensity(std::vector<GaussianComponent> components,
                                               std::string label)
    : comps_(std::move(components)),
      dim_(0),
      smoothness_({std::vector<int>{9}}),
      label_(std::move(label)) {
    if (comps_.empty()) throw ConfigError("mixture: no components");
    dim_ = static_cast<int>(comps_[0].mean.size());
    double wsum = 0.0;
    for (auto& c : comps_) {
        if (static_cast<int>(c.mean.size()) != dim_ || c.sigma.size() != c.mean.size())
            throw ConfigError("mixture: inconsistent component shape");
        if (!(c.weight > 0.0)) throw ConfigError("mixture: weights must be positive");
        if (c.rho != 0.0 && dim_ != 2) throw ConfigError("mixture: rho requires d == 2");
        if (!(std::abs(c.rho) < 1.0)) throw ConfigError("mixture: |rho| must be < 1");
        wsum += c.weight;
    }
    for (auto& c : comps_) c.weight /= wsum;
    std::vector<double> lo(dim_, kPosInf), hi(dim_, kNegInf);
    for (const auto& c : comps_)
        for (int k = 0; k < dim_; ++k) {
            lo[k] = std::min(lo[k], c.mean[k] - 6.0 * c.sigma[k]);
            hi[k] = std::max(hi[k], c.mean[k] + 6.0 * c.sigma[k]);
        }
    support_ = SupportBox(std::move(lo), std::move(hi));
    smoothness_ = SmoothnessProfile(std::vector<int>(dim_, 9));
}

std::shared_ptr<GaussianMixtureDensity> GaussianMixtureDensity::ring(int count, double radius,
                                                                     double sigma,
                                                                     const std::string& label) {
    std::vector<GaussianComponent> comps;
    const double pi = 3.14159265358979323846264338328;
    for (int i = 0; i < count; ++i) {
        double ang = 2.0 * pi * i / count;
        GaussianComponent c;
        c.weight = 1.0;
        c.mean = {radius * std::cos(ang), radius * std::sin(ang)};
        c.sigma = {sigma, sigma};
        comps.push_back(std::move(c));
    }
    return std::make_shared<GaussianMixtureDensity>(std::move(comps), label);
}

double GaussianMixtureDensity::component_tail_logpdf(int i, int k,
                                                     std::span<const double> x) const {
    const auto& c = comps_[i];
    const int d = dim_;
    if (d == 2 && c.rho != 0.0 && k == 0) {
        // joint bivariate logpdf
        double z0 = (x[0] - c.mean[0]) / c.sigma[0];
        double z1 = (x[1] - c.mean[1]) / c.sigma[1];
        double q = (z0 * z0 - 2.0 * c.rho * z0 * z1 + z1 * z1) / (1.0 - c.rho * c.rho);
        return -0.5 * q -
               std::log(kTwoPi * c.sigma[0] * c.sigma[1] * std::sqrt(1.0 - c.rho * c.rho));
    }
    double acc = 0.0;
    for (int j = k; j < d; ++j) acc += normal_logpdf(x[j], c.mean[j], c.sigma[j]);
    return acc;
}

double GaussianMixtureDensity::log_density(std::span<const double> x) const {
    if (!support_.contains(x)) return kNegInf;
    std::vector<double> terms(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i)
        terms[i] = std::log(comps_[i].weight) + component_tail_logpdf(static_cast<int>(i), 0, x);
    return logsumexp(terms);
}

std::vector<double> GaussianMixtureDensity::grad_log_density(std::span<const double> x) const {
    if (!support_.contains(x, 1e-12)) throw SupportError("grad_log_density: x outside support");
    const int d = dim_;
    std::vector<double> g(d, 0.0);
    std::vector<double> lp(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i)
        lp[i] = std::log(comps_[i].weight) + component_tail_logpdf(static_cast<int>(i), 0, x);
    double lz = logsumexp(lp);
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        const auto& c = comps_[i];
        double w = std::exp(lp[i] - lz);
        if (d == 2 && c.rho != 0.0) {
            double z0 = (x[0] - c.mean[0]) / c.sigma[0];
            double z1 = (x[1] - c.mean[1]) / c.sigma[1];
            double cc = 1.0 / (1.0 - c.rho * c.rho);
            g[0] += w * (-cc * (z0 - c.rho * z1) / c.sigma[0]);
            g[1] += w * (-cc * (z1 - c.rho * z0) / c.sigma[1]);
        } else {
            for (int k = 0; k < d; ++k)
                g[k] += w * (-(x[k] - c.mean[k]) / (c.sigma[k] * c.sigma[k]));
        }
    }
    return g;
}

Matrix GaussianMixtureDensity::sample(int n, SeedSpec seed) const {
    if (n < 1) throw ConfigError("sample: n must be >= 1");
    const int d = dim_;
    Matrix out(n, d);
    Rng rng(seed);
    std::vector<double> w(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i) w[i] = comps_[i].weight;
    std::vector<double> x(d);
    for (int i = 0; i < n; ++i) {
        for (;;) {
            const auto& c = comps_[rng.categorical(w.data(), static_cast<int>(w.size()))];
            if (d == 2 && c.rho != 0.0) {
                double z1 = rng.normal();
                double z0 = rng.normal();
                x[1] = c.mean[1] + c.sigma[1] * z1;
                x[0] = c.mean[0] + c.sigma[0] * (c.rho * z1 + std::sqrt(1.0 - c.rho * c.rho) * z0);
            } else {
                for (int k = 0; k < d; ++k) x[k] = c.mean[k] + c.sigma[k] * rng.normal();
            }
            if (support_.contains(x)) break;
        }
        for (int k = 0; k < d; ++k) out(i, k) = x[k];
    }
    return out;
}

double GaussianMixtureDensity::conditional_cdf(int k, double xk,
                                               std::span<const double> tail) const {
    check_index(k);
    const int d = dim_;
    // Posterior component weights given the tail, then a weighted cdf.
    std::vector<double> lw(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        const auto& c = comps_[i];
        double acc = std::log(c.weight);
        for (int j = k + 1; j < d; ++j)
            acc += normal_logpdf(tail[j - k - 1], c.mean[j], c.sigma[j]);
        lw[i] = acc;
    }
    double lz = logsumexp(lw);
    double cdf = 0.0;
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        const auto& c = comps_[i];
        double w = std::exp(lw[i] - lz);
        double mu = c.mean[k], sd = c.sigma[k];
        if (d == 2 && c.rho != 0.0 && k == 0) {
            mu = c.mean[0] + c.rho * (c.sigma[0] / c.sigma[1]) * (tail[0] - c.mean[1]);
            sd = c.sigma[0] * std::sqrt(1.0 - c.rho * c.rho);
        }
        cdf += w * normal_cdf((xk - mu) / sd);
    }
    return std::clamp(cdf, 0.0, 1.0);
}

double GaussianMixtureDensity::conditional_log_density(int k, std::span<const double> x) const {
    check_index(k);
    // ln of marginal over (k..d-1) minus ln of marginal over (k+1..d-1).
    std::vector<double> num(comps_.size()), den(comps_.size());
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        num[i] = std::log(comps_[i].weight) + component_tail_logpdf(static_cast<int>(i), k, x);
        den[i] = std::log(comps_[i].weight) +
                 component_tail_logpdf(static_cast<int>(i), k + 1, x);
    }
    if (k + 1 >= dim_) return logsumexp(num);
    return logsumexp(num) - logsumexp(den);
}

// ---------------------------------------------------------------------------
// BananaDensity
// ---------------------------------------------------------------------------

BananaDensity::BananaDensity(SupportBox box)
    : support_(std::move(box)), smoothness_({std::vector<int>{1, 2}}), log_mass_(0.0) {
    if (support_.dim() != 2) throw ConfigError("banana: support must be 2-d");
    // Renormalize by the box mass so the truncated density integrates to 1.
    auto raw = [&](double x0, double x1) {
        double m = 0.5 * x1 * x1;
        return std::exp(normal_logpdf(x1, 0.0, 1.0) +
                        normal_logpdf(x0, m, 0.70710678118654752440));
    };
    double mass = integrate2d(raw, support_, 200);
    log_mass_ = std::log(mass);
}

double BananaDensity::log_density(std::span<const double> x) const {
    if (!support_.contains(x)) return kNegInf;
    double m = 0.5 * x[1] * x[1];
    return normal_logpdf(x[1], 0.0, 1.0) + normal_logpdf(x[0], m, 0.70710678118654752440) -
           log_mass_;
}

std::vector<double> BananaDensity::grad_log_density(std::span<const double> x) const {
    if (!support_.contains(x, 1e-12)) throw SupportError("grad_log_density: x outside support");
    double r = x[0] - 0.5 * x[1] * x[1];
    // log f = -r^2 - x1^2/2 + const
    return {-2.0 * r, 2.0 * r * x[1] - x[1]};
}

Matrix BananaDensity::sample(int n, SeedSpec seed) const {
    if (n < 1) throw ConfigError("sample: n must be >= 1");
    Matrix out(n, 2);
    Rng rng(seed);
    std::vector<double> x(2);
    for (int i = 0; i < n; ++i) {
        for (;;) {
            x[1] = rng.normal();
            x[0] = 0.5 * x[1] * x[1] + 0.70710678118654752440 * rng.normal();
            if (support_.contains(x)) break;
        }
        out(i, 0) = x[0];
        out(i, 1) = x[1];
    }
    return out;
}

double BananaDensity::cond_weight0(double x1) const {
    double m = 0.5 * x1 * x1;
    const double s = 0.70710678118654752440;
    return normal_cdf((support_.upper[0] - m) / s) - normal_cdf((support_.lower[0] - m) / s);
}

double BananaDensity::conditional_cdf(int k, double xk, std::span<const double> tail) const {
    check_index(k);
    if (k == 0) {
        double m = 0.5 * tail[0] * tail[0];
        const double s = 0.70710678118654752440;
        double w = cond_weight0(tail[0]);
        double v = (normal_cdf((xk - m) / s) - normal_cdf((support_.lower[0] - m) / s)) / w;
        return std::clamp(v, 0.0, 1.0);
    }
    // Marginal of x1 carries the conditional box weight; integrate it.
    auto marg = [&](double t) { return std::exp(normal_logpdf(t, 0.0, 1.0)) * cond_weight0(t); };
    double num = integrate(marg, support_.lower[1], std::clamp(xk, support_.lower[1], support_.upper[1]), 96);
    double den = integrate(marg, support_.lower[1], support_.upper[1], 96);
    return std::clamp(num / den, 0.0, 1.0);
}

double BananaDensity::conditional_log_density(int k, std::span<const double> x) const {
    check_index(k);
    double m = 0.5 * x[1] * x[1];
    const double s = 0.70710678118654752440;
    if (k == 0) return normal_logpdf(x[0], m, s) - std::log(cond_weight0(x[1]));
    return normal_logpdf(x[1], 0.0, 1.0) + std::log(cond_weight0(x[1])) - log_mass_;
}

// ---------------------------------------------------------------------------
// SineDensity
// ---------------------------------------------------------------------------

SineDensity::SineDensity(std::vector<int> freqs)
    : freqs_(std::move(freqs)),
      support_(SupportBox::unit(static_cast<int>(freqs_.size()))),
      smoothness_({std::vector<int>{1}}) {
    if (freqs_.empty()) throw ConfigError("sine: empty frequency list");
    std::vector<int> s;
    for (int k : freqs_) {
        if (k == 0) throw ConfigError("sine: frequencies must be nonzero integers");
        s.push_back(std::max(1, 9 - 2 * std::abs(k)));
    }
    smoothness_ = SmoothnessProfile(std::move(s));
}

std::string SineDensity::label() const {
    std::ostringstream os;
    os << "sine";
    for (int k : freqs_) os << "-" << k;
    return os.str();
}

double SineDensity::density(std::span<const double> x) const {
    if (!support_.contains(x)) return 0.0;
    double prod = 1.0;
    for (int j = 0; j < dim(); ++j) prod *= std::sin(kTwoPi * freqs_[j] * x[j]);
    return std::max(0.0, 1.0 + prod);
}

double SineDensity::log_density(std::span<const double> x) const {
    if (!support_.contains(x)) return kNegInf;
    double prod = 1.0;
    for (int j = 0; j < dim(); ++j) prod *= std::sin(kTwoPi * freqs_[j] * x[j]);
    double v = 1.0 + prod;
    if (v <= 0.0) throw DomainError("sine density is zero at x");
    return std::log(v);
}

std::vector<double> SineDensity::grad_log_density(std::span<const double> x) const {
    if (!support_.contains(x, 1e-12)) throw SupportError("grad_log_density: x outside support");
    const int d = dim();
    std::vector<double> sines(d), coss(d);
    double prod = 1.0;
    for (int j = 0; j < d; ++j) {
        sines[j] = std::sin(kTwoPi * freqs_[j] * x[j]);
        coss[j] = std::cos(kTwoPi * freqs_[j] * x[j]);
        prod *= sines[j];
    }
    double f = 1.0 + prod;
    if (f <= 0.0) throw DomainError("sine density is zero at x");
    std::vector<double> g(d);
    for (int j = 0; j < d; ++j) {
        double others = 1.0;
        for (int i = 0; i < d; ++i)
            if (i != j) others *= sines[i];
        g[j] = kTwoPi * freqs_[j] * coss[j] * others / f;
    }
    return g;
}

Matrix SineDensity::sample(int n, SeedSpec seed) const {
    if (n < 1) throw ConfigError("sample: n must be >= 1");
    const int d = dim();
    Matrix out(n, d);
    Rng rng(seed);
    std::vector<double> x(d);
    for (int i = 0; i < n; ++i) {
        // Rejection from uniform with envelope constant 2 (f <= 2).
        for (;;) {
            for (int k = 0; k < d; ++k) x[k] = rng.uniform01();
            double u = rng.uniform01();
            if (2.0 * u <= density(x)) break;
        }
        for (int k = 0; k < d; ++k) out(i, k) = x[k];
    }
    return out;
}

double SineDensity::tail_product(int k, std::span<const double> tail) const {
    double prod = 1.0;
    for (int j = k + 1; j < dim(); ++j) prod *= std::sin(kTwoPi * freqs_[j] * tail[j - k - 1]);
    return prod;
}

double SineDensity::conditional_cdf(int k, double xk, std::span<const double> tail) const {
    check_index(k);
    double x = std::clamp(xk, 0.0, 1.0);
    if (k > 0) return x;  // leading-coordinate marginals are uniform
    double t = tail_product(0, tail);
    double w = kTwoPi * freqs_[0];
    return std::clamp(x + t * (1.0 - std::cos(w * x)) / w, 0.0, 1.0);
}

double SineDensity::conditional_log_density(int k, std::span<const double> x) const {
    check_index(k);
    if (k > 0) return 0.0;
    return log_density(x);
}

// ---------------------------------------------------------------------------
// UniformBoxDensity
// ---------------------------------------------------------------------------

UniformBoxDensity::UniformBoxDensity(SupportBox box)
    : support_(std::move(box)), smoothness_({std::vector<int>(support_.dim(), 9)}) {
    double lv = 0.0;
    for (int k = 0; k < support_.dim(); ++k) lv += std::log(support_.width(k));
    log_volume_ = lv;
}

double UniformBoxDensity::log_density(std::span<const double> x) const {
    if (!support_.contains(x)) return kNegInf;
    return -log_volume_;
}

std::vector<double> UniformBoxDensity::grad_log_density(std::span<const double> x) const {
    if (!support_.contains(x, 1e-12)) throw SupportError("grad_log_density: x outside support");
    return std::vector<double>(dim(), 0.0);
}

Matrix UniformBoxDensity::sample(int n, SeedSpec seed) const {
    if (n < 1) throw ConfigError("sample: n must be >= 1");
    const int d = dim();
    Matrix out(n, d);
    Rng rng(seed);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) out(i, k) = rng.uniform(support_.lower[k], support_.upper[k]);
    return out;
}

double UniformBoxDensity::conditional_cdf(int k, double xk, std::span<const double>) const {
    check_index(k);
    return std::clamp((xk - support_.lower[k]) / support_.width(k), 0.0, 1.0);
}

double UniformBoxDensity::conditional_log_density(int k, std::span<const double>) const {
    check_index(k);
    return -std::log(support_.width(k));
}

// ---------------------------------------------------------------------------
// ProductDensity
// ---------------------------------------------------------------------------

ProductDensity::ProductDensity(std::vector<DensityPtr> factors)
    : factors_(std::move(factors)), smoothness_({std::vector<int>{1}}) {
    if (factors_.empty()) throw ConfigError("product: no factors");
    std::vector<double> lo, hi;
    std::vector<int> s;
    for (const auto& f : factors_) {
        if (f->dim() != 1) throw ConfigError("product: factors must be one-dimensional");
        lo.push_back(f->support().lower[0]);
        hi.push_back(f->support().upper[0]);
        s.push_back(f->smoothness().s[0]);
    }
    support_ = SupportBox(std::move(lo), std::move(hi));
    smoothness_ = SmoothnessProfile(std::move(s));
}

double ProductDensity::log_density(std::span<const double> x) const {
    double acc = 0.0;
    for (int k = 0; k < dim(); ++k) {
        double v = factors_[k]->log_density(x.subspan(k, 1));
        if (v == kNegInf) return kNegInf;
        acc += v;
    }
    return acc;
}

std::vector<double> ProductDensity::grad_log_density(std::span<const double> x) const {
    std::vector<double> g(dim());
    for (int k = 0; k < dim(); ++k) g[k] = factors_[k]->grad_log_density(x.subspan(k, 1))[0];
    return g;
}

Matrix ProductDensity::sample(int n, SeedSpec seed) const {
    if (n < 1) throw ConfigError("sample: n must be >= 1");
    const int d = dim();
    Matrix out(n, d);
    // One derived stream per factor keeps draws independent across columns.
    for (int k = 0; k < d; ++k) {
        Matrix col = factors_[k]->sample(n, SeedSpec{seed.master_seed,
                                                     seed.stream_id * 1000003ull + 1 + k});
        for (int i = 0; i < n; ++i) out(i, k) = col(i, 0);
    }
    return out;
}

bool ProductDensity::has_closed_conditionals() const {
    for (const auto& f : factors_)
        if (!f->has_closed_conditionals()) return false;
    return true;
}

double ProductDensity::conditional_cdf(int k, double xk, std::span<const double>) const {
    check_index(k);
    return factors_[k]->conditional_cdf(0, xk, {});
}

double ProductDensity::conditional_log_density(int k, std::span<const double> x) const {
    check_index(k);
    return factors_[k]->conditional_log_density(0, x.subspan(k, 1));
}

// ---------------------------------------------------------------------------
// PermutedDensity
// ---------------------------------------------------------------------------

PermutedDensity::PermutedDensity(DensityPtr base, Ordering perm)
    : base_(std::move(base)),
      perm_(std::move(perm)),
      smoothness_({std::vector<int>{1}}) {
    if (perm_.dim() != base_->dim()) throw ConfigError("permuted: dimension mismatch");
    const int d = base_->dim();
    std::vector<double> lo(d), hi(d);
    std::vector<int> s(d);
    for (int k = 0; k < d; ++k) {
        lo[k] = base_->support().lower[perm_.perm[k]];
        hi[k] = base_->support().upper[perm_.perm[k]];
        s[k] = base_->smoothness().s[perm_.perm[k]];
    }
    support_ = SupportBox(std::move(lo), std::move(hi));
    smoothness_ = SmoothnessProfile(std::move(s));
}

std::string PermutedDensity::label() const {
    std::ostringstream os;
    os << base_->label() << "-perm";
    for (int v : perm_.perm) os << v + 1;
    return os.str();
}

std::vector<double> PermutedDensity::to_base(std::span<const double> x) const {
    std::vector<double> xb(dim());
    for (int k = 0; k < dim(); ++k) xb[perm_.perm[k]] = x[k];
    return xb;
}

double PermutedDensity::log_density(std::span<const double> x) const {
    return base_->log_density(to_base(x));
}

double PermutedDensity::density(std::span<const double> x) const {
    return base_->density(to_base(x));
}

std::vector<double> PermutedDensity::grad_log_density(std::span<const double> x) const {
    std::vector<double> gb = base_->grad_log_density(to_base(x));
    std::vector<double> g(dim());
    for (int k = 0; k < dim(); ++k) g[k] = gb[perm_.perm[k]];
    return g;
}

Matrix PermutedDensity::sample(int n, SeedSpec seed) const {
    Matrix mb = base_->sample(n, seed);
    return mb.permuted_columns(perm_.perm);
}

// ---------------------------------------------------------------------------
// JSON factory
// ---------------------------------------------------------------------------

namespace {
SupportBox box_from_json(const nlohmann::json& j) {
    return SupportBox(j.at("lower").get<std::vector<double>>(),
                      j.at("upper").get<std::vector<double>>());
}
}  // namespace

DensityPtr density_from_json(const nlohmann::json& cfg) {
    if (!cfg.contains("kind")) throw ConfigError("density config: missing 'kind'");
    const std::string kind = cfg.at("kind").get<std::string>();
    DensityPtr out;
    if (kind == "gaussian") {
        int d = cfg.value("dim", 2);
        std::vector<double> mean = cfg.value("mean", std::vector<double>(d, 0.0));
        std::vector<double> sigma = cfg.value("sigma", std::vector<double>(d, 1.0));
        double rho = cfg.value("rho", 0.0);
        out = std::make_shared<GaussianDensity>(std::move(mean), std::move(sigma), rho);
    } else if (kind == "gaussian_mixture") {
        std::vector<GaussianComponent> comps;
        for (const auto& cj : cfg.at("components")) {
            GaussianComponent c;
            c.weight = cj.value("weight", 1.0);
            c.mean = cj.at("mean").get<std::vector<double>>();
            c.sigma = cj.at("sigma").get<std::vector<double>>();
            c.rho = cj.value("rho", 0.0);
            comps.push_back(std::move(c));
        }
        out = std::make_shared<GaussianMixtureDensity>(std::move(comps),
                                                       cfg.value("label", std::string("mixture")));
    } else if (kind == "banana") {
        if (cfg.contains("support"))
            out = std::make_shared<BananaDensity>(box_from_json(cfg.at("support")));
        else
            out = std::make_shared<BananaDensity>();
    } else if (kind == "sine") {
        out = std::make_shared<SineDensity>(cfg.at("freqs").get<std::vector<int>>());
    } else if (kind == "uniform_box") {
        out = std::make_shared<UniformBoxDensity>(
            SupportBox(cfg.at("lower").get<std::vector<double>>(),
                       cfg.at("upper").get<std::vector<double>>()));
    } else if (kind == "product") {
        std::vector<DensityPtr> factors;
        for (const auto& fj : cfg.at("factors")) factors.push_back(density_from_json(fj));
        out = std::make_shared<ProductDensity>(std::move(factors));
    } else if (kind == "mixture_ring") {
        out = GaussianMixtureDensity::ring(cfg.value("count", 8), cfg.value("radius", 2.0),
                                           cfg.value("sigma", 0.3),
                                           cfg.value("label", std::string("ring")));
    } else {
        throw ConfigError("density config: unknown kind '" + kind + "'");
    }
    return out;
}

nlohmann::json density_to_json_echo(const Density& den) {
    nlohmann::json j;
    j["label"] = den.label();
    j["dim"] = den.dim();
    j["support"] = {{"lower", den.support().lower}, {"upper", den.support().upper}};
    j["smoothness"] = den.smoothness().s;
    return j;
}

}  // namespace triflow
