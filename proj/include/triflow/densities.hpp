#ifndef TRIFLOW_DENSITIES_HPP_
#define TRIFLOW_DENSITIES_HPP_

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "triflow/common.hpp"
#include "triflow/core.hpp"
#include "triflow/rng.hpp"

namespace triflow {

/// Evaluable, differentiable, sampleable density with compact box support.
///
/// Conventions shared by every kind:
///  - log_density returns the -infinity marker outside the support box and
///    throws DomainError where the density is exactly zero inside it.
///  - density() is the total (never-throwing) pointwise value, zero outside
///    the box; quadrature uses it.
///  - Coordinate indices are 0-based; the conditional at index k is
///    F(x_k | x_{k+1},...,x_{d-1}), matching the triangular recursion that
///    resolves the last coordinate first.
class Density {
  public:
    virtual ~Density() = default;

    virtual int dim() const = 0;
    virtual const SupportBox& support() const = 0;
    virtual const SmoothnessProfile& smoothness() const = 0;
    virtual std::string label() const = 0;

    virtual double log_density(std::span<const double> x) const = 0;
    virtual double density(std::span<const double> x) const;
    virtual std::vector<double> grad_log_density(std::span<const double> x) const = 0;

    /// Deterministic given the seed; all rows lie inside the support box.
    virtual Matrix sample(int n, SeedSpec seed) const = 0;

    /// True when conditional_cdf / conditional_log_density are closed-form.
    virtual bool has_closed_conditionals() const { return false; }

    /// F_k(x_k | tail) with tail = (x_{k+1},..,x_{d-1}).  Kinds without a
    /// closed form fall back to Gauss-Legendre quadrature (d <= 2 only).
    virtual double conditional_cdf(int k, double xk, std::span<const double> tail) const;

    /// ln f_k(x_k | x_{k+1:d}) evaluated at the full point x; closed-form
    /// kinds only (UnsupportedError otherwise).
    virtual double conditional_log_density(int k, std::span<const double> x) const;

    /// Density of the k-th conditional at xk given tail, via quadrature if
    /// necessary; used by the numerically constructed transport maps.
    double conditional_density_quadrature(int k, double xk, std::span<const double> tail,
                                          int nodes) const;
    double conditional_cdf_quadrature(int k, double xk, std::span<const double> tail,
                                      int nodes) const;

  protected:
    void check_index(int k) const {
        if (k < 0 || k >= dim()) throw ConfigError("coordinate index out of range");
    }
};

using DensityPtr = std::shared_ptr<const Density>;

/// Tensor-product Gauss-Legendre estimate of the total mass (d <= 2).
double quadrature_normalization(const Density& den, int nodes_per_axis);

/// Gaussian with [mu +- 6 sigma] box support.  d == 2 admits a correlation
/// rho; other dimensions are diagonal.  The 6-sigma truncation mass
/// (< 1e-8) is ignored in the closed-form formulas.
class GaussianDensity : public Density {
  public:
    GaussianDensity(std::vector<double> mean, std::vector<double> sigma, double rho = 0.0);

    int dim() const override { return static_cast<int>(mean_.size()); }
    const SupportBox& support() const override { return support_; }
    const SmoothnessProfile& smoothness() const override { return smoothness_; }
    std::string label() const override;

    double log_density(std::span<const double> x) const override;
    std::vector<double> grad_log_density(std::span<const double> x) const override;
    Matrix sample(int n, SeedSpec seed) const override;

    bool has_closed_conditionals() const override { return true; }
    double conditional_cdf(int k, double xk, std::span<const double> tail) const override;
    double conditional_log_density(int k, std::span<const double> x) const override;

    double mean(int k) const { return mean_[k]; }
    double sigma(int k) const { return sigma_[k]; }
    double rho() const { return rho_; }

    static std::shared_ptr<GaussianDensity> standard(int d);

    void set_smoothness(SmoothnessProfile s) { smoothness_ = std::move(s); }

  private:
    // Conditional mean/sd of coordinate 0 given coordinate 1 (d == 2).
    double cond_mean0(double x1) const;
    double cond_sd0() const;

    std::vector<double> mean_, sigma_;
    double rho_;
    SupportBox support_;
    SmoothnessProfile smoothness_;
};

struct GaussianComponent {
    double weight;
    std::vector<double> mean;
    std::vector<double> sigma;
    double rho = 0.0;
};

/// Finite mixture of Gaussians (diagonal in general; rho allowed at d==2).
class GaussianMixtureDensity : public Density {
  public:
    explicit GaussianMixtureDensity(std::vector<GaussianComponent> components,
                                    std::string label = "mixture");

    int dim() const override { return dim_; }
    const SupportBox& support() const override { return support_; }
    const SmoothnessProfile& smoothness() const override { return smoothness_; }
    std::string label() const override { return label_; }

    double log_density(std::span<const double> x) const override;
    std::vector<double> grad_log_density(std::span<const double> x) const override;
    Matrix sample(int n, SeedSpec seed) const override;

    bool has_closed_conditionals() const override { return true; }
    double conditional_cdf(int k, double xk, std::span<const double> tail) const override;
    double conditional_log_density(int k, std::span<const double> x) const override;

    /// Equal-weight ring of `count` isotropic components at the given radius.
    static std::shared_ptr<GaussianMixtureDensity> ring(int count, double radius, double sigma,
                                                        const std::string& label);

  private:
    // ln of the marginal of coordinates k..d-1 for component i at x.
    double component_tail_logpdf(int i, int k, std::span<const double> x) const;

    std::vector<GaussianComponent> comps_;
    int dim_;
    SupportBox support_;
    SmoothnessProfile smoothness_;
    std::string label_;
};

/// The banana: x1 ~ N(0,1) drives x0 | x1 ~ N(x1^2/2, 1/2), truncated to a
/// box and renormalized by the quadrature mass of the box.
class BananaDensity : public Density {
  public:
    explicit BananaDensity(SupportBox box = SupportBox({-4.0, -4.0}, {10.0, 4.0}));

    int dim() const override { return 2; }
    const SupportBox& support() const override { return support_; }
    const SmoothnessProfile& smoothness() const override { return smoothness_; }
    std::string label() const override { return "banana"; }

    double log_density(std::span<const double> x) const override;
    std::vector<double> grad_log_density(std::span<const double> x) const override;
    Matrix sample(int n, SeedSpec seed) const override;

    bool has_closed_conditionals() const override { return true; }
    double conditional_cdf(int k, double xk, std::span<const double> tail) const override;
    double conditional_log_density(int k, std::span<const double> x) const override;

  private:
    double cond_weight0(double x1) const;  // mass of N(x1^2/2,1/2) inside [lo0,hi0]
    SupportBox support_;
    SmoothnessProfile smoothness_;
    double log_mass_;  // ln of the box mass, from quadrature
};

/// f(x) = 1 + prod_j sin(2 pi k_j x_j) on the unit hypercube.
class SineDensity : public Density {
  public:
    explicit SineDensity(std::vector<int> freqs);

    int dim() const override { return static_cast<int>(freqs_.size()); }
    const SupportBox& support() const override { return support_; }
    const SmoothnessProfile& smoothness() const override { return smoothness_; }
    std::string label() const override;

    double log_density(std::span<const double> x) const override;
    double density(std::span<const double> x) const override;
    std::vector<double> grad_log_density(std::span<const double> x) const override;
    Matrix sample(int n, SeedSpec seed) const override;

    bool has_closed_conditionals() const override { return true; }
    double conditional_cdf(int k, double xk, std::span<const double> tail) const override;
    double conditional_log_density(int k, std::span<const double> x) const override;

    const std::vector<int>& freqs() const { return freqs_; }
    void set_smoothness(SmoothnessProfile s) { smoothness_ = std::move(s); }

  private:
    double tail_product(int k, std::span<const double> tail) const;
    std::vector<int> freqs_;
    SupportBox support_;
    SmoothnessProfile smoothness_;
};

class UniformBoxDensity : public Density {
  public:
    explicit UniformBoxDensity(SupportBox box);

    int dim() const override { return support_.dim(); }
    const SupportBox& support() const override { return support_; }
    const SmoothnessProfile& smoothness() const override { return smoothness_; }
    std::string label() const override { return "uniform"; }

    double log_density(std::span<const double> x) const override;
    std::vector<double> grad_log_density(std::span<const double> x) const override;
    Matrix sample(int n, SeedSpec seed) const override;

    bool has_closed_conditionals() const override { return true; }
    double conditional_cdf(int k, double xk, std::span<const double> tail) const override;
    double conditional_log_density(int k, std::span<const double> x) const override;

  private:
    SupportBox support_;
    SmoothnessProfile smoothness_;
    double log_volume_;
};

/// Independent product of one-dimensional densities.
class ProductDensity : public Density {
  public:
    explicit ProductDensity(std::vector<DensityPtr> factors);

    int dim() const override { return static_cast<int>(factors_.size()); }
    const SupportBox& support() const override { return support_; }
    const SmoothnessProfile& smoothness() const override { return smoothness_; }
    std::string label() const override { return "product"; }

    double log_density(std::span<const double> x) const override;
    std::vector<double> grad_log_density(std::span<const double> x) const override;
    Matrix sample(int n, SeedSpec seed) const override;

    bool has_closed_conditionals() const override;
    double conditional_cdf(int k, double xk, std::span<const double> tail) const override;
    double conditional_log_density(int k, std::span<const double> x) const override;

  private:
    std::vector<DensityPtr> factors_;
    SupportBox support_;
    SmoothnessProfile smoothness_;
};

/// View of a base density with coordinates rearranged: coordinate k of this
/// density is coordinate perm[k] of the base.  Conditionals fall back to
/// quadrature; the chain-rule conditional densities are generally not
/// closed-form after permutation.
class PermutedDensity : public Density {
  public:
    PermutedDensity(DensityPtr base, Ordering perm);

    int dim() const override { return base_->dim(); }
    const SupportBox& support() const override { return support_; }
    const SmoothnessProfile& smoothness() const override { return smoothness_; }
    std::string label() const override;

    double log_density(std::span<const double> x) const override;
    double density(std::span<const double> x) const override;
    std::vector<double> grad_log_density(std::span<const double> x) const override;
    Matrix sample(int n, SeedSpec seed) const override;

    const Ordering& ordering() const { return perm_; }
    const DensityPtr& base() const { return base_; }

  private:
    std::vector<double> to_base(std::span<const double> x) const;
    DensityPtr base_;
    Ordering perm_;
    SupportBox support_;
    SmoothnessProfile smoothness_;
};

/// Builds a density from its JSON configuration (see README for the schema).
DensityPtr density_from_json(const nlohmann::json& cfg);
nlohmann::json density_to_json_echo(const Density& den);

}  // namespace triflow

#endif  // TRIFLOW_DENSITIES_HPP_
