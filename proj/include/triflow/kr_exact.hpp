#ifndef TRIFLOW_KR_EXACT_HPP_
#define TRIFLOW_KR_EXACT_HPP_

#include <memory>
#include <span>
#include <vector>

#include "triflow/densities.hpp"

namespace triflow {

/// Monotone upper-triangular map: component k consumes (x_k,...,x_{d-1})
/// and is strictly increasing in x_k.  Inputs are clamped to the closed
/// support; boundary values are understood as limits.
class TriangularMap {
  public:
    virtual ~TriangularMap() = default;

    virtual int dim() const = 0;
    virtual const SupportBox& support_in() const = 0;
    /// Box containing the image (used as the inversion bracket).
    virtual const SupportBox& support_out() const = 0;

    virtual double component(int k, std::span<const double> x) const = 0;
    /// D_k S_k(x) > 0.
    virtual double diag_partial(int k, std::span<const double> x) const = 0;

    std::vector<double> eval(std::span<const double> x) const;
    /// sum_k ln D_k S_k(x); throws MonotonicityError on a nonpositive diagonal.
    double log_det_jacobian(std::span<const double> x) const;
};

using TriangularMapPtr = std::shared_ptr<const TriangularMap>;

/// Solves S(x) = y by back-substitution (x_{d-1} first) with bisection on
/// each monotone slice.  Throws BracketError when y is outside the image.
std::vector<double> invert_triangular_map(const TriangularMap& map, std::span<const double> y,
                                          double tol);

/// (S^{-1} # g)(x) = g(S(x)) * prod_k D_k S_k(x).
double pushforward_density(const TriangularMap& map, const Density& g,
                           std::span<const double> x);

/// Closed-form KR map from a bivariate Gaussian to the standard bivariate
/// Gaussian; both components are affine.
class AffineGaussianKrMap : public TriangularMap {
  public:
    AffineGaussianKrMap(std::shared_ptr<const GaussianDensity> f,
                        std::shared_ptr<const GaussianDensity> g);

    int dim() const override { return 2; }
    const SupportBox& support_in() const override { return f_->support(); }
    const SupportBox& support_out() const override { return g_->support(); }
    double component(int k, std::span<const double> x) const override;
    double diag_partial(int k, std::span<const double> x) const override;

  private:
    std::shared_ptr<const GaussianDensity> f_, g_;
    double scale0_, scale1_;  // diagonal derivatives
};

std::shared_ptr<AffineGaussianKrMap> gaussian_to_gaussian_kr(
    std::shared_ptr<const GaussianDensity> f, std::shared_ptr<const GaussianDensity> g);

/// KR map onto the uniform density on the unit hypercube: component k is
/// the conditional cdf F_k(x_k | x_{k+1:d}) of the source density.
class RosenblattMap : public TriangularMap {
  public:
    explicit RosenblattMap(DensityPtr f);

    int dim() const override { return f_->dim(); }
    const SupportBox& support_in() const override { return f_->support(); }
    const SupportBox& support_out() const override { return unit_; }
    double component(int k, std::span<const double> x) const override;
    double diag_partial(int k, std::span<const double> x) const override;

  private:
    DensityPtr f_;
    SupportBox unit_;
};

std::shared_ptr<RosenblattMap> rosenblatt_transform(DensityPtr f);

/// KR map built purely from quadrature: conditional cdfs of f by
/// Gauss-Legendre panels and quantiles of g by bisection.  Independent of
/// every closed-form conditional, so it serves as the oracle route.
/// Restricted to d <= 2.
class NumericalKrMap : public TriangularMap {
  public:
    NumericalKrMap(DensityPtr f, DensityPtr g, int quad_nodes, double bisect_tol);

    int dim() const override { return f_->dim(); }
    const SupportBox& support_in() const override { return f_->support(); }
    const SupportBox& support_out() const override { return g_->support(); }
    double component(int k, std::span<const double> x) const override;
    double diag_partial(int k, std::span<const double> x) const override;

  private:
    // Panelized marginal cdf of the last coordinate with monotone cubic
    // interpolation between panel edges; built once at construction.
    struct MarginalTable {
        std::vector<double> t, cdf, pdf;
        double eval_cdf(double x) const;
        double eval_pdf(double x) const;
        double inverse(double p, double tol) const;
    };
    static MarginalTable build_marginal_table(const Density& den, int nodes);

    double conditional_cdf_first(const Density& den, double x0, double x1) const;
    double conditional_density_first(const Density& den, double x0, double x1) const;
    double quantile_first(const Density& den, double p, double x1) const;

    DensityPtr f_, g_;
    int nodes_;
    double bisect_tol_;
    MarginalTable f_last_, g_last_;
};

std::shared_ptr<NumericalKrMap> numerical_kr(DensityPtr f, DensityPtr g, int quad_nodes = 64,
                                             double bisect_tol = 1e-10);

}  // namespace triflow

#endif  // TRIFLOW_KR_EXACT_HPP_
