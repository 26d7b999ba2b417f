#ifndef TRIFLOW_PARAM_MAPS_HPP_
#define TRIFLOW_PARAM_MAPS_HPP_

#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "triflow/kr_exact.hpp"

namespace triflow {

/// Number of Gauss-Legendre nodes used for the monotone integral; the
/// parameter gradient differentiates the same discretization.
inline constexpr int kIntegrationNodes = 20;

enum class IntegrandForm { Exp, Square };

IntegrandForm integrand_form_from_string(const std::string& s);
std::string to_string(IntegrandForm f);

/// Diagnostic bounds realized by a fitted map on a grid: the smallest
/// diagonal derivative and the largest first-order partial.
struct DerivativeCapReport {
    double min_diag = std::numeric_limits<double>::quiet_NaN();
    double max_partial = std::numeric_limits<double>::quiet_NaN();
};

/// Interface shared by the trainable map families (basis-expansion
/// triangular maps and their orthogonal-block compositions).
class FittableMap {
  public:
    virtual ~FittableMap() = default;

    virtual int dim() const = 0;
    virtual int param_count() const = 0;
    virtual std::span<const double> params() const = 0;
    virtual void set_params(std::span<const double> theta) = 0;
    virtual const SupportBox& support_in() const = 0;

    virtual void map_logdet(std::span<const double> x, std::span<double> y,
                            double& logdet) const = 0;
    /// dy is d x P row-major, dlogdet has length P.
    virtual void map_logdet_grads(std::span<const double> x, std::span<double> y,
                                  double& logdet, std::span<double> dy,
                                  std::span<double> dlogdet) const = 0;

    virtual std::unique_ptr<FittableMap> clone_map() const = 0;
    virtual nlohmann::json to_json() const = 0;
};

/// Monotone triangular map S_k(x) = a_k(x_{k+1:d}) + int_{lo_k}^{x_k}
/// rho_k(t, x_{k+1:d}) dt, where a_k and the integrand exponent p_k are
/// tensor-product Legendre expansions on the rescaled support and
/// rho = exp(p) or p^2 + 1e-6.  Strict monotonicity holds for every theta.
class MonotoneMapSpec final : public TriangularMap, public FittableMap {
  public:
    MonotoneMapSpec(SupportBox support_in, SupportBox support_out, std::vector<int> diag_degs,
                    std::vector<std::vector<int>> tail_degs,
                    IntegrandForm form = IntegrandForm::Exp);

    /// Same degree in every diagonal and tail slot.
    static MonotoneMapSpec uniform_degrees(SupportBox support_in, SupportBox support_out,
                                           int deg, int tail_deg,
                                           IntegrandForm form = IntegrandForm::Exp);

    /// Identity map on a box (a_k restores the lower edge, rho = 1).
    static MonotoneMapSpec identity(const SupportBox& box, int deg, int tail_deg,
                                    IntegrandForm form = IntegrandForm::Exp);

    /// Affine initialization sending support_in onto the centered sub-box of
    /// support_out scaled by `shrink`; always feasible for a source density
    /// supported on support_out.
    void set_affine_init(double shrink);

    // TriangularMap + FittableMap
    int dim() const override { return d_; }
    const SupportBox& support_in() const override { return in_; }
    const SupportBox& support_out() const override { return out_; }
    double component(int k, std::span<const double> x) const override;
    double diag_partial(int k, std::span<const double> x) const override;

    int param_count() const override { return static_cast<int>(theta_.size()); }
    std::span<const double> params() const override { return theta_; }
    void set_params(std::span<const double> theta) override;
    void map_logdet(std::span<const double> x, std::span<double> y,
                    double& logdet) const override;
    void map_logdet_grads(std::span<const double> x, std::span<double> y, double& logdet,
                          std::span<double> dy, std::span<double> dlogdet) const override;
    std::unique_ptr<FittableMap> clone_map() const override;

    IntegrandForm form() const { return form_; }
    int component_offset(int k) const { return comps_[k].offset; }
    int component_param_count(int k) const { return comps_[k].a_count + comps_[k].p_count; }
    int a_count(int k) const { return comps_[k].a_count; }

    double& theta(int i) { return theta_[i]; }
    double theta(int i) const { return theta_[i]; }

    /// Dense dS/dtheta (d x P) and d(D_k S_k)/dtheta rows, for tests.
    void param_jacobian(std::span<const double> x, Matrix& dS, Matrix& drho) const;

    /// Full upper-triangular x-Jacobian: J(k,l) = dS_k/dx_l for l >= k.
    void x_jacobian(std::span<const double> x, Matrix& jac) const;
    /// Row k holds d ln rho_k / dx_l for l >= k.
    void lnrho_x_gradient(std::span<const double> x, Matrix& grad) const;

    DerivativeCapReport derivative_cap_diagnostic(int grid_per_axis) const;

    nlohmann::json to_json() const override;
    static MonotoneMapSpec from_json(const nlohmann::json& j);

  private:
    struct Component {
        int deg;
        std::vector<int> tail_degs;
        int tail_size;  // prod(tail_degs + 1)
        int a_count;    // == tail_size
        int p_count;    // (deg+1) * tail_size
        int offset;     // of the a-block in theta
    };

    // Scratch reused across calls (thread local inside the implementation).
    struct Scratch;

    void check_point(std::span<const double> x) const;
    double xi(int j, double v) const { return 2.0 * (v - in_.lower[j]) / in_.width(j) - 1.0; }

    // Core evaluator: S_k and rho_k at x, optionally with the parameter
    // gradient blocks (lengths a_count+p_count; dlnrho is zero on the
    // a-block).
    void eval_component(int k, std::span<const double> x, double& s_out, double& rho_out,
                        double* dS_block, double* dlnrho_block) const;

    void tail_basis(int k, std::span<const double> x, int deriv_dim,
                    std::vector<double>& out) const;

    double rho_of_p(double p) const;
    double dlnrho_dp(double p) const;
    double drho_dp(double p) const;

    int d_;
    SupportBox in_, out_;
    IntegrandForm form_;
    std::vector<Component> comps_;
    std::vector<double> theta_;
};

struct FlowEval {
    std::vector<double> y;
    double logdet = 0.0;
    /// Largest ||U^j(x^j)||_2 seen along the composition; values above 1
    /// violate the unit-ball convention and are reported, not rejected.
    double max_block_norm = 0.0;
};

/// Alternating composition of orthogonal matrices and monotone triangular
/// blocks: S = U^m o Sigma^m o ... o U^1 o Sigma^1.  Orthogonality is
/// checked to 1e-12 at construction.
class JacobianFlowSpec final : public FittableMap {
  public:
    JacobianFlowSpec(int dim, std::vector<Matrix> orthogonals,
                     std::vector<MonotoneMapSpec> maps);

    int dim() const override { return d_; }
    int param_count() const override { return static_cast<int>(theta_.size()); }
    std::span<const double> params() const override { return theta_; }
    void set_params(std::span<const double> theta) override;
    const SupportBox& support_in() const override { return blocks_.front().map.support_in(); }

    int depth() const { return static_cast<int>(blocks_.size()); }
    const MonotoneMapSpec& block_map(int j) const { return blocks_[j].map; }
    const Matrix& block_orth(int j) const { return blocks_[j].orth; }

    FlowEval eval_with_logdet(std::span<const double> x) const;

    void map_logdet(std::span<const double> x, std::span<double> y,
                    double& logdet) const override;
    void map_logdet_grads(std::span<const double> x, std::span<double> y, double& logdet,
                          std::span<double> dy, std::span<double> dlogdet) const override;
    std::unique_ptr<FittableMap> clone_map() const override;

    /// Inverse by blockwise triangular inversion and orthogonal transposes.
    std::vector<double> invert(std::span<const double> y, double tol) const;

    nlohmann::json to_json() const override;
    static JacobianFlowSpec from_json(const nlohmann::json& j);

    static Matrix signed_permutation(const std::vector<int>& perm,
                                     const std::vector<int>& signs = {});

  private:
    struct Block {
        Matrix orth;
        MonotoneMapSpec map;
    };
    void rebuild_theta();

    int d_;
    std::vector<Block> blocks_;
    std::vector<double> theta_;
};

}  // namespace triflow

#endif  // TRIFLOW_PARAM_MAPS_HPP_
