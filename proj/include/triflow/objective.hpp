#ifndef TRIFLOW_OBJECTIVE_HPP_
#define TRIFLOW_OBJECTIVE_HPP_

#include <vector>

#include "triflow/param_maps.hpp"

namespace triflow {

/// Configuration of the KL / negative-log-likelihood loss
///   psi_S(x) = [ln f(x)] - ln g(S(x)) - sum_k ln D_k S_k(x),
/// where the f-term is included only in true-KL mode (f known).
struct LossConfig {
    bool include_f_term = false;
    DensityPtr g;
    DensityPtr f;  // required iff include_f_term
};

/// Sample average of psi_S over the rows of `data`.  Rows exactly on the
/// support boundary are nudged inward by 1e-12; rows outside the support
/// raise SupportError with the row index.  A map value outside the source
/// support makes the loss +infinity (the line search rejects such steps).
double empirical_loss(const TriangularMap& map, const Matrix& data, const LossConfig& cfg);
double empirical_loss(const JacobianFlowSpec& flow, const Matrix& data, const LossConfig& cfg);

/// Loss through the trainable-map interface (identical arithmetic to
/// empirical_loss for triangular specs); the optimizer's line search uses it.
double loss_value(const FittableMap& map, const Matrix& data, const LossConfig& cfg);

/// Component averages psi^k; their sum equals empirical_loss to roundoff.
/// Requires closed-form conditionals of g (and of f when include_f_term).
std::vector<double> per_coordinate_loss(const TriangularMap& map, const Matrix& data,
                                        const LossConfig& cfg);

struct LossGrad {
    double value;
    std::vector<double> grad;
};

/// Loss and its exact gradient in theta (same quadrature discretization as
/// the map evaluation).
LossGrad loss_with_gradient(const FittableMap& map, const Matrix& data, const LossConfig& cfg);
std::vector<double> loss_gradient(const FittableMap& map, const Matrix& data,
                                  const LossConfig& cfg);

struct OptimizeOptions {
    int max_iters = 400;
    double grad_tol = 1e-6;
    int lbfgs_memory = 10;
    double armijo_c = 1e-4;
    int max_halvings = 60;
    int multistart = 1;          // extra deterministic restarts when > 1
    SeedSpec multistart_seed{};  // stream for the restart perturbations
    double multistart_scale = 0.1;
};

struct OptimizationResult {
    std::vector<double> theta_hat;
    double final_loss = 0.0;
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
    bool line_search_failed = false;
    DerivativeCapReport diagnostics;
    double loss_drop_last10 = 0.0;  // optimality-gap proxy
    std::vector<double> loss_history;

    nlohmann::json to_json() const;
};

/// Deterministic full-batch minimization of the empirical loss: L-BFGS
/// directions with Armijo backtracking, so the recorded loss sequence is
/// nonincreasing.  Line-search failure after max_halvings reports
/// non-convergence instead of raising.
OptimizationResult optimize(const FittableMap& init, const Matrix& data, const LossConfig& cfg,
                            const OptimizeOptions& opts);

struct KlCheckResult {
    double kl_forward = 0.0, se_forward = 0.0;
    double kl_backward = 0.0, se_backward = 0.0;
    bool consistent(double z = 3.0) const;
};

/// Two-route estimate of KL(S#f | g): the forward route averages psi_S
/// directly; the backward route evaluates ln f - ln[(S^{-1}#g)] with the
/// pushforward density computed through the numerically inverted map, on an
/// independent sample stream.
KlCheckResult kl_change_of_variables_check(const TriangularMap& map, DensityPtr f, DensityPtr g,
                                           int n, SeedSpec seed);

/// View of a single component's coefficient block as the trainable
/// parameter vector, all other blocks frozen; used to optimize components
/// independently under a product source.
class ComponentSliceMap final : public FittableMap {
  public:
    ComponentSliceMap(MonotoneMapSpec base, int component);

    int dim() const override { return base_.dim(); }
    int param_count() const override { return len_; }
    std::span<const double> params() const override {
        return base_.params().subspan(offset_, len_);
    }
    void set_params(std::span<const double> theta) override;
    const SupportBox& support_in() const override { return base_.support_in(); }
    void map_logdet(std::span<const double> x, std::span<double> y,
                    double& logdet) const override;
    void map_logdet_grads(std::span<const double> x, std::span<double> y, double& logdet,
                          std::span<double> dy, std::span<double> dlogdet) const override;
    std::unique_ptr<FittableMap> clone_map() const override;
    nlohmann::json to_json() const override;

    const MonotoneMapSpec& base() const { return base_; }

  private:
    MonotoneMapSpec base_;
    int comp_, offset_, len_;
};

}  // namespace triflow

#endif  // TRIFLOW_OBJECTIVE_HPP_
