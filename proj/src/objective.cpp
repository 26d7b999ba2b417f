#include "triflow/objective.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "triflow/parallel.hpp"

namespace triflow {

namespace {

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double dotv(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// Copies row i into the scratch, nudging boundary values inward by 1e-12
// and rejecting rows outside the box.
void prepare_row(const Matrix& data, int i, const SupportBox& box, std::vector<double>& x) {
    const int d = data.cols();
    x.resize(d);
    for (int k = 0; k < d; ++k) {
        double v = data(i, k);
        if (v < box.lower[k] || v > box.upper[k]) {
            std::ostringstream os;
            os << "empirical_loss: row " << i << " outside map support (coordinate " << k << ")";
            throw SupportError(os.str());
        }
        if (v == box.lower[k]) v = box.lower[k] + 1e-12;
        if (v == box.upper[k]) v = box.upper[k] - 1e-12;
        x[k] = v;
    }
}

void check_cfg(const LossConfig& cfg) {
    if (!cfg.g) throw ConfigError("LossConfig: source density g is required");
    if (cfg.include_f_term && !cfg.f)
        throw ConfigError("LossConfig: f is required when include_f_term");
}

// psi for one prepared row given the mapped point and logdet.
double psi_row(const LossConfig& cfg, std::span<const double> x, std::span<const double> y,
               double logdet) {
    double lg = cfg.g->log_density(y);
    if (lg == kNegInf) return kPosInf;
    double v = -lg - logdet;
    if (cfg.include_f_term) v += cfg.f->log_density(x);
    return v;
}

}  // namespace

double empirical_loss(const TriangularMap& map, const Matrix& data, const LossConfig& cfg) {
    check_cfg(cfg);
    if (data.rows() < 1) throw ConfigError("empirical_loss: empty data");
    if (data.cols() != map.dim()) throw ConfigError("empirical_loss: dimension mismatch");
    const SupportBox& box = map.support_in();
    const int d = map.dim();
    double total = block_sum(data.rows(), [&](std::int64_t i) {
        thread_local std::vector<double> x, y;
        prepare_row(data, static_cast<int>(i), box, x);
        y.resize(d);
        double logdet = 0.0;
        for (int k = 0; k < d; ++k) {
            y[k] = map.component(k, x);
            double dk = map.diag_partial(k, x);
            if (!(dk > 0.0)) throw MonotonicityError("empirical_loss: nonpositive diagonal");
            logdet += std::log(dk);
        }
        return psi_row(cfg, x, y, logdet);
    });
    return total / data.rows();
}

double loss_value(const FittableMap& map, const Matrix& data, const LossConfig& cfg) {
    check_cfg(cfg);
    if (data.rows() < 1) throw ConfigError("empirical_loss: empty data");
    if (data.cols() != map.dim()) throw ConfigError("empirical_loss: dimension mismatch");
    const SupportBox& box = map.support_in();
    const int d = map.dim();
    double total = block_sum(data.rows(), [&](std::int64_t i) {
        thread_local std::vector<double> x, y;
        prepare_row(data, static_cast<int>(i), box, x);
        y.resize(d);
        double logdet;
        map.map_logdet(x, y, logdet);
        return psi_row(cfg, x, y, logdet);
    });
    return total / data.rows();
}

double empirical_loss(const JacobianFlowSpec& flow, const Matrix& data, const LossConfig& cfg) {
    return loss_value(flow, data, cfg);
}

std::vector<double> per_coordinate_loss(const TriangularMap& map, const Matrix& data,
                                        const LossConfig& cfg) {
    check_cfg(cfg);
    if (data.rows() < 1) throw ConfigError("per_coordinate_loss: empty data");
    const int d = map.dim();
    if (!cfg.g->has_closed_conditionals())
        throw UnsupportedError("per_coordinate_loss: g lacks closed-form conditionals");
    if (cfg.include_f_term && !cfg.f->has_closed_conditionals())
        throw UnsupportedError("per_coordinate_loss: f lacks closed-form conditionals");
    const SupportBox& box = map.support_in();
    std::vector<double> totals = block_sum_vec(data.rows(), d, [&](std::int64_t i,
                                                                   std::span<double> acc) {
        thread_local std::vector<double> x, y;
        prepare_row(data, static_cast<int>(i), box, x);
        y.resize(d);
        for (int k = 0; k < d; ++k) y[k] = map.component(k, x);
        for (int k = 0; k < d; ++k) {
            double dk = map.diag_partial(k, x);
            double v = -cfg.g->conditional_log_density(k, y) - std::log(dk);
            if (cfg.include_f_term) v += cfg.f->conditional_log_density(k, x);
            acc[k] += v;
        }
    });
    for (double& v : totals) v /= data.rows();
    return totals;
}

LossGrad loss_with_gradient(const FittableMap& map, const Matrix& data, const LossConfig& cfg) {
    check_cfg(cfg);
    if (data.rows() < 1) throw ConfigError("loss_gradient: empty data");
    if (data.cols() != map.dim()) throw ConfigError("loss_gradient: dimension mismatch");
    const SupportBox& box = map.support_in();
    const int d = map.dim();
    const int P = map.param_count();
    // Slot 0 accumulates the loss, slots 1..P the gradient.
    std::vector<double> sums = block_sum_vec(data.rows(), P + 1, [&](std::int64_t i,
                                                                     std::span<double> acc) {
        thread_local std::vector<double> x, y, dy, dld, gl;
        prepare_row(data, static_cast<int>(i), box, x);
        y.resize(d);
        dy.resize(std::size_t(d) * P);
        dld.resize(P);
        double logdet;
        map.map_logdet_grads(x, y, logdet, dy, dld);
        double v = psi_row(cfg, x, y, logdet);
        acc[0] += v;
        if (v == kPosInf) return;  // gradient unused: the step will be rejected
        gl = cfg.g->grad_log_density(y);
        for (int p = 0; p < P; ++p) {
            double gsum = 0.0;
            for (int k = 0; k < d; ++k) gsum += gl[k] * dy[std::size_t(k) * P + p];
            acc[1 + p] += -gsum - dld[p];
        }
    });
    LossGrad out;
    out.value = sums[0] / data.rows();
    out.grad.assign(sums.begin() + 1, sums.end());
    for (double& g : out.grad) g /= data.rows();
    return out;
}

std::vector<double> loss_gradient(const FittableMap& map, const Matrix& data,
                                  const LossConfig& cfg) {
    return loss_with_gradient(map, data, cfg).grad;
}

nlohmann::json OptimizationResult::to_json() const {
    nlohmann::json j;
    j["final_loss"] = final_loss;
    j["iterations"] = iterations;
    j["grad_norm"] = grad_norm;
    j["converged"] = converged;
    j["line_search_failed"] = line_search_failed;
    j["loss_drop_last10"] = loss_drop_last10;
    j["min_diag"] = diagnostics.min_diag;
    j["max_partial"] = diagnostics.max_partial;
    return j;
}

namespace {

OptimizationResult solve_once(FittableMap& work, std::span<const double> theta0,
                              const Matrix& data, const LossConfig& cfg,
                              const OptimizeOptions& opts) {
    const int P = work.param_count();
    std::vector<double> theta(theta0.begin(), theta0.end());
    work.set_params(theta);

    OptimizationResult res;
    LossGrad cur = loss_with_gradient(work, data, cfg);
    res.loss_history.push_back(cur.value);

    std::deque<std::vector<double>> s_hist, y_hist;
    std::vector<double> dir(P), theta_try(P);

    int iter = 0;
    for (; iter < opts.max_iters; ++iter) {
        res.grad_norm = l2_norm(cur.grad);
        if (res.grad_norm <= opts.grad_tol) {
            res.converged = true;
            break;
        }
        // L-BFGS two-loop recursion on the stored (s, y) pairs.
        std::copy(cur.grad.begin(), cur.grad.end(), dir.begin());
        {
            const int m = static_cast<int>(s_hist.size());
            std::vector<double> alpha(m);
            for (int h = m - 1; h >= 0; --h) {
                double rho = 1.0 / dotv(y_hist[h], s_hist[h]);
                alpha[h] = rho * dotv(s_hist[h], dir);
                for (int p = 0; p < P; ++p) dir[p] -= alpha[h] * y_hist[h][p];
            }
            if (m > 0) {
                double gamma = dotv(s_hist[m - 1], y_hist[m - 1]) /
                               dotv(y_hist[m - 1], y_hist[m - 1]);
                for (double& v : dir) v *= gamma;
            }
            for (int h = 0; h < m; ++h) {
                double rho = 1.0 / dotv(y_hist[h], s_hist[h]);
                double beta = rho * dotv(y_hist[h], dir);
                for (int p = 0; p < P; ++p) dir[p] += s_hist[h][p] * (alpha[h] - beta);
            }
            for (double& v : dir) v = -v;
        }
        double slope = dotv(dir, cur.grad);
        if (!(slope < 0.0)) {  // not a descent direction: fall back to steepest
            for (int p = 0; p < P; ++p) dir[p] = -cur.grad[p];
            slope = -res.grad_norm * res.grad_norm;
        }

        // Armijo backtracking.
        double step = 1.0;
        bool accepted = false;
        double f_try = 0.0;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            for (int p = 0; p < P; ++p) theta_try[p] = theta[p] + step * dir[p];
            work.set_params(theta_try);
            f_try = empirical_loss(work, data, cfg);
            if (f_try <= cur.value + opts.armijo_c * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.line_search_failed = true;
            work.set_params(theta);
            break;
        }

        work.set_params(theta_try);
        LossGrad next = loss_with_gradient(work, data, cfg);
        std::vector<double> s(P), yv(P);
        for (int p = 0; p < P; ++p) {
            s[p] = theta_try[p] - theta[p];
            yv[p] = next.grad[p] - cur.grad[p];
        }
        if (dotv(yv, s) > 1e-12 * l2_norm(s) * l2_norm(yv)) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            if (static_cast<int>(s_hist.size()) > opts.lbfgs_memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        theta = theta_try;
        cur = std::move(next);
        res.loss_history.push_back(cur.value);
    }
    if (!res.converged) res.grad_norm = l2_norm(cur.grad);

    res.theta_hat = theta;
    res.final_loss = cur.value;
    res.iterations = iter;
    const std::size_t h = res.loss_history.size();
    res.loss_drop_last10 =
        h > 10 ? res.loss_history[h - 11] - res.loss_history[h - 1]
               : (h > 1 ? res.loss_history.front() - res.loss_history.back() : 0.0);
    return res;
}

DerivativeCapReport map_diagnostics(const FittableMap& map) {
    DerivativeCapReport rep;
    try {
        if (const auto* spec = dynamic_cast<const MonotoneMapSpec*>(&map))
            return spec->derivative_cap_diagnostic(16);
        if (const auto* flow = dynamic_cast<const JacobianFlowSpec*>(&map)) {
            rep.min_diag = kPosInf;
            rep.max_partial = 0.0;
            for (int j = 0; j < flow->depth(); ++j) {
                DerivativeCapReport b = flow->block_map(j).derivative_cap_diagnostic(16);
                rep.min_diag = std::min(rep.min_diag, b.min_diag);
                rep.max_partial = std::max(rep.max_partial, b.max_partial);
            }
        }
    } catch (const UnsupportedError&) {
        // leave NaNs for dimensions without a grid diagnostic
    }
    return rep;
}

}  // namespace

OptimizationResult optimize(const FittableMap& init, const Matrix& data, const LossConfig& cfg,
                            const OptimizeOptions& opts) {
    if (data.rows() < 1) throw ConfigError("optimize: empty data");
    auto work = init.clone_map();
    std::vector<double> theta0(init.params().begin(), init.params().end());

    OptimizationResult best = solve_once(*work, theta0, data, cfg, opts);
    for (int r = 1; r < opts.multistart; ++r) {
        Rng rng(SeedSpec{opts.multistart_seed.master_seed,
                         opts.multistart_seed.stream_id * 131ull + static_cast<std::uint64_t>(r)});
        std::vector<double> theta_r(theta0);
        for (double& v : theta_r) v += opts.multistart_scale * rng.normal();
        OptimizationResult cand = solve_once(*work, theta_r, data, cfg, opts);
        if (cand.final_loss < best.final_loss) best = std::move(cand);
    }
    work->set_params(best.theta_hat);
    best.diagnostics = map_diagnostics(*work);
    return best;
}

bool KlCheckResult::consistent(double z) const {
    double se = std::sqrt(se_forward * se_forward + se_backward * se_backward);
    return std::abs(kl_forward - kl_backward) <= z * std::max(se, 1e-12);
}

KlCheckResult kl_change_of_variables_check(const TriangularMap& map, DensityPtr f, DensityPtr g,
                                           int n, SeedSpec seed) {
    if (n < 2) throw ConfigError("kl_change_of_variables_check: need n >= 2");
    KlCheckResult out;
    const int d = map.dim();

    auto mc = [&](const Matrix& xs, auto&& value_fn, double& mean, double& se) {
        double s1 = block_sum(xs.rows(), [&](std::int64_t i) { return value_fn(xs.row(i)); });
        double s2 = block_sum(xs.rows(), [&](std::int64_t i) {
            double v = value_fn(xs.row(i));
            return v * v;
        });
        mean = s1 / n;
        se = std::sqrt(std::max(0.0, (s2 - n * mean * mean) / (double(n) * (n - 1))));
    };

    Matrix x_fwd = f->sample(n, seed);
    mc(
        x_fwd,
        [&](std::span<const double> x) {
            std::vector<double> y(d);
            for (int k = 0; k < d; ++k) y[k] = map.component(k, x);
            return f->log_density(x) - g->log_density(y) - map.log_det_jacobian(x);
        },
        out.kl_forward, out.se_forward);

    Matrix x_bwd = f->sample(n, seed.with_stream(seed.stream_id + 1));
    mc(
        x_bwd,
        [&](std::span<const double> x) {
            // Pushforward density through the numerically inverted preimage.
            std::vector<double> y(d);
            for (int k = 0; k < d; ++k) y[k] = map.component(k, x);
            std::vector<double> xh = invert_triangular_map(map, y, 1e-11);
            double pf = pushforward_density(map, *g, xh);
            return f->log_density(x) - std::log(pf);
        },
        out.kl_backward, out.se_backward);
    return out;
}

// ---------------------------------------------------------------------------
// ComponentSliceMap
// ---------------------------------------------------------------------------

ComponentSliceMap::ComponentSliceMap(MonotoneMapSpec base, int component)
    : base_(std::move(base)), comp_(component) {
    if (component < 0 || component >= base_.dim())
        throw ConfigError("ComponentSliceMap: component out of range");
    offset_ = base_.component_offset(component);
    len_ = base_.component_param_count(component);
}

void ComponentSliceMap::set_params(std::span<const double> theta) {
    if (static_cast<int>(theta.size()) != len_)
        throw ConfigError("ComponentSliceMap::set_params: wrong length");
    std::vector<double> full(base_.params().begin(), base_.params().end());
    std::copy(theta.begin(), theta.end(), full.begin() + offset_);
    base_.set_params(full);
}

void ComponentSliceMap::map_logdet(std::span<const double> x, std::span<double> y,
                                   double& logdet) const {
    base_.map_logdet(x, y, logdet);
}

void ComponentSliceMap::map_logdet_grads(std::span<const double> x, std::span<double> y,
                                         double& logdet, std::span<double> dy,
                                         std::span<double> dlogdet) const {
    const int d = base_.dim();
    const int P = base_.param_count();
    thread_local std::vector<double> dy_full, dld_full;
    dy_full.resize(std::size_t(d) * P);
    dld_full.resize(P);
    base_.map_logdet_grads(x, y, logdet, dy_full, dld_full);
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < len_; ++i)
            dy[std::size_t(k) * len_ + i] = dy_full[std::size_t(k) * P + offset_ + i];
    for (int i = 0; i < len_; ++i) dlogdet[i] = dld_full[offset_ + i];
}

std::unique_ptr<FittableMap> ComponentSliceMap::clone_map() const {
    return std::make_unique<ComponentSliceMap>(*this);
}

nlohmann::json ComponentSliceMap::to_json() const {
    nlohmann::json j = base_.to_json();
    j["slice_component"] = comp_;
    return j;
}

}  // namespace triflow
