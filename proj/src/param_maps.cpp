#include "triflow/param_maps.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "triflow/quadrature.hpp"

namespace triflow {

namespace {
constexpr double kSquareFloor = 1e-6;

double dot(const double* a, const double* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}
}  // namespace

IntegrandForm integrand_form_from_string(const std::string& s) {
    if (s == "exp") return IntegrandForm::Exp;
    if (s == "square") return IntegrandForm::Square;
    throw ConfigError("integrand_form must be 'exp' or 'square'");
}

std::string to_string(IntegrandForm f) {
    return f == IntegrandForm::Exp ? "exp" : "square";
}

// ---------------------------------------------------------------------------
// MonotoneMapSpec
// ---------------------------------------------------------------------------

struct MonotoneMapSpec::Scratch {
    std::vector<double> tail, tail_d, chat, chat_d, diag, diag_d, diag_x, u;
};

namespace {
MonotoneMapSpec::Scratch& scratch() {
    thread_local MonotoneMapSpec::Scratch ws;
    return ws;
}
}  // namespace

MonotoneMapSpec::MonotoneMapSpec(SupportBox support_in, SupportBox support_out,
                                 std::vector<int> diag_degs,
                                 std::vector<std::vector<int>> tail_degs, IntegrandForm form)
    : d_(support_in.dim()), in_(std::move(support_in)), out_(std::move(support_out)),
      form_(form) {
    if (out_.dim() != d_) throw ConfigError("MonotoneMapSpec: support dimension mismatch");
    if (static_cast<int>(diag_degs.size()) != d_ || static_cast<int>(tail_degs.size()) != d_)
        throw ConfigError("MonotoneMapSpec: need one degree spec per component");
    int offset = 0;
    for (int k = 0; k < d_; ++k) {
        if (diag_degs[k] < 0) throw ConfigError("MonotoneMapSpec: negative degree");
        if (static_cast<int>(tail_degs[k].size()) != d_ - 1 - k)
            throw ConfigError("MonotoneMapSpec: tail_degs[k] must have d-1-k entries");
        Component c;
        c.deg = diag_degs[k];
        c.tail_degs = tail_degs[k];
        c.tail_size = 1;
        for (int t : c.tail_degs) {
            if (t < 0) throw ConfigError("MonotoneMapSpec: negative tail degree");
            c.tail_size *= t + 1;
        }
        c.a_count = c.tail_size;
        c.p_count = (c.deg + 1) * c.tail_size;
        c.offset = offset;
        offset += c.a_count + c.p_count;
        comps_.push_back(std::move(c));
    }
    theta_.assign(offset, 0.0);
}

MonotoneMapSpec MonotoneMapSpec::uniform_degrees(SupportBox support_in, SupportBox support_out,
                                                 int deg, int tail_deg, IntegrandForm form) {
    const int d = support_in.dim();
    std::vector<int> degs(d, deg);
    std::vector<std::vector<int>> tails(d);
    for (int k = 0; k < d; ++k) tails[k].assign(d - 1 - k, tail_deg);
    return MonotoneMapSpec(std::move(support_in), std::move(support_out), std::move(degs),
                           std::move(tails), form);
}

MonotoneMapSpec MonotoneMapSpec::identity(const SupportBox& box, int deg, int tail_deg,
                                          IntegrandForm form) {
    MonotoneMapSpec spec = uniform_degrees(box, box, deg, tail_deg, form);
    spec.set_affine_init(1.0);
    return spec;
}

void MonotoneMapSpec::set_affine_init(double shrink) {
    if (!(shrink > 0.0 && shrink <= 1.0)) throw ConfigError("affine init: shrink in (0,1]");
    std::fill(theta_.begin(), theta_.end(), 0.0);
    for (int k = 0; k < d_; ++k) {
        const Component& c = comps_[k];
        double center = 0.5 * (out_.lower[k] + out_.upper[k]);
        double half = 0.5 * shrink * out_.width(k);
        double rate = 2.0 * half / in_.width(k);
        theta_[c.offset] = center - half;  // constant term of a_k
        double p0 = form_ == IntegrandForm::Exp ? std::log(rate)
                                                : std::sqrt(std::max(rate - kSquareFloor, 0.0));
        theta_[c.offset + c.a_count] = p0;  // constant term of p_k
    }
}

void MonotoneMapSpec::set_params(std::span<const double> theta) {
    if (static_cast<int>(theta.size()) != param_count())
        throw ConfigError("set_params: wrong length");
    std::copy(theta.begin(), theta.end(), theta_.begin());
}

std::unique_ptr<FittableMap> MonotoneMapSpec::clone_map() const {
    return std::make_unique<MonotoneMapSpec>(*this);
}

double MonotoneMapSpec::rho_of_p(double p) const {
    return form_ == IntegrandForm::Exp ? std::exp(p) : p * p + kSquareFloor;
}
double MonotoneMapSpec::drho_dp(double p) const {
    return form_ == IntegrandForm::Exp ? std::exp(p) : 2.0 * p;
}
double MonotoneMapSpec::dlnrho_dp(double p) const {
    return form_ == IntegrandForm::Exp ? 1.0 : 2.0 * p / (p * p + kSquareFloor);
}

void MonotoneMapSpec::check_point(std::span<const double> x) const {
    if (!in_.contains(x, 1e-9 * (1.0 + std::abs(in_.upper[0]))))
        throw SupportError("MonotoneMapSpec: point outside support_in");
}

void MonotoneMapSpec::tail_basis(int k, std::span<const double> x, int deriv_dim,
                                 std::vector<double>& out) const {
    const Component& c = comps_[k];
    out.assign(static_cast<std::size_t>(c.tail_size), 0.0);
    out[0] = 1.0;
    int cur = 1;
    double vals[64];
    double ders[64];
    for (int j = k + 1; j < d_; ++j) {
        const int nj = c.tail_degs[j - k - 1] + 1;
        const double xij = xi(j, x[j]);
        if (j == deriv_dim) {
            legendre_values_derivs(xij, nj - 1, {vals, std::size_t(nj)}, {ders, std::size_t(nj)});
            const double chain = 2.0 / in_.width(j);
            for (int v = 0; v < nj; ++v) vals[v] = ders[v] * chain;
        } else {
            legendre_values(xij, nj - 1, {vals, std::size_t(nj)});
        }
        for (int v = nj - 1; v >= 0; --v)
            for (int t = cur - 1; t >= 0; --t) out[std::size_t(v) * cur + t] = out[t] * vals[v];
        cur *= nj;
    }
}

void MonotoneMapSpec::eval_component(int k, std::span<const double> x, double& s_out,
                                     double& rho_out, double* dS_block,
                                     double* dlnrho_block) const {
    const Component& c = comps_[k];
    Scratch& ws = scratch();
    tail_basis(k, x, -1, ws.tail);
    const double* a = theta_.data() + c.offset;
    const double* cc = theta_.data() + c.offset + c.a_count;
    const int A = c.tail_size;
    const int n0 = c.deg + 1;

    double aval = dot(a, ws.tail.data(), A);
    ws.chat.assign(n0, 0.0);
    for (int i0 = 0; i0 < n0; ++i0) ws.chat[i0] = dot(cc + std::size_t(i0) * A, ws.tail.data(), A);

    const GaussLegendre& gl = gauss_legendre(kIntegrationNodes);
    const double lo = in_.lower[k];
    const double half = 0.5 * (x[k] - lo);
    const double mid = lo + half;
    ws.diag.resize(n0);
    double integral = 0.0;
    const bool want_grads = dS_block != nullptr;
    if (want_grads) ws.u.assign(n0, 0.0);
    for (int q = 0; q < kIntegrationNodes; ++q) {
        const double tq = mid + half * gl.nodes[q];
        legendre_values(xi(k, tq), c.deg, ws.diag);
        const double p = dot(ws.chat.data(), ws.diag.data(), n0);
        const double rho = rho_of_p(p);
        integral += gl.weights[q] * rho;
        if (want_grads) {
            const double dr = gl.weights[q] * drho_dp(p);
            for (int i0 = 0; i0 < n0; ++i0) ws.u[i0] += dr * ws.diag[i0];
        }
    }
    s_out = aval + half * integral;

    ws.diag_x.resize(n0);
    legendre_values(xi(k, x[k]), c.deg, ws.diag_x);
    const double px = dot(ws.chat.data(), ws.diag_x.data(), n0);
    rho_out = rho_of_p(px);

    if (dS_block) {
        for (int t = 0; t < A; ++t) dS_block[t] = ws.tail[t];
        for (int i0 = 0; i0 < n0; ++i0) {
            const double hu = half * ws.u[i0];
            for (int t = 0; t < A; ++t) dS_block[A + std::size_t(i0) * A + t] = hu * ws.tail[t];
        }
    }
    if (dlnrho_block) {
        const double dl = dlnrho_dp(px);
        for (int t = 0; t < A; ++t) dlnrho_block[t] = 0.0;
        for (int i0 = 0; i0 < n0; ++i0) {
            const double f = dl * ws.diag_x[i0];
            for (int t = 0; t < A; ++t) dlnrho_block[A + std::size_t(i0) * A + t] = f * ws.tail[t];
        }
    }
}

double MonotoneMapSpec::component(int k, std::span<const double> x) const {
    check_point(x.subspan(0, d_));
    double s, rho;
    eval_component(k, x, s, rho, nullptr, nullptr);
    return s;
}

double MonotoneMapSpec::diag_partial(int k, std::span<const double> x) const {
    check_point(x.subspan(0, d_));
    double s, rho;
    eval_component(k, x, s, rho, nullptr, nullptr);
    return rho;
}

void MonotoneMapSpec::map_logdet(std::span<const double> x, std::span<double> y,
                                 double& logdet) const {
    check_point(x.subspan(0, d_));
    logdet = 0.0;
    for (int k = 0; k < d_; ++k) {
        double s, rho;
        eval_component(k, x, s, rho, nullptr, nullptr);
        y[k] = s;
        logdet += std::log(rho);
    }
}

void MonotoneMapSpec::map_logdet_grads(std::span<const double> x, std::span<double> y,
                                       double& logdet, std::span<double> dy,
                                       std::span<double> dlogdet) const {
    check_point(x.subspan(0, d_));
    const int P = param_count();
    std::fill(dy.begin(), dy.end(), 0.0);
    std::fill(dlogdet.begin(), dlogdet.end(), 0.0);
    logdet = 0.0;
    std::vector<double> ds_block, dl_block;
    for (int k = 0; k < d_; ++k) {
        const Component& c = comps_[k];
        const int len = c.a_count + c.p_count;
        ds_block.resize(len);
        dl_block.resize(len);
        double s, rho;
        eval_component(k, x, s, rho, ds_block.data(), dl_block.data());
        y[k] = s;
        logdet += std::log(rho);
        double* dyk = dy.data() + std::size_t(k) * P;
        for (int i = 0; i < len; ++i) {
            dyk[c.offset + i] = ds_block[i];
            dlogdet[c.offset + i] += dl_block[i];
        }
    }
}

void MonotoneMapSpec::param_jacobian(std::span<const double> x, Matrix& dS, Matrix& drho) const {
    check_point(x.subspan(0, d_));
    const int P = param_count();
    dS = Matrix(d_, P);
    drho = Matrix(d_, P);
    std::vector<double> ds_block, dl_block;
    for (int k = 0; k < d_; ++k) {
        const Component& c = comps_[k];
        const int len = c.a_count + c.p_count;
        ds_block.resize(len);
        dl_block.resize(len);
        double s, rho;
        eval_component(k, x, s, rho, ds_block.data(), dl_block.data());
        for (int i = 0; i < len; ++i) {
            dS(k, c.offset + i) = ds_block[i];
            // dl_block holds d ln rho; convert to d rho = rho * d ln rho.
            drho(k, c.offset + i) = rho * dl_block[i];
        }
    }
}

void MonotoneMapSpec::x_jacobian(std::span<const double> x, Matrix& jac) const {
    check_point(x.subspan(0, d_));
    jac = Matrix(d_, d_);
    Scratch& ws = scratch();
    const GaussLegendre& gl = gauss_legendre(kIntegrationNodes);
    for (int k = 0; k < d_; ++k) {
        const Component& c = comps_[k];
        const int A = c.tail_size;
        const int n0 = c.deg + 1;
        const double* a = theta_.data() + c.offset;
        const double* cc = theta_.data() + c.offset + c.a_count;
        tail_basis(k, x, -1, ws.tail);
        ws.chat.assign(n0, 0.0);
        for (int i0 = 0; i0 < n0; ++i0)
            ws.chat[i0] = dot(cc + std::size_t(i0) * A, ws.tail.data(), A);
        double s, rho;
        eval_component(k, x, s, rho, nullptr, nullptr);
        jac(k, k) = rho;
        const double lo = in_.lower[k];
        const double half = 0.5 * (x[k] - lo);
        const double mid = lo + half;
        ws.diag.resize(n0);
        for (int l = k + 1; l < d_; ++l) {
            tail_basis(k, x, l, ws.tail_d);
            double da = dot(a, ws.tail_d.data(), A);
            ws.chat_d.assign(n0, 0.0);
            for (int i0 = 0; i0 < n0; ++i0)
                ws.chat_d[i0] = dot(cc + std::size_t(i0) * A, ws.tail_d.data(), A);
            double acc = 0.0;
            for (int q = 0; q < kIntegrationNodes; ++q) {
                const double tq = mid + half * gl.nodes[q];
                legendre_values(xi(k, tq), c.deg, ws.diag);
                const double p = dot(ws.chat.data(), ws.diag.data(), n0);
                const double dp = dot(ws.chat_d.data(), ws.diag.data(), n0);
                acc += gl.weights[q] * drho_dp(p) * dp;
            }
            jac(k, l) = da + half * acc;
        }
    }
}

void MonotoneMapSpec::lnrho_x_gradient(std::span<const double> x, Matrix& grad) const {
    check_point(x.subspan(0, d_));
    grad = Matrix(d_, d_);
    Scratch& ws = scratch();
    for (int k = 0; k < d_; ++k) {
        const Component& c = comps_[k];
        const int A = c.tail_size;
        const int n0 = c.deg + 1;
        const double* cc = theta_.data() + c.offset + c.a_count;
        tail_basis(k, x, -1, ws.tail);
        ws.chat.assign(n0, 0.0);
        for (int i0 = 0; i0 < n0; ++i0)
            ws.chat[i0] = dot(cc + std::size_t(i0) * A, ws.tail.data(), A);
        ws.diag.resize(n0);
        ws.diag_d.resize(n0);
        legendre_values_derivs(xi(k, x[k]), c.deg, ws.diag, ws.diag_d);
        const double px = dot(ws.chat.data(), ws.diag.data(), n0);
        const double dl = dlnrho_dp(px);
        grad(k, k) = dl * dot(ws.chat.data(), ws.diag_d.data(), n0) * (2.0 / in_.width(k));
        for (int l = k + 1; l < d_; ++l) {
            tail_basis(k, x, l, ws.tail_d);
            ws.chat_d.assign(n0, 0.0);
            for (int i0 = 0; i0 < n0; ++i0)
                ws.chat_d[i0] = dot(cc + std::size_t(i0) * A, ws.tail_d.data(), A);
            grad(k, l) = dl * dot(ws.chat_d.data(), ws.diag.data(), n0);
        }
    }
}

DerivativeCapReport MonotoneMapSpec::derivative_cap_diagnostic(int grid_per_axis) const {
    if (grid_per_axis < 8) throw ConfigError("derivative_cap_diagnostic: grid_per_axis >= 8");
    if (d_ > 3) throw UnsupportedError("derivative_cap_diagnostic: d <= 3");
    DerivativeCapReport rep;
    rep.min_diag = kPosInf;
    rep.max_partial = 0.0;
    std::vector<double> x(d_);
    std::vector<int> idx(d_, 0);
    Matrix jac;
    const std::int64_t total = [&] {
        std::int64_t t = 1;
        for (int k = 0; k < d_; ++k) t *= grid_per_axis;
        return t;
    }();
    for (std::int64_t it = 0; it < total; ++it) {
        std::int64_t rem = it;
        for (int k = 0; k < d_; ++k) {
            int i = static_cast<int>(rem % grid_per_axis);
            rem /= grid_per_axis;
            x[k] = in_.lower[k] + in_.width(k) * i / (grid_per_axis - 1.0);
        }
        x_jacobian(x, jac);
        for (int k = 0; k < d_; ++k) {
            rep.min_diag = std::min(rep.min_diag, jac(k, k));
            for (int l = k; l < d_; ++l)
                rep.max_partial = std::max(rep.max_partial, std::abs(jac(k, l)));
        }
    }
    return rep;
}

nlohmann::json MonotoneMapSpec::to_json() const {
    nlohmann::json j;
    j["type"] = "monotone_map";
    j["dim"] = d_;
    j["support_in"] = {{"lower", in_.lower}, {"upper", in_.upper}};
    j["support_out"] = {{"lower", out_.lower}, {"upper", out_.upper}};
    j["integrand_form"] = to_string(form_);
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : comps_) comps.push_back({{"deg", c.deg}, {"tail_degs", c.tail_degs}});
    j["components"] = comps;
    j["theta"] = theta_;
    return j;
}

MonotoneMapSpec MonotoneMapSpec::from_json(const nlohmann::json& j) {
    SupportBox in(j.at("support_in").at("lower").get<std::vector<double>>(),
                  j.at("support_in").at("upper").get<std::vector<double>>());
    SupportBox out(j.at("support_out").at("lower").get<std::vector<double>>(),
                   j.at("support_out").at("upper").get<std::vector<double>>());
    std::vector<int> degs;
    std::vector<std::vector<int>> tails;
    for (const auto& cj : j.at("components")) {
        degs.push_back(cj.at("deg").get<int>());
        tails.push_back(cj.at("tail_degs").get<std::vector<int>>());
    }
    MonotoneMapSpec spec(std::move(in), std::move(out), std::move(degs), std::move(tails),
                         integrand_form_from_string(j.at("integrand_form").get<std::string>()));
    spec.set_params(j.at("theta").get<std::vector<double>>());
    return spec;
}

// ---------------------------------------------------------------------------
// JacobianFlowSpec
// ---------------------------------------------------------------------------

JacobianFlowSpec::JacobianFlowSpec(int dim, std::vector<Matrix> orthogonals,
                                   std::vector<MonotoneMapSpec> maps)
    : d_(dim) {
    if (orthogonals.size() != maps.size() || maps.empty())
        throw ConfigError("flow: need one orthogonal matrix per block");
    for (std::size_t j = 0; j < maps.size(); ++j) {
        const Matrix& m = orthogonals[j];
        if (m.rows() != d_ || m.cols() != d_ || maps[j].dim() != d_)
            throw ConfigError("flow: block dimension mismatch");
        // Sigma^T Sigma = I to 1e-12.
        for (int a = 0; a < d_; ++a)
            for (int b = 0; b < d_; ++b) {
                double acc = 0.0;
                for (int r = 0; r < d_; ++r) acc += m(r, a) * m(r, b);
                double target = a == b ? 1.0 : 0.0;
                if (std::abs(acc - target) > 1e-12)
                    throw ConfigError("flow: matrix fails the orthogonality check");
            }
        blocks_.push_back(Block{orthogonals[j], std::move(maps[j])});
    }
    rebuild_theta();
}

void JacobianFlowSpec::rebuild_theta() {
    theta_.clear();
    for (const auto& b : blocks_) {
        auto p = b.map.params();
        theta_.insert(theta_.end(), p.begin(), p.end());
    }
}

void JacobianFlowSpec::set_params(std::span<const double> theta) {
    if (static_cast<int>(theta.size()) != param_count())
        throw ConfigError("flow set_params: wrong length");
    std::size_t at = 0;
    for (auto& b : blocks_) {
        const std::size_t len = static_cast<std::size_t>(b.map.param_count());
        b.map.set_params(theta.subspan(at, len));
        at += len;
    }
    std::copy(theta.begin(), theta.end(), theta_.begin());
}

FlowEval JacobianFlowSpec::eval_with_logdet(std::span<const double> x) const {
    FlowEval out;
    std::vector<double> cur(x.begin(), x.begin() + d_);
    std::vector<double> v(d_), y(d_);
    out.logdet = 0.0;
    for (const auto& b : blocks_) {
        for (int i = 0; i < d_; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d_; ++j) acc += b.orth(i, j) * cur[j];
            v[i] = acc;
        }
        double ld;
        b.map.map_logdet(v, y, ld);
        out.logdet += ld;
        double norm2 = 0.0;
        for (int i = 0; i < d_; ++i) norm2 += y[i] * y[i];
        out.max_block_norm = std::max(out.max_block_norm, std::sqrt(norm2));
        cur = y;
    }
    out.y = std::move(cur);
    return out;
}

void JacobianFlowSpec::map_logdet(std::span<const double> x, std::span<double> y,
                                  double& logdet) const {
    FlowEval e = eval_with_logdet(x);
    std::copy(e.y.begin(), e.y.end(), y.begin());
    logdet = e.logdet;
}

void JacobianFlowSpec::map_logdet_grads(std::span<const double> x, std::span<double> y,
                                        double& logdet, std::span<double> dy,
                                        std::span<double> dlogdet) const {
    const int P = param_count();
    std::fill(dy.begin(), dy.end(), 0.0);
    std::fill(dlogdet.begin(), dlogdet.end(), 0.0);
    logdet = 0.0;

    std::vector<double> cur(x.begin(), x.begin() + d_);
    std::vector<double> jcur(std::size_t(d_) * P, 0.0);  // d(cur)/dtheta
    std::vector<double> v(d_), yb(d_);
    std::vector<double> jv(std::size_t(d_) * P);
    std::vector<double> dyb_own(std::size_t(d_) * 1), dldb_own;
    Matrix ju, lg;
    std::vector<double> jnew(std::size_t(d_) * P);
    std::vector<double> lg_total(d_);

    int block_offset = 0;
    for (const auto& b : blocks_) {
        const int pb = b.map.param_count();
        // v = orth * cur; Jv = orth * Jcur
        for (int i = 0; i < d_; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d_; ++j) acc += b.orth(i, j) * cur[j];
            v[i] = acc;
        }
        for (int i = 0; i < d_; ++i)
            for (int p = 0; p < P; ++p) {
                double acc = 0.0;
                for (int j = 0; j < d_; ++j)
                    acc += b.orth(i, j) * jcur[std::size_t(j) * P + p];
                jv[std::size_t(i) * P + p] = acc;
            }

        double ld;
        dyb_own.assign(std::size_t(d_) * pb, 0.0);
        dldb_own.assign(pb, 0.0);
        b.map.map_logdet_grads(v, yb, ld, dyb_own, dldb_own);
        logdet += ld;

        b.map.x_jacobian(v, ju);
        b.map.lnrho_x_gradient(v, lg);
        for (int l = 0; l < d_; ++l) {
            double acc = 0.0;
            for (int k = 0; k < d_; ++k) acc += lg(k, l);
            lg_total[l] = acc;
        }
        for (int p = 0; p < P; ++p) {
            double acc = 0.0;
            for (int l = 0; l < d_; ++l) acc += lg_total[l] * jv[std::size_t(l) * P + p];
            dlogdet[p] += acc;
        }
        for (int i = 0; i < pb; ++i) dlogdet[block_offset + i] += dldb_own[i];

        // Jnew = JU * Jv, plus the block's own parameter columns.
        for (int k = 0; k < d_; ++k)
            for (int p = 0; p < P; ++p) {
                double acc = 0.0;
                for (int l = k; l < d_; ++l) acc += ju(k, l) * jv[std::size_t(l) * P + p];
                jnew[std::size_t(k) * P + p] = acc;
            }
        for (int k = 0; k < d_; ++k)
            for (int i = 0; i < pb; ++i)
                jnew[std::size_t(k) * P + block_offset + i] += dyb_own[std::size_t(k) * pb + i];

        jcur.swap(jnew);
        cur = yb;
        block_offset += pb;
    }
    std::copy(cur.begin(), cur.end(), y.begin());
    std::copy(jcur.begin(), jcur.end(), dy.begin());
}

std::unique_ptr<FittableMap> JacobianFlowSpec::clone_map() const {
    return std::make_unique<JacobianFlowSpec>(*this);
}

std::vector<double> JacobianFlowSpec::invert(std::span<const double> y, double tol) const {
    std::vector<double> cur(y.begin(), y.begin() + d_);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
        std::vector<double> u = invert_triangular_map(it->map, cur, tol);
        // cur = Sigma^T * u
        for (int i = 0; i < d_; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d_; ++j) acc += it->orth(j, i) * u[j];
            cur[i] = acc;
        }
    }
    return cur;
}

nlohmann::json JacobianFlowSpec::to_json() const {
    nlohmann::json j;
    j["type"] = "jacobian_flow";
    j["dim"] = d_;
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : blocks_) {
        nlohmann::json orth = nlohmann::json::array();
        for (int r = 0; r < d_; ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < d_; ++c) row.push_back(b.orth(r, c));
            orth.push_back(row);
        }
        blocks.push_back({{"orthogonal", orth}, {"map", b.map.to_json()}});
    }
    j["blocks"] = blocks;
    return j;
}

JacobianFlowSpec JacobianFlowSpec::from_json(const nlohmann::json& j) {
    const int d = j.at("dim").get<int>();
    std::vector<Matrix> orths;
    std::vector<MonotoneMapSpec> maps;
    for (const auto& bj : j.at("blocks")) {
        Matrix m(d, d);
        const auto& rows = bj.at("orthogonal");
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) m(r, c) = rows.at(r).at(c).get<double>();
        orths.push_back(std::move(m));
        maps.push_back(MonotoneMapSpec::from_json(bj.at("map")));
    }
    return JacobianFlowSpec(d, std::move(orths), std::move(maps));
}

Matrix JacobianFlowSpec::signed_permutation(const std::vector<int>& perm,
                                            const std::vector<int>& signs) {
    const int d = static_cast<int>(perm.size());
    Ordering check(perm);  // validates
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) {
        double s = signs.empty() ? 1.0 : static_cast<double>(signs[i]);
        if (s != 1.0 && s != -1.0) throw ConfigError("signed_permutation: signs must be +-1");
        m(i, perm[i]) = s;
    }
    return m;
}

}  // namespace triflow
