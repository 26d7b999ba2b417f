#include "triflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

namespace triflow {

UpperTriangularMatrix invert_upper_triangular(const UpperTriangularMatrix& a) {
    const int d = a.dim();
    for (int j = 0; j < d; ++j)
        if (std::abs(a(j, j)) < 1e-300)
            throw SingularMatrixError("invert_upper_triangular: diagonal entry ~ 0");

    UpperTriangularMatrix inv(d);
    // Solve A x = e_j for each column j, from the diagonal upward.
    for (int j = 0; j < d; ++j) {
        inv.set(j, j, 1.0 / a(j, j));
        for (int i = j - 1; i >= 0; --i) {
            double acc = 0.0;
            for (int m = i + 1; m <= j; ++m) acc += a(i, m) * inv(m, j);
            inv.set(i, j, -acc / a(i, i));
        }
    }
    return inv;
}

bool check_inverse_bounds(const UpperTriangularMatrix& a, double L, double M) {
    if (!(L > 0.0) || !(M > 0.0))
        throw HypothesisError("check_inverse_bounds: L and M must be positive");
    const int d = a.dim();
    const double tol = 1e-12;
    for (int i = 0; i < d; ++i) {
        if (std::abs(a(i, i)) < (1.0 / M) * (1.0 - tol))
            throw HypothesisError("check_inverse_bounds: |A_jj| < 1/M");
        for (int j = i + 1; j < d; ++j)
            if (std::abs(a(i, j)) > L * (1.0 + tol))
                throw HypothesisError("check_inverse_bounds: |A_ij| > L");
    }

    UpperTriangularMatrix inv = invert_upper_triangular(a);
    // Slack absorbs roundoff in the computed inverse at equality cases.
    const double slack = 1.0 + 1e-9;
    for (int j = 0; j < d; ++j)
        if (std::abs(inv(j, j)) > M * slack + 1e-12) return false;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            double bound = M * M * L * std::pow(M * L + 1.0, j - i - 1);
            if (std::abs(inv(i, j)) > bound * slack + 1e-12) return false;
        }
    return true;
}

std::string RateExponent::rate_label() const {
    std::ostringstream os;
    switch (regime) {
        case RateRegime::Smooth:
            os << "n^{-1/2}";
            break;
        case RateRegime::Critical:
            os << "n^{-1/2} log n";
            break;
        case RateRegime::Rough:
            os << "n^{-" << sigma_k << "/" << d_k << "}";
            break;
    }
    return os.str();
}

std::vector<RateExponent> rate_exponents(const SmoothnessProfile& profile) {
    const int d = profile.dim();
    std::vector<RateExponent> out;
    out.reserve(d);
    for (int k = 1; k <= d; ++k) {
        const int d_k = d - k + 1;
        // H = sum_{j=k}^d 1/s_j as an exact rational num/den.
        // d_k < 2 sigma_k  <=>  H < 2, and similarly for the other regimes.
        std::int64_t num = 0, den = 1;
        double harmonic = 0.0;
        bool exact = true;
        for (int j = k; j <= d; ++j) {
            const std::int64_t s = profile.s[j - 1];
            harmonic += 1.0 / double(s);
            if (exact) {
                __int128 nn = static_cast<__int128>(num) * s + den;
                __int128 dd = static_cast<__int128>(den) * s;
                if (dd > static_cast<__int128>(1) << 62) {
                    exact = false;
                } else {
                    num = static_cast<std::int64_t>(nn);
                    den = static_cast<std::int64_t>(dd);
                    std::int64_t g = std::gcd(num, den);
                    num /= g;
                    den /= g;
                }
            }
        }
        RateExponent e;
        e.k = k;
        e.d_k = d_k;
        e.sigma_k = double(d_k) / harmonic;
        if (exact) {
            if (num < 2 * den)
                e.regime = RateRegime::Smooth;
            else if (num == 2 * den)
                e.regime = RateRegime::Critical;
            else
                e.regime = RateRegime::Rough;
        } else {
            const double eps = 1e-12;
            if (harmonic < 2.0 - eps)
                e.regime = RateRegime::Smooth;
            else if (harmonic > 2.0 + eps)
                e.regime = RateRegime::Rough;
            else
                e.regime = RateRegime::Critical;
        }
        out.push_back(e);
    }
    return out;
}

Ordering::Ordering(std::vector<int> p) : perm(std::move(p)) {
    const int d = static_cast<int>(perm.size());
    std::vector<bool> seen(d, false);
    for (int v : perm) {
        if (v < 0 || v >= d || seen[v]) throw ConfigError("Ordering: not a permutation");
        seen[v] = true;
    }
}

Ordering Ordering::identity(int d) {
    std::vector<int> p(d);
    std::iota(p.begin(), p.end(), 0);
    return Ordering(std::move(p));
}

Ordering Ordering::inverse() const {
    std::vector<int> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
    return Ordering(std::move(inv));
}

bool Ordering::is_identity() const {
    for (std::size_t i = 0; i < perm.size(); ++i)
        if (perm[i] != static_cast<int>(i)) return false;
    return true;
}

Ordering best_ordering(const SmoothnessProfile& profile) {
    std::vector<int> idx(profile.dim());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return profile.s[a] < profile.s[b]; });
    return Ordering(std::move(idx));
}

}  // namespace triflow
