#ifndef TRIFLOW_CORE_HPP_
#define TRIFLOW_CORE_HPP_

#include <string>
#include <vector>

#include "triflow/common.hpp"

namespace triflow {

/// Dense upper-triangular matrix; entries strictly below the diagonal are
/// zero by construction.
class UpperTriangularMatrix {
  public:
    explicit UpperTriangularMatrix(int dim) : dim_(dim), entries_(std::size_t(dim) * dim, 0.0) {
        if (dim < 1) throw ConfigError("UpperTriangularMatrix: dim must be positive");
    }

    static UpperTriangularMatrix identity(int dim) {
        UpperTriangularMatrix a(dim);
        for (int i = 0; i < dim; ++i) a.set(i, i, 1.0);
        return a;
    }

    int dim() const { return dim_; }

    double operator()(int i, int j) const { return entries_[std::size_t(i) * dim_ + j]; }

    void set(int i, int j, double v) {
        if (i > j && v != 0.0)
            throw ConfigError("UpperTriangularMatrix: below-diagonal entry must be zero");
        entries_[std::size_t(i) * dim_ + j] = v;
    }

  private:
    int dim_;
    std::vector<double> entries_;
};

/// Inverse by back-substitution, column by column.  Throws
/// SingularMatrixError when any |diagonal| < 1e-300.
UpperTriangularMatrix invert_upper_triangular(const UpperTriangularMatrix& a);

/// Verifies the inverse-entry bounds for a matrix with superdiagonal
/// entries |A_ij| <= L and diagonal |A_jj| >= 1/M: the inverse diagonal is
/// bounded by M and |A^-1_ij| <= M^2 L (ML+1)^(j-i-1) above it.  Throws
/// HypothesisError when A does not satisfy the preconditions, so a false
/// return always indicates a bound failure, never a bad input.
bool check_inverse_bounds(const UpperTriangularMatrix& a, double L, double M);

/// Per-coordinate smoothness orders (all >= 1).
struct SmoothnessProfile {
    std::vector<int> s;

    explicit SmoothnessProfile(std::vector<int> orders) : s(std::move(orders)) {
        if (s.empty()) throw ConfigError("SmoothnessProfile: empty");
        for (int v : s)
            if (v < 1) throw ConfigError("SmoothnessProfile: every order must be >= 1");
    }
    int dim() const { return static_cast<int>(s.size()); }
};

enum class RateRegime { Smooth, Critical, Rough };

struct RateExponent {
    int k;        // 1-based coordinate index
    int d_k;      // d - k + 1
    double sigma_k;
    RateRegime regime;

    /// "n^{-1/2}", "n^{-1/2} log n", or "n^{-sigma/d}" with numbers filled in.
    std::string rate_label() const;
};

/// For each k: d_k = d-k+1, sigma_k = d_k / sum_{j>=k} 1/s_j, and the
/// regime split d_k <2sigma_k / =2sigma_k / >2sigma_k.  The comparison is
/// exact (integer rational arithmetic), so critical profiles like
/// s=(1,1) are classified without floating-point ambiguity.
std::vector<RateExponent> rate_exponents(const SmoothnessProfile& profile);

/// Permutation of {0,..,d-1}; perm[position] = original coordinate index.
struct Ordering {
    std::vector<int> perm;

    explicit Ordering(std::vector<int> p);
    int dim() const { return static_cast<int>(perm.size()); }
    static Ordering identity(int d);
    Ordering inverse() const;
    bool is_identity() const;
};

/// Arranges coordinates in nondecreasing smoothness (stable: ties keep the
/// original index order, so equal-smoothness profiles leave data untouched).
Ordering best_ordering(const SmoothnessProfile& profile);

}  // namespace triflow

#endif  // TRIFLOW_CORE_HPP_
