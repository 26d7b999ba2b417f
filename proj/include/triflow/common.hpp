#ifndef TRIFLOW_COMMON_HPP_
#define TRIFLOW_COMMON_HPP_

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace triflow {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// Error taxonomy.  Every throwing operation in the library uses one of
// these so callers can distinguish bad inputs from numerical failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct SupportError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct SingularMatrixError : Error {
    using Error::Error;
};
struct HypothesisError : Error {
    using Error::Error;
};
struct BracketError : Error {
    using Error::Error;
};
struct MonotonicityError : Error {
    using Error::Error;
};
struct UnsupportedError : Error {
    using Error::Error;
};

/// Axis-aligned box, the compact support used throughout.
struct SupportBox {
    std::vector<double> lower;
    std::vector<double> upper;

    SupportBox() = default;
    SupportBox(std::vector<double> lo, std::vector<double> hi)
        : lower(std::move(lo)), upper(std::move(hi)) {
        if (lower.size() != upper.size())
            throw ConfigError("SupportBox: lower/upper length mismatch");
        for (std::size_t k = 0; k < lower.size(); ++k)
            if (!(lower[k] < upper[k]))
                throw ConfigError("SupportBox: lower[k] must be < upper[k]");
    }

    int dim() const { return static_cast<int>(lower.size()); }
    double width(int k) const { return upper[k] - lower[k]; }

    bool contains(std::span<const double> x, double tol = 0.0) const {
        for (int k = 0; k < dim(); ++k)
            if (x[k] < lower[k] - tol || x[k] > upper[k] + tol) return false;
        return true;
    }

    // Clamps x onto the closed box; boundary values are treated as limits.
    void clamp(std::span<double> x) const {
        for (int k = 0; k < dim(); ++k) {
            if (x[k] < lower[k]) x[k] = lower[k];
            if (x[k] > upper[k]) x[k] = upper[k];
        }
    }

    static SupportBox unit(int d) {
        return SupportBox(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
    }
    static SupportBox centered(int d, double half_width) {
        return SupportBox(std::vector<double>(d, -half_width),
                          std::vector<double>(d, half_width));
    }

    bool operator==(const SupportBox& o) const {
        return lower == o.lower && upper == o.upper;
    }
};

/// Row-major dense matrix of doubles; rows are observations.
class Matrix {
  public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, 0.0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return data_[std::size_t(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[std::size_t(i) * cols_ + j]; }

    std::span<double> row(int i) { return {data_.data() + std::size_t(i) * cols_, std::size_t(cols_)}; }
    std::span<const double> row(int i) const {
        return {data_.data() + std::size_t(i) * cols_, std::size_t(cols_)};
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    /// Returns a copy with columns rearranged: out(i,k) = in(i, perm[k]).
    Matrix permuted_columns(const std::vector<int>& perm) const {
        Matrix out(rows_, cols_);
        for (int i = 0; i < rows_; ++i)
            for (int k = 0; k < cols_; ++k) out(i, k) = (*this)(i, perm[k]);
        return out;
    }

    /// FNV-1a over the raw bytes; used to verify paired experiment designs.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        const unsigned char* p = reinterpret_cast<const unsigned char*>(data_.data());
        std::size_t n = data_.size() * sizeof(double);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
        return h;
    }

  private:
    int rows_, cols_;
    std::vector<double> data_;
};

}  // namespace triflow

#endif  // TRIFLOW_COMMON_HPP_
