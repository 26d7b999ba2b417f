#ifndef TRIFLOW_RNG_HPP_
#define TRIFLOW_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace triflow {

/// (master_seed, stream_id) fully determines every random draw downstream.
/// Streams are independent: replicate r conventionally uses stream_id = r
/// off the experiment's master seed, so results are bit-reproducible
/// regardless of execution order or thread count.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    SeedSpec with_stream(std::uint64_t s) const { return SeedSpec{master_seed, s}; }
};

namespace detail {
inline std::uint64_t splitmix_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based generator: the stream start point is a hash of
// (master_seed, stream_id), then each draw advances a private counter by
// the splitmix64 increment.  Fully specified here, so output is identical
// across platforms and runs; no std::*_distribution is ever used.
class Rng {
  public:
    explicit Rng(SeedSpec seed) {
        std::uint64_t a = detail::splitmix_finalize(seed.master_seed + 0x9E3779B97F4A7C15ull);
        std::uint64_t b = detail::splitmix_finalize(seed.stream_id ^ 0xD1B54A32D192ED03ull);
        state_ = detail::splitmix_finalize(a ^ (b + 0x2545F4914F6CDD1Dull));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return detail::splitmix_finalize(state_);
    }

    /// Uniform on the open interval (0,1).
    double uniform01() {
        return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (two uniforms per draw, no caching).
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Index in [0, n) proportional to the given nonnegative weights.
    int categorical(const double* weights, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += weights[i];
        double u = uniform01() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += weights[i];
            if (u <= acc) return i;
        }
        return n - 1;
    }

  private:
    std::uint64_t state_;
};

}  // namespace triflow

#endif  // TRIFLOW_RNG_HPP_
