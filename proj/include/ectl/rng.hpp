// Counter-based deterministic randomness and the truncated discrete Gaussian
// sampler used for keys and encryption noise.
//
// Reproducibility contract: a CounterRng is a pure function of (seed,
// counter), so every run with the same seed consumes the identical stream
// regardless of platform.  One instance per worker; instances are never
// shared across threads.  No cryptographic strength is claimed.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ectl/common.hpp"

namespace ectl {

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + (++ctr_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform residue in [0, 2^bits); bits <= 63.
  std::uint64_t next_residue(std::uint64_t mask) { return next_u64() & mask; }

  double next_unit() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

// Zero-mean discrete Gaussian on the integers, truncated to |e| <= k0*sigma.
// Sampling is by inverse CDF over the full (small) support, which turns the
// usual "neglect the tail" argument into a hard guarantee on every sample.
class DiscreteGaussian {
 public:
  DiscreteGaussian(double sigma, int k0) {
    if (!(sigma > 0) || k0 < 1)
      throw ValidationError("DiscreteGaussian: need sigma > 0 and k0 >= 1");
    bound_ = static_cast<int>(std::floor(k0 * sigma));
    std::vector<double> w(2 * bound_ + 1);
    double total = 0;
    for (int i = -bound_; i <= bound_; ++i) {
      w[i + bound_] = std::exp(-0.5 * i * i / (sigma * sigma));
      total += w[i + bound_];
    }
    cdf_.resize(w.size());
    double acc = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i] / total;
      cdf_[i] = acc;
    }
    cdf_.back() = 1.0;
  }

  int bound() const { return bound_; }

  int sample(CounterRng& rng) const {
    const double u = rng.next_unit();
    std::size_t lo = 0, hi = cdf_.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (cdf_[mid] > u)
        hi = mid;
      else
        lo = mid + 1;
    }
    return static_cast<int>(lo) - bound_;
  }

 private:
  int bound_;
  std::vector<double> cdf_;
};

}  // namespace ectl
