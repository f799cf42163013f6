#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sstqr {

/// Neumaier-compensated accumulator. Sums are reproducible for a fixed input
/// order and stable (to ~1e-15 relative) under reordering, which backs the
/// order-independence contracts on log-likelihood and metric aggregation.
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double kahan_total(const std::vector<double>& xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

/// splitmix64 step; used to derive independent sub-streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// k-th derived seed of a root seed (k = 0, 1, ...). Deterministic and
/// platform-independent; replications and benchmark cells use disjoint k.
inline std::uint64_t substream_seed(std::uint64_t root, std::uint64_t k) {
  std::uint64_t state = root;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t i = 0; i < k; ++i) out = splitmix64(state);
  return out;
}

/// Deterministic uniform RNG. mt19937_64 output is pinned by the standard and
/// the 53-bit mapping below is explicit, so identical seeds give bit-identical
/// streams on every platform (std::uniform_real_distribution does not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sstqr
