#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace spidereval {

/// PCG32 (XSH-RR variant, 64-bit LCG state, 32-bit output).
///
/// Chosen over the std:: engines + distributions because the output of
/// std::uniform_real_distribution and friends differs between standard
/// library implementations; every draw here is fully specified, so plans,
/// bootstraps and synthetic data are identical across platforms.
class Pcg32 {
 public:
  using result_type = std::uint32_t;

  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0xda3e39cb94b95bdbULL);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }

  result_type operator()();

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double low, double high) { return low + (high - low) * uniform(); }
  /// Uniform integer on [0, bound) without modulo bias (Lemire's method).
  std::uint32_t bounded(std::uint32_t bound);
  /// Standard normal via Box-Muller (one value per call).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t increment_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent substream seed from (master, purpose tag, index).
/// Every stochastic step keys its generator this way, which keeps results
/// independent of thread count and scheduling order.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

inline Pcg32 make_rng(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
  return Pcg32(derive_seed(master, tag, index));
}

/// Fisher-Yates shuffle driven by Pcg32::bounded.
template <class T>
void shuffle(std::vector<T>& items, Pcg32& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = rng.bounded(static_cast<std::uint32_t>(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

/// Draws `count` distinct indices from [0, population) and returns them sorted.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    Pcg32& rng);

}  // namespace spidereval
