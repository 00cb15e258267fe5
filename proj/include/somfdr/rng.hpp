#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace somfdr {

/// Counter-based 64-bit generator (SplitMix64). The n-th output is a pure
/// function of (key, n), so streams are cheap to derive and fully reproducible.
class splitmix64 {
 public:
  using result_type = std::uint64_t;

  explicit splitmix64(std::uint64_t key = 0) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix(key_ + (++counter_) * kGolden); }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// 64-bit FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Child seed for substream `index` of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64::mix(seed ^ splitmix64::mix(index + 0x632BE59BD9B4E019ULL));
}

/// Per-gene substream key: seed xor hash(gene_id), so draws do not depend on gene order.
constexpr std::uint64_t gene_stream_key(std::uint64_t seed, std::string_view gene_id) noexcept {
  return splitmix64::mix(seed ^ fnv1a64(gene_id));
}

}  // namespace somfdr
