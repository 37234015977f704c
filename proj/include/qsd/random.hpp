#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace qsd {

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based random stream.
///
/// The n-th output is a keyed hash of (key, n), so a stream is fully
/// described by its key and counter. Child streams are derived from the
/// key alone; splitting never consumes draws from the parent. This is what
/// makes replica results independent of how replicas are scheduled.
///
/// Satisfies std::uniform_random_bit_generator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key = 0) noexcept : key_(detail::mix64(key ^ 0x6a09e667f3bcc909ULL)) {}

  /// Stream for replica `index` of an experiment seeded with `seed`.
  static RandomStream for_replica(std::uint64_t seed, std::uint64_t index) noexcept {
    return RandomStream(seed).split(index);
  }

  /// Independent child stream; the parent's counter is untouched.
  [[nodiscard]] RandomStream split(std::uint64_t index) const noexcept {
    RandomStream child;
    child.key_ = detail::mix64(key_ + detail::mix64(index + 0x9e3779b97f4a7c15ULL));
    return child;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t c = counter_++;
    return detail::mix64(detail::mix64(c ^ key_) + key_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Exponential with rate 1.
  double exponential() noexcept { return -std::log1p(-uniform()); }

  /// Standard normal (Box-Muller, the second variate is cached).
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  friend bool operator==(const RandomStream& a, const RandomStream& b) noexcept {
    return a.key_ == b.key_ && a.counter_ == b.counter_ && a.has_spare_ == b.has_spare_ &&
           (!a.has_spare_ || a.spare_ == b.spare_);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fisher-Yates shuffle driven by a RandomStream (portable across standard libraries).
template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, RandomStream& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const std::uint64_t j = rng.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace qsd
