#include "qsd/state.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

#include "qsd/random.hpp"

namespace qsd {

std::string State::to_string() const {
  std::string out = "(";
  char buf[32];
  for (Eigen::Index i = 0; i < dimension(); ++i) {
    if (i > 0) out += ",";
    if (is_lattice()) {
      std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(lattice()[i]));
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", real()[i]);
    }
    out += buf;
  }
  return out + ")";
}

std::size_t StateHash::operator()(const State& s) const noexcept {
  std::uint64_t h = s.is_lattice() ? 0x1234567ULL : 0x7654321ULL;
  for (Eigen::Index i = 0; i < s.dimension(); ++i) {
    const std::uint64_t word = s.is_lattice() ? static_cast<std::uint64_t>(s.lattice()[i])
                                              : std::bit_cast<std::uint64_t>(s.real()[i] + 0.0);
    h = detail::mix64(h ^ (word + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  }
  return static_cast<std::size_t>(h);
}

}  // namespace qsd
