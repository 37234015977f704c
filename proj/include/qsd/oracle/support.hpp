#pragma once

#include <cstddef>
#include <optional>
#include <unordered_map>
#include <vector>

#include "qsd/state.hpp"

namespace qsd::oracle {

/// Ordered finite set of distinct states with O(1) index lookup.
class Support {
 public:
  Support() = default;
  explicit Support(std::vector<State> states) {
    for (auto& s : states) push_back(std::move(s));
  }

  /// Appends `s`; throws ModelError on a duplicate.
  std::size_t push_back(State s) {
    const std::size_t idx = states_.size();
    if (!index_.emplace(s, idx).second) throw ModelError("duplicate support state " + s.to_string());
    states_.push_back(std::move(s));
    return idx;
  }

  std::size_t size() const noexcept { return states_.size(); }
  bool empty() const noexcept { return states_.empty(); }
  const State& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<State>& states() const noexcept { return states_; }

  std::optional<std::size_t> find(const State& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  Support restricted(const std::vector<std::size_t>& indices) const {
    Support out;
    for (auto i : indices) out.push_back(states_[i]);
    return out;
  }

 private:
  std::vector<State> states_;
  std::unordered_map<State, std::size_t, StateHash> index_;
};

}  // namespace qsd::oracle
