#pragma once

#include <string>
#include <vector>

namespace switchsynth {

/// Finite sequence of 1-based mode indices, each applied for one sampling period.
struct Pattern {
  std::vector<int> modes;

  std::size_t size() const noexcept { return modes.size(); }
  bool empty() const noexcept { return modes.empty(); }
  Pattern extended(int mode) const {
    Pattern p = *this;
    p.modes.push_back(mode);
    return p;
  }
  friend bool operator==(const Pattern&, const Pattern&) = default;
  /// Shorter first, then lexicographic.
  friend bool operator<(const Pattern& a, const Pattern& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.modes < b.modes;
  }
};

/// "(1,2,2)"; the empty pattern is "()".
inline std::string to_string(const Pattern& p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.modes.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(p.modes[i]);
  }
  return s + ")";
}

}  // namespace switchsynth
