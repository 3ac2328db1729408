#pragma once

#include <numeric>
#include <span>
#include <vector>

namespace cacq {

/// Probability mass over 0..size()-1.
using Pmf = std::vector<double>;

inline Pmf convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  Pmf out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

inline double total_mass(std::span<const double> p) {
  return std::accumulate(p.begin(), p.end(), 0.0);
}

inline double pmf_mean(std::span<const double> p) {
  double m = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) m += static_cast<double>(i) * p[i];
  return m;
}

}  // namespace cacq
