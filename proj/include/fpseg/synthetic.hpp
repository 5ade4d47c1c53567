#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fpseg {

/// Poisson counts with `peaks` planted peaks (2 * peaks changes) evenly
/// spaced: background rate, then alternating peak/background segments.
inline std::vector<double> synthetic_peaks(int n, std::uint64_t seed, int peaks = 4, double background = 2.0,
                                           double peak = 10.0) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> low(background);
  std::poisson_distribution<int> high(peak);
  const int segments = 2 * peaks + 1;
  std::vector<double> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int seg = static_cast<int>(static_cast<long long>(i) * segments / n);
    y[static_cast<std::size_t>(i)] = seg % 2 == 1 ? high(rng) : low(rng);
  }
  return y;
}

}  // namespace fpseg
