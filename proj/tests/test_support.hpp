#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fpseg/fpseg.hpp"

namespace fpseg::testing {

inline bool close(double a, double b, double rel = 1e-9, double abs_floor = 1.0) {
  if (a == b) return true;
  return std::abs(a - b) <= rel * std::max({abs_floor, std::abs(a), std::abs(b)});
}

template <LossPolicy Loss>
double random_value(std::mt19937_64& rng) {
  if constexpr (Loss::family == LossFamily::Square) {
    return std::uniform_real_distribution<double>(0.0, 10.0)(rng);
  } else {
    return static_cast<double>(std::uniform_int_distribution<int>(0, 8)(rng));
  }
}

template <LossPolicy Loss>
std::vector<double> random_values(std::mt19937_64& rng, int n) {
  std::vector<double> y(static_cast<std::size_t>(n));
  for (double& v : y) v = random_value<Loss>(rng);
  return y;
}

/// A cost function shaped like the ones the solvers produce: a few rounds of
/// constrained minimization, pointwise minimum and added data terms.
template <LossPolicy Loss>
PiecewiseCost<Loss> random_cost(std::mt19937_64& rng, int steps = 6) {
  auto y = random_values<Loss>(rng, steps);
  y.push_back(0.0);
  y.push_back(Loss::family == LossFamily::Square ? 10.0 : 8.0);
  const auto [lo, hi] = mean_domain<Loss>(WeightedSequence::unit(y));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto f = one_piece<Loss>(y[0], 0.5 + unit(rng), lo, hi);
  for (int t = 1; t < steps; ++t) {
    PiecewiseCost<Loss> g;
    const double op = unit(rng);
    if (op < 0.4) {
      g = min_less(t, f);
    } else if (op < 0.8) {
      g = min_more(t, f);
    } else {
      g = min_unconstrained(t, f);
    }
    g.add_constant(unit(rng) * 2.0);
    f = min_of_two(g, f, true);
    f = add_loss(f, y[static_cast<std::size_t>(t)], 0.5 + unit(rng));
  }
  return f;
}

/// Evenly spaced coordinates over the finite part of f's domain.
template <LossPolicy Loss>
std::vector<double> coord_grid(const PiecewiseCost<Loss>& f, int points) {
  double lo = f.lower();
  const double hi = f.upper();
  if (!std::isfinite(lo)) lo = hi - 12.0;
  std::vector<double> g;
  for (int i = 0; i < points; ++i) g.push_back(lo + (hi - lo) * i / (points - 1));
  return g;
}

/// Value of f at x, with the tolerance scale used by the property checks.
inline double tol(double v, double rel = 1e-8) { return rel * std::max(1.0, std::abs(v)); }

}  // namespace fpseg::testing
