#pragma once

// Loss policies. A policy fixes the coefficient layout of one convex piece,
// the coordinate in which piece intervals are stored, and the closed-form or
// iterative primitives (evaluation, minimizer, level-set roots) the piecewise
// algebra is built from.
//
//   SquareLoss:  coordinate x = mu,      piece = quadratic*x^2 + linear*x + constant
//   PoissonLoss: coordinate x = log(mu), piece = linear*exp(x) + log*x + constant
//
// Poisson intervals live in log-mean space so that mu = 0 is the finite-cost
// limit x = -inf.

#include <algorithm>
#include <array>
#include <concepts>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "fpseg/error.hpp"

namespace fpseg {

enum class LossFamily : std::uint8_t { Square, Poisson };

inline std::string_view loss_name(LossFamily family) {
  return family == LossFamily::Square ? "square" : "poisson";
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Root finding stops once |cost - level| falls below this.
inline constexpr double kRootTolerance = 1e-12;
inline constexpr int kMaxNewtonSteps = 200;

/// Zero, one or two real solutions, increasing.
struct Roots {
  std::array<double, 2> values{};
  int count = 0;

  void push(double x) { values[static_cast<std::size_t>(count++)] = x; }
  const double* begin() const { return values.data(); }
  const double* end() const { return values.data() + count; }
  bool empty() const { return count == 0; }
  double front() const { return values[0]; }
  double back() const { return values[static_cast<std::size_t>(count - 1)]; }
};

namespace detail {

// a*b - c*d with ~1 ulp error.
inline double diff_of_products(double a, double b, double c, double d) {
  const double w = d * c;
  const double e = std::fma(-d, c, w);
  const double f = std::fma(a, b, -w);
  return f + e;
}

// Newton iteration kept inside a sign-changing bracket [lo, hi]; a step that
// leaves the bracket (or a vanishing derivative) is replaced by bisection.
// `increasing` tells which end of the bracket has the negative value.
template <class F, class D>
double safeguarded_newton(F&& value, D&& deriv, double lo, double hi, double guess, bool increasing) {
  double x = (guess > lo && guess < hi) ? guess : 0.5 * (lo + hi);
  double best = x;
  double best_abs = kInf;
  for (int step = 0; step < kMaxNewtonSteps; ++step) {
    const double fx = value(x);
    if (std::abs(fx) < best_abs) {
      best_abs = std::abs(fx);
      best = x;
    }
    if (best_abs < kRootTolerance) break;
    if ((fx < 0) == increasing) {
      lo = x;
    } else {
      hi = x;
    }
    if (!(hi - lo > 4 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)))) break;
    const double d = deriv(x);
    double next = (d != 0) ? x - fx / d : lo;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return best;
}

}  // namespace detail

struct SquareLoss {
  static constexpr LossFamily family = LossFamily::Square;
  static constexpr bool supports_shift = true;

  struct Coeffs {
    double quadratic = 0;
    double linear = 0;
    double constant = 0;

    friend bool operator==(const Coeffs&, const Coeffs&) = default;
  };

  static Coeffs data_term(double y, double weight) {
    return {weight, -2 * weight * y, weight * y * y};
  }
  static Coeffs constant(double c) { return {0, 0, c}; }
  static Coeffs infinite() { return {0, 0, kInf}; }
  static bool is_infinite(const Coeffs& c) { return c.constant == kInf; }
  static bool is_flat(const Coeffs& c) { return c.quadratic == 0 && c.linear == 0; }

  static Coeffs add(const Coeffs& a, const Coeffs& b) {
    return {a.quadratic + b.quadratic, a.linear + b.linear, a.constant + b.constant};
  }
  static Coeffs subtract(const Coeffs& a, const Coeffs& b) {
    return {a.quadratic - b.quadratic, a.linear - b.linear, a.constant - b.constant};
  }
  static Coeffs scale(const Coeffs& a, double s) {
    return {a.quadratic * s, a.linear * s, a.constant * s};
  }
  static Coeffs add_constant(Coeffs a, double c) {
    a.constant += c;
    return a;
  }

  static double eval(const Coeffs& c, double x) { return (c.quadratic * x + c.linear) * x + c.constant; }
  static double slope(const Coeffs& c, double x) { return 2 * c.quadratic * x + c.linear; }

  /// Stationary point in coordinate space: nullopt for a flat piece, -inf for
  /// an increasing line, +inf for a decreasing line.
  static std::optional<double> argmin(const Coeffs& c) {
    if (c.quadratic > 0) return -c.linear / (2 * c.quadratic);
    if (c.linear > 0) return -kInf;
    if (c.linear < 0) return kInf;
    return std::nullopt;
  }

  /// Solutions of piece(x) = level.
  static Roots roots(const Coeffs& c, double level) {
    Roots out;
    const double a = c.quadratic;
    const double b = c.linear;
    const double cc = c.constant - level;
    if (a == 0) {
      if (b != 0) out.push(-cc / b);
      return out;
    }
    const double disc = detail::diff_of_products(b, b, 4 * a, cc);
    if (disc < 0) return out;
    if (disc == 0) {
      out.push(-b / (2 * a));
      return out;
    }
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    double r1 = q / a;
    double r2 = (q != 0) ? cc / q : -r1;
    if (r1 > r2) std::swap(r1, r2);
    auto polish = [&](double x) {
      const double d = slope(c, x);
      if (d == 0) return x;
      const double next = x - (eval(c, x) - level) / d;
      return std::abs(eval(c, next) - level) < std::abs(eval(c, x) - level) ? next : x;
    };
    out.push(polish(r1));
    out.push(polish(r2));
    if (out.values[0] > out.values[1]) std::swap(out.values[0], out.values[1]);
    return out;
  }

  /// Coefficients of x -> piece(x - delta).
  static Coeffs shifted(const Coeffs& c, double delta) {
    return {c.quadratic, c.linear - 2 * c.quadratic * delta,
            c.quadratic * delta * delta - c.linear * delta + c.constant};
  }

  static double to_coord(double mean) { return mean; }
  static double to_mean(double coord) { return coord; }

  /// Weighted loss of one observation, evaluated directly on the mean.
  static double loss(double y, double weight, double mean) {
    const double r = y - mean;
    return weight * r * r;
  }
};

struct PoissonLoss {
  static constexpr LossFamily family = LossFamily::Poisson;
  static constexpr bool supports_shift = false;

  struct Coeffs {
    double linear = 0;
    double log = 0;
    double constant = 0;

    friend bool operator==(const Coeffs&, const Coeffs&) = default;
  };

  static Coeffs data_term(double y, double weight) { return {weight, -weight * y, 0}; }
  static Coeffs constant(double c) { return {0, 0, c}; }
  static Coeffs infinite() { return {0, 0, kInf}; }
  static bool is_infinite(const Coeffs& c) { return c.constant == kInf; }
  static bool is_flat(const Coeffs& c) { return c.linear == 0 && c.log == 0; }

  static Coeffs add(const Coeffs& a, const Coeffs& b) {
    return {a.linear + b.linear, a.log + b.log, a.constant + b.constant};
  }
  static Coeffs subtract(const Coeffs& a, const Coeffs& b) {
    return {a.linear - b.linear, a.log - b.log, a.constant - b.constant};
  }
  static Coeffs scale(const Coeffs& a, double s) { return {a.linear * s, a.log * s, a.constant * s}; }
  static Coeffs add_constant(Coeffs a, double c) {
    a.constant += c;
    return a;
  }

  // x = -inf is mu = 0: the exp term vanishes and log*x diverges unless log == 0.
  static double eval(const Coeffs& c, double x) {
    if (x == kInf) return c.linear > 0 ? kInf : (c.linear < 0 ? -kInf : (c.log == 0 ? c.constant : c.log * kInf));
    const double lin = (x == -kInf || c.linear == 0) ? 0.0 : c.linear * std::exp(x);
    const double lg = (c.log == 0) ? 0.0 : c.log * x;
    return lin + lg + c.constant;
  }
  static double slope(const Coeffs& c, double x) {
    return ((x == -kInf || c.linear == 0) ? 0.0 : c.linear * std::exp(x)) + c.log;
  }

  /// Evaluate on the mean scale: linear*mu + log*log(mu) + constant.
  static double eval_mean(const Coeffs& c, double mu) {
    if (mu == 0) return eval(c, -kInf);
    return c.linear * mu + (c.log == 0 ? 0.0 : c.log * std::log(mu)) + c.constant;
  }

  static std::optional<double> argmin(const Coeffs& c) {
    if (c.linear > 0) {
      if (c.log < 0) return std::log(-c.log / c.linear);
      return -kInf;
    }
    if (c.linear == 0) {
      if (c.log < 0) return kInf;
      if (c.log > 0) return -kInf;
      return std::nullopt;
    }
    // concave in x; only reachable for difference pieces, never for costs
    return c.log > 0 ? -kInf : kInf;
  }

  /// Solutions of linear*exp(x) + log*x + constant = level. The root right of
  /// the stationary point is found on the mean scale (where the function is
  /// asymptotically linear), the root left of it on the log scale.
  static Roots roots(const Coeffs& c, double level) {
    Roots out;
    double L = c.linear;
    double G = c.log;
    double C = c.constant - level;
    if (L == 0) {
      if (G != 0) out.push(-C / G);
      return out;
    }
    if (L < 0) {
      L = -L;
      G = -G;
      C = -C;
    }
    auto fx = [&](double x) { return L * std::exp(x) + G * x + C; };
    auto dx = [&](double x) { return L * std::exp(x) + G; };
    if (G == 0) {
      if (C < 0) out.push(std::log(-C / L));
      return out;
    }
    if (G > 0) {
      // strictly increasing from -inf to +inf
      double lo = -1;
      while (fx(lo) > 0) lo = 2 * lo - 1;
      double hi = 1;
      while (fx(hi) < 0) hi = 2 * hi + 1;
      const double guess = (-C / G < hi && -C / G > lo) ? -C / G : 0.5 * (lo + hi);
      out.push(detail::safeguarded_newton(fx, dx, lo, hi, guess, true));
      return out;
    }
    const double xstar = std::log(-G / L);
    const double fstar = fx(xstar);
    if (fstar > 0) return out;
    if (fstar == 0) {
      out.push(xstar);
      return out;
    }
    // left root: decreasing branch in x
    {
      double step = 1;
      double lo = xstar - step;
      while (fx(lo) < 0) {
        step *= 2;
        lo = xstar - step;
      }
      const double lin = -C / G;
      const double guess = (lin < xstar && lin > lo) ? lin : lo;
      out.push(detail::safeguarded_newton(fx, dx, lo, xstar, guess, false));
    }
    // right root: increasing branch in mu
    {
      const double mustar = -G / L;
      auto fm = [&](double mu) { return L * mu + G * std::log(mu) + C; };
      auto dm = [&](double mu) { return L + G / mu; };
      double hi = 2 * mustar;
      while (fm(hi) < 0) hi *= 2;
      const double lin = -C / L;
      const double guess = (lin > mustar && lin < hi) ? lin : hi;
      const double mu = detail::safeguarded_newton(fm, dm, mustar, hi, guess, true);
      out.push(std::log(mu));
    }
    return out;
  }

  static Coeffs shifted(const Coeffs&, double) {
    throw Error(ErrorCode::InvalidArgument, "additive gap constraints are only supported for the square loss");
  }

  static double to_coord(double mean) { return mean > 0 ? std::log(mean) : -kInf; }
  static double to_mean(double coord) { return coord == -kInf ? 0.0 : std::exp(coord); }

  /// w*(mu - y*log(mu)); mu = 0 is the limit (0 for y = 0, +inf otherwise).
  static double loss(double y, double weight, double mean) {
    if (mean == 0) return y == 0 ? 0.0 : kInf;
    return weight * (mean - (y == 0 ? 0.0 : y * std::log(mean)));
  }
};

template <class Loss>
concept LossPolicy = requires(const typename Loss::Coeffs& c, double x) {
  { Loss::eval(c, x) } -> std::same_as<double>;
  { Loss::argmin(c) } -> std::same_as<std::optional<double>>;
  { Loss::roots(c, x) } -> std::same_as<Roots>;
  { Loss::data_term(x, x) } -> std::same_as<typename Loss::Coeffs>;
};

inline LossFamily parse_loss(std::string_view name) {
  if (name == "square") return LossFamily::Square;
  if (name == "poisson") return LossFamily::Poisson;
  throw Error(ErrorCode::InvalidArgument, "unknown loss '" + std::string(name) + "' (expected square|poisson)");
}

/// Calls fn(SquareLoss{}) or fn(PoissonLoss{}) for a runtime loss choice.
template <class F>
decltype(auto) with_loss(LossFamily family, F&& fn) {
  if (family == LossFamily::Square) return fn(SquareLoss{});
  return fn(PoissonLoss{});
}

}  // namespace fpseg
