#pragma once

// Exact algebra on univariate piecewise convex cost functions.
//
// A PiecewiseCost is an ordered, contiguous list of FunctionPiece objects
// covering one global domain in loss coordinates (see loss.hpp). Each piece
// remembers where its cost came from (previous segment end, previous segment
// mean, previous state) so that optimal parameters can be decoded after the
// dynamic programming is done.
//
// Pieces whose constant is +inf mark infeasible regions; they only appear
// after an argument shift (gap constraints) and are ignored by minimization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fpseg/error.hpp"
#include "fpseg/loss.hpp"

namespace fpseg {

/// Crossing points and interval ends closer than this (in coordinate units)
/// are merged, and slivers narrower than this are absorbed by a neighbour.
inline constexpr double kMergeTolerance = 1e-10;
/// Relative tolerance for continuity of adjacent pieces.
inline constexpr double kContinuityTolerance = 1e-8;
/// Two pieces closer than this (relative) on a whole interval are a tie.
inline constexpr double kTieTolerance = 1e-12;

inline constexpr int kNoPrevEnd = -1;
inline constexpr int kNoEdge = -1;

/// Previous segment mean stored with a piece. Tied means the equality
/// constraint is active: previous mean = current coordinate + value.
struct PrevMean {
  enum class Kind : std::uint8_t { Unset, Fixed, Tied };

  Kind kind = Kind::Unset;
  double value = 0;

  static PrevMean unset() { return {}; }
  static PrevMean fixed(double coord) { return {Kind::Fixed, coord}; }
  static PrevMean tied(double offset = 0) { return {Kind::Tied, offset}; }

  bool is_unset() const { return kind == Kind::Unset; }
  bool is_fixed() const { return kind == Kind::Fixed; }
  bool equality_active() const { return kind == Kind::Tied; }

  /// Previous-segment coordinate given the current segment's coordinate.
  double resolve(double current) const { return kind == Kind::Tied ? current + value : value; }

  friend bool operator==(const PrevMean&, const PrevMean&) = default;
};

/// prev_end: last data index of the previous segment (kNoPrevEnd for the
/// first segment). edge: state-graph edge that led into the current segment
/// (kNoEdge outside graph models).
struct Backpointer {
  int prev_end = kNoPrevEnd;
  int edge = kNoEdge;
  PrevMean prev_mean;

  friend bool operator==(const Backpointer&, const Backpointer&) = default;
};

template <LossPolicy Loss>
struct FunctionPiece {
  using Coeffs = typename Loss::Coeffs;

  Coeffs coeffs;
  double lower = 0;
  double upper = 0;
  Backpointer back;

  bool infinite() const { return Loss::is_infinite(coeffs); }
  double cost(double x) const { return infinite() ? kInf : Loss::eval(coeffs, x); }
  bool contains(double x) const { return lower <= x && x <= upper; }
};

template <LossPolicy Loss>
class PiecewiseCost {
 public:
  using Piece = FunctionPiece<Loss>;
  using Coeffs = typename Loss::Coeffs;
  using loss_type = Loss;

  PiecewiseCost() = default;
  explicit PiecewiseCost(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {}

  const std::vector<Piece>& pieces() const { return pieces_; }
  std::vector<Piece>& mutable_pieces() { return pieces_; }
  std::size_t size() const { return pieces_.size(); }
  bool empty() const { return pieces_.empty(); }
  const Piece& operator[](std::size_t i) const { return pieces_[i]; }
  void clear() { pieces_.clear(); }

  double lower() const { return pieces_.front().lower; }
  double upper() const { return pieces_.back().upper; }

  /// True when every piece is an infeasible (+inf) piece.
  bool all_infinite() const {
    return std::all_of(pieces_.begin(), pieces_.end(), [](const Piece& p) { return p.infinite(); });
  }

  /// Index of the piece containing x; a shared boundary belongs to the left piece.
  std::size_t locate(double x) const {
    const double slack = kMergeTolerance * std::max(1.0, std::abs(x));
    if (pieces_.empty() || !(x >= lower() - slack) || !(x <= upper() + slack)) {
      throw Error(ErrorCode::OutOfRange, "coordinate outside the function domain");
    }
    auto it = std::lower_bound(pieces_.begin(), pieces_.end(), x,
                               [](const Piece& p, double v) { return p.upper < v; });
    if (it == pieces_.end()) --it;
    return static_cast<std::size_t>(it - pieces_.begin());
  }

  double operator()(double x) const {
    const Piece& p = pieces_[locate(x)];
    return p.cost(std::clamp(x, p.lower, p.upper));
  }

  void add(const Coeffs& c) {
    for (Piece& p : pieces_) {
      if (!p.infinite()) p.coeffs = Loss::add(p.coeffs, c);
    }
  }
  void add_constant(double c) {
    for (Piece& p : pieces_) {
      if (!p.infinite()) p.coeffs = Loss::add_constant(p.coeffs, c);
    }
  }
  void scale(double s) {
    for (Piece& p : pieces_) {
      if (!p.infinite()) p.coeffs = Loss::scale(p.coeffs, s);
    }
  }
  void set_prev_end(int t) {
    for (Piece& p : pieces_) p.back.prev_end = t;
  }
  void set_edge(int e) {
    for (Piece& p : pieces_) p.back.edge = e;
  }

  /// Largest mismatch of adjacent finite pieces at their shared boundary,
  /// relative to max(1, |value|).
  double continuity_error() const {
    double worst = 0;
    for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
      const Piece& a = pieces_[i];
      const Piece& b = pieces_[i + 1];
      if (a.infinite() || b.infinite()) continue;
      const double x = a.upper;
      const double va = a.cost(x);
      const double vb = b.cost(x);
      if (!std::isfinite(va) || !std::isfinite(vb)) continue;
      worst = std::max(worst, std::abs(va - vb) / std::max({1.0, std::abs(va), std::abs(vb)}));
    }
    return worst;
  }

  /// Contiguity, positive widths and continuity within kContinuityTolerance.
  bool well_formed() const {
    if (pieces_.empty()) return false;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      if (!(pieces_[i].lower < pieces_[i].upper)) return false;
      if (i > 0 && pieces_[i - 1].upper != pieces_[i].lower) return false;
    }
    return continuity_error() <= kContinuityTolerance;
  }

 private:
  std::vector<Piece> pieces_;
};

namespace detail {

template <LossPolicy Loss>
bool same_source(const FunctionPiece<Loss>& a, const FunctionPiece<Loss>& b) {
  return a.coeffs == b.coeffs && a.back == b.back;
}

template <LossPolicy Loss>
void push_raw(std::vector<FunctionPiece<Loss>>& out, const typename Loss::Coeffs& coeffs,
              const Backpointer& back, double lower, double upper) {
  if (!(upper > lower)) return;
  out.push_back({coeffs, lower, upper, back});
}

// Merge adjacent pieces with identical formula and provenance and absorb
// slivers into a neighbour.
template <LossPolicy Loss>
void normalize(std::vector<FunctionPiece<Loss>>& pieces) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < pieces.size(); ++r) {
    FunctionPiece<Loss> q = pieces[r];
    while (true) {
      if (w == 0) {
        pieces[w++] = q;
        break;
      }
      FunctionPiece<Loss>& last = pieces[w - 1];
      if (same_source(last, q) || q.upper - q.lower < kMergeTolerance) {
        last.upper = q.upper;
        break;
      }
      if (last.upper - last.lower < kMergeTolerance) {
        q.lower = last.lower;
        --w;
        continue;
      }
      pieces[w++] = q;
      break;
    }
  }
  pieces.resize(w);
}

// A point strictly inside (lo, hi) suitable for sign tests.
inline double interior_point(double lo, double hi) {
  if (lo == -kInf) return hi - 1;
  if (hi == kInf) return lo + 1;
  return 0.5 * (lo + hi);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Construction and single-piece primitives

template <LossPolicy Loss>
PiecewiseCost<Loss> one_piece(double y, double weight, double lower, double upper) {
  if (!(lower < upper)) throw Error(ErrorCode::InvalidDomain, "one_piece requires lower < upper");
  if (!(weight >= 0) || !std::isfinite(weight)) throw Error(ErrorCode::InvalidWeight, "weight must be non-negative");
  if constexpr (Loss::family == LossFamily::Poisson) {
    if (!(y >= 0) || std::floor(y) != y) throw Error(ErrorCode::InvalidArgument, "Poisson data must be non-negative integers");
  }
  return PiecewiseCost<Loss>({{Loss::data_term(y, weight), lower, upper, Backpointer{}}});
}

/// f + weight * loss(y, .), coefficientwise; intervals and backpointers kept.
template <LossPolicy Loss>
PiecewiseCost<Loss> add_loss(PiecewiseCost<Loss> f, double y, double weight) {
  if (!(weight >= 0)) throw Error(ErrorCode::InvalidWeight, "weight must be non-negative");
  if (weight > 0) f.add(Loss::data_term(y, weight));
  return f;
}

/// Cost of a piece at coordinate x (x = mean for square, log(mean) for Poisson).
template <LossPolicy Loss>
double get_cost(const FunctionPiece<Loss>& p, double x) {
  const double slack = kMergeTolerance * std::max(1.0, std::abs(x));
  if (!(x >= p.lower - slack && x <= p.upper + slack)) {
    throw Error(ErrorCode::OutOfRange, "get_cost outside the piece interval");
  }
  return p.cost(x);
}

/// Unconstrained minimizer of the piece formula on the mean scale; nullopt
/// when the formula has no finite stationary point (flat or monotone).
template <LossPolicy Loss>
std::optional<double> optimal_mean(const FunctionPiece<Loss>& p) {
  if (p.infinite()) return std::nullopt;
  const auto x = Loss::argmin(p.coeffs);
  if (!x || !std::isfinite(*x)) return std::nullopt;
  return Loss::to_mean(*x);
}

/// Coordinates where the piece formula equals `level`, increasing.
template <LossPolicy Loss>
Roots compute_roots(const FunctionPiece<Loss>& p, double level) {
  if (p.infinite()) return {};
  return Loss::roots(p.coeffs, level);
}

// ---------------------------------------------------------------------------
// Constrained minimization operators

/// f_out(x) = min_{z <= x} f_in(z). Copied pieces are tied to the current
/// mean; constant pieces after a local minimum carry that minimizer.
template <LossPolicy Loss>
void min_less_into(const PiecewiseCost<Loss>& in, int prev_end, PiecewiseCost<Loss>& result) {
  using Piece = FunctionPiece<Loss>;
  auto& out = result.mutable_pieces();
  out.clear();
  const auto& ps = in.pieces();
  if (ps.empty()) return;
  const Backpointer tied{prev_end, kNoEdge, PrevMean::tied()};
  bool have_min = false;
  double min_cost = 0;
  double min_coord = 0;
  double lower = ps.front().lower;
  std::size_t i = 0;
  while (i < ps.size()) {
    const Piece& p = ps[i];
    if (!have_min) {
      if (p.infinite()) {
        detail::push_raw<Loss>(out, p.coeffs, tied, lower, p.upper);
        lower = p.upper;
        ++i;
        continue;
      }
      const auto cand = Loss::argmin(p.coeffs);
      if (!cand || *cand >= p.upper - kMergeTolerance) {
        // non-increasing on the rest of this piece
        detail::push_raw<Loss>(out, p.coeffs, tied, lower, p.upper);
        lower = p.upper;
      } else if (*cand <= lower + kMergeTolerance) {
        min_coord = lower;
        min_cost = p.cost(lower);
        have_min = true;
      } else {
        detail::push_raw<Loss>(out, p.coeffs, tied, lower, *cand);
        min_coord = *cand;
        min_cost = p.cost(*cand);
        lower = *cand;
        have_min = true;
      }
      ++i;
      continue;
    }
    if (p.infinite()) {
      ++i;
      continue;
    }
    const Backpointer flat{prev_end, kNoEdge, PrevMean::fixed(min_coord)};
    if (p.cost(p.lower) < min_cost) {
      detail::push_raw<Loss>(out, Loss::constant(min_cost), flat, lower, p.lower);
      lower = std::max(lower, p.lower);
      have_min = false;
      continue;
    }
    const Roots roots = Loss::roots(p.coeffs, min_cost);
    std::optional<double> crossing;
    for (double r : roots) {
      if (r < p.upper && r >= p.lower - kMergeTolerance && Loss::slope(p.coeffs, r) < 0) {
        crossing = std::max(r, p.lower);
        break;
      }
    }
    if (crossing) {
      detail::push_raw<Loss>(out, Loss::constant(min_cost), flat, lower, *crossing);
      lower = std::max(lower, *crossing);
      have_min = false;
    } else {
      ++i;
    }
  }
  if (have_min) {
    detail::push_raw<Loss>(out, Loss::constant(min_cost), Backpointer{prev_end, kNoEdge, PrevMean::fixed(min_coord)},
                           lower, ps.back().upper);
  }
  detail::normalize(out);
}

/// f_out(x) = min_{z >= x} f_in(z); the right-to-left mirror of min_less.
template <LossPolicy Loss>
void min_more_into(const PiecewiseCost<Loss>& in, int prev_end, PiecewiseCost<Loss>& result) {
  using Piece = FunctionPiece<Loss>;
  auto& out = result.mutable_pieces();
  out.clear();
  const auto& ps = in.pieces();
  if (ps.empty()) return;
  const Backpointer tied{prev_end, kNoEdge, PrevMean::tied()};
  bool have_min = false;
  double min_cost = 0;
  double min_coord = 0;
  double upper = ps.back().upper;
  std::size_t i = ps.size();
  while (i > 0) {
    const Piece& p = ps[i - 1];
    if (!have_min) {
      if (p.infinite()) {
        detail::push_raw<Loss>(out, p.coeffs, tied, p.lower, upper);
        upper = p.lower;
        --i;
        continue;
      }
      const auto cand = Loss::argmin(p.coeffs);
      if (!cand || *cand <= p.lower + kMergeTolerance) {
        detail::push_raw<Loss>(out, p.coeffs, tied, p.lower, upper);
        upper = p.lower;
      } else if (*cand >= upper - kMergeTolerance) {
        min_coord = upper;
        min_cost = p.cost(upper);
        have_min = true;
      } else {
        detail::push_raw<Loss>(out, p.coeffs, tied, *cand, upper);
        min_coord = *cand;
        min_cost = p.cost(*cand);
        upper = *cand;
        have_min = true;
      }
      --i;
      continue;
    }
    if (p.infinite()) {
      --i;
      continue;
    }
    const Backpointer flat{prev_end, kNoEdge, PrevMean::fixed(min_coord)};
    if (p.cost(p.upper) < min_cost) {
      detail::push_raw<Loss>(out, Loss::constant(min_cost), flat, p.upper, upper);
      upper = std::min(upper, p.upper);
      have_min = false;
      continue;
    }
    const Roots roots = Loss::roots(p.coeffs, min_cost);
    std::optional<double> crossing;
    for (int k = roots.count - 1; k >= 0; --k) {
      const double r = roots.values[static_cast<std::size_t>(k)];
      if (r > p.lower && r <= p.upper + kMergeTolerance && Loss::slope(p.coeffs, r) > 0) {
        crossing = std::min(r, p.upper);
        break;
      }
    }
    if (crossing) {
      detail::push_raw<Loss>(out, Loss::constant(min_cost), flat, *crossing, upper);
      upper = std::min(upper, *crossing);
      have_min = false;
    } else {
      --i;
    }
  }
  if (have_min) {
    detail::push_raw<Loss>(out, Loss::constant(min_cost), Backpointer{prev_end, kNoEdge, PrevMean::fixed(min_coord)},
                           ps.front().lower, upper);
  }
  std::reverse(out.begin(), out.end());
  detail::normalize(out);
}

template <LossPolicy Loss>
PiecewiseCost<Loss> min_less(int prev_end, const PiecewiseCost<Loss>& f) {
  PiecewiseCost<Loss> out;
  min_less_into(f, prev_end, out);
  return out;
}

template <LossPolicy Loss>
PiecewiseCost<Loss> min_more(int prev_end, const PiecewiseCost<Loss>& f) {
  PiecewiseCost<Loss> out;
  min_more_into(f, prev_end, out);
  return out;
}

// ---------------------------------------------------------------------------
// Minimization and lookup

template <LossPolicy Loss>
struct ArgMin {
  double coord = 0;
  double mean = 0;
  double cost = kInf;
  Backpointer back;
};

/// Global minimizer over all pieces; ties go to the smallest coordinate.
/// Returns cost = +inf when every piece is infeasible.
template <LossPolicy Loss>
ArgMin<Loss> arg_min(const PiecewiseCost<Loss>& f) {
  ArgMin<Loss> best;
  bool found = false;
  for (const auto& p : f.pieces()) {
    if (p.infinite()) continue;
    const auto cand = Loss::argmin(p.coeffs);
    const double x = cand ? std::clamp(*cand, p.lower, p.upper) : p.lower;
    const double c = p.cost(x);
    if (!found || c < best.cost) {
      best = {x, Loss::to_mean(x), c, p.back};
      found = true;
    }
  }
  return best;
}

/// Backpointers of the piece containing x (left piece on a shared boundary).
template <LossPolicy Loss>
Backpointer find_mean(double x, const PiecewiseCost<Loss>& f) {
  return f[f.locate(x)].back;
}

/// Constant function equal to the global minimum of f, carrying its minimizer.
template <LossPolicy Loss>
void min_unconstrained_into(const PiecewiseCost<Loss>& in, int prev_end, PiecewiseCost<Loss>& result) {
  auto& out = result.mutable_pieces();
  out.clear();
  if (in.empty()) return;
  const ArgMin<Loss> m = arg_min(in);
  if (m.cost == kInf) {
    out.push_back({Loss::infinite(), in.lower(), in.upper(), Backpointer{prev_end, kNoEdge, PrevMean::unset()}});
    return;
  }
  out.push_back({Loss::constant(m.cost), in.lower(), in.upper(), Backpointer{prev_end, kNoEdge, PrevMean::fixed(m.coord)}});
}

template <LossPolicy Loss>
PiecewiseCost<Loss> min_unconstrained(int prev_end, const PiecewiseCost<Loss>& f) {
  PiecewiseCost<Loss> out;
  min_unconstrained_into(f, prev_end, out);
  return out;
}

// ---------------------------------------------------------------------------
// Argument shift

/// x -> f(x - delta) on the same global domain. Where x - delta falls outside
/// the domain the result is +inf. nullopt when nothing remains feasible.
template <LossPolicy Loss>
std::optional<PiecewiseCost<Loss>> shift_argument(const PiecewiseCost<Loss>& f, double delta) {
  if (delta == 0) return f;
  if constexpr (!Loss::supports_shift) {
    (void)Loss::shifted(typename Loss::Coeffs{}, delta);  // throws
    return std::nullopt;
  } else {
    const double lo = f.lower();
    const double hi = f.upper();
    if (std::abs(delta) >= hi - lo) return std::nullopt;
    std::vector<FunctionPiece<Loss>> out;
    out.reserve(f.size() + 1);
    if (delta > 0) out.push_back({Loss::infinite(), lo, lo + delta, Backpointer{}});
    for (const auto& p : f.pieces()) {
      const double a = std::max(lo, p.lower + delta);
      const double b = std::min(hi, p.upper + delta);
      if (!(b > a)) continue;
      Backpointer back = p.back;
      if (back.prev_mean.equality_active()) back.prev_mean.value -= delta;
      out.push_back({p.infinite() ? p.coeffs : Loss::shifted(p.coeffs, delta), a, b, back});
    }
    if (delta < 0) out.push_back({Loss::infinite(), hi + delta, hi, Backpointer{}});
    detail::normalize(out);
    PiecewiseCost<Loss> result(std::move(out));
    if (result.all_infinite()) return std::nullopt;
    return result;
  }
}

// ---------------------------------------------------------------------------
// Pointwise minimum

namespace detail {

template <LossPolicy Loss>
bool coincide(const FunctionPiece<Loss>& a, const FunctionPiece<Loss>& b, double lo, double hi) {
  if (a.coeffs == b.coeffs) return true;
  const auto diff = Loss::subtract(a.coeffs, b.coeffs);
  const double mid = interior_point(lo, hi);
  const double scale = kTieTolerance * std::max(1.0, std::abs(a.cost(mid)));
  auto small = [&](double x) { return std::abs(Loss::eval(diff, x)) <= scale; };
  if (!small(lo) || !small(hi) || !small(mid)) return false;
  const auto stat = Loss::argmin(diff);
  if (stat && *stat > lo && *stat < hi && !small(*stat)) return false;
  return true;
}

template <LossPolicy Loss>
void push_min_pieces(std::vector<FunctionPiece<Loss>>& out, const FunctionPiece<Loss>& a,
                     const FunctionPiece<Loss>& b, double lo, double hi, bool prefer_second) {
  const FunctionPiece<Loss>& preferred = prefer_second ? b : a;
  if (a.infinite() || b.infinite()) {
    const FunctionPiece<Loss>& pick = (a.infinite() && b.infinite()) ? preferred : (a.infinite() ? b : a);
    push_raw<Loss>(out, pick.coeffs, pick.back, lo, hi);
    return;
  }
  if (coincide(a, b, lo, hi)) {
    push_raw<Loss>(out, preferred.coeffs, preferred.back, lo, hi);
    return;
  }
  const auto diff = Loss::subtract(a.coeffs, b.coeffs);
  std::array<double, 4> cuts{};
  std::size_t n = 0;
  cuts[n++] = lo;
  for (double r : Loss::roots(diff, 0.0)) {
    if (r > cuts[n - 1] + kMergeTolerance && r < hi - kMergeTolerance) cuts[n++] = r;
  }
  cuts[n++] = hi;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double x = interior_point(cuts[k], cuts[k + 1]);
    const double d = Loss::eval(diff, x);
    const FunctionPiece<Loss>& pick = d < 0 ? a : (d > 0 ? b : preferred);
    push_raw<Loss>(out, pick.coeffs, pick.back, cuts[k], cuts[k + 1]);
  }
}

inline bool same_bound(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= kMergeTolerance * std::max(1.0, std::abs(a));
}

}  // namespace detail

/// Exact pointwise minimum. Where the two functions coincide on an interval
/// the preferred input's piece (and provenance) is kept.
template <LossPolicy Loss>
void min_of_two_into(const PiecewiseCost<Loss>& f1, const PiecewiseCost<Loss>& f2, bool prefer_second,
                     PiecewiseCost<Loss>& result) {
  if (f1.empty() || f2.empty() || !detail::same_bound(f1.lower(), f2.lower()) ||
      !detail::same_bound(f1.upper(), f2.upper())) {
    throw Error(ErrorCode::DomainMismatch, "min_of_two requires identical domains");
  }
  auto& out = result.mutable_pieces();
  out.clear();
  const auto& p1 = f1.pieces();
  const auto& p2 = f2.pieces();
  std::size_t i = 0;
  std::size_t j = 0;
  double left = f1.lower();
  while (i < p1.size() && j < p2.size()) {
    const bool last1 = i + 1 == p1.size();
    const bool last2 = j + 1 == p2.size();
    double right;
    if (last1 && last2) {
      right = p1[i].upper;
    } else if (last1) {
      right = p2[j].upper;
    } else if (last2) {
      right = p1[i].upper;
    } else {
      right = std::min(p1[i].upper, p2[j].upper);
    }
    detail::push_min_pieces(out, p1[i], p2[j], left, right, prefer_second);
    left = right;
    if (last1 && last2) break;
    if (!last1 && p1[i].upper <= right) ++i;
    if (!last2 && p2[j].upper <= right) ++j;
  }
  detail::normalize(out);
}

template <LossPolicy Loss>
PiecewiseCost<Loss> min_of_two(const PiecewiseCost<Loss>& f1, const PiecewiseCost<Loss>& f2,
                               bool prefer_second = false) {
  PiecewiseCost<Loss> out;
  min_of_two_into(f1, f2, prefer_second, out);
  return out;
}

}  // namespace fpseg
