#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fpseg/error.hpp"
#include "fpseg/piecewise.hpp"

namespace fpseg {

enum class ChangeKind : std::uint8_t { Any, NonDecreasing, NonIncreasing };

inline std::string_view change_kind_name(ChangeKind kind) {
  switch (kind) {
    case ChangeKind::Any: return "any";
    case ChangeKind::NonDecreasing: return "up";
    case ChangeKind::NonIncreasing: return "down";
  }
  return "?";
}

inline ChangeKind parse_change_kind(std::string_view s) {
  if (s == "any") return ChangeKind::Any;
  if (s == "up") return ChangeKind::NonDecreasing;
  if (s == "down") return ChangeKind::NonIncreasing;
  throw Error(ErrorCode::Format, "unknown change kind '" + std::string(s) + "' (expected any|up|down)");
}

/// Constraint between the mean before (prev) and after (next) a change:
///   Any:           no constraint
///   NonDecreasing: prev + gap <= next
///   NonIncreasing: prev >= next + gap
struct ChangeConstraint {
  ChangeKind kind = ChangeKind::Any;
  double gap = 0;

  static ChangeConstraint any() { return {}; }
  static ChangeConstraint up(double gap = 0) { return {ChangeKind::NonDecreasing, gap}; }
  static ChangeConstraint down(double gap = 0) { return {ChangeKind::NonIncreasing, gap}; }

  void validate() const {
    if (!(gap >= 0)) throw Error(ErrorCode::InvalidArgument, "gap must be non-negative");
    if (kind == ChangeKind::Any && gap != 0) throw Error(ErrorCode::InvalidArgument, "an unconstrained change cannot have a gap");
  }

  /// Whether (prev, next) satisfies the constraint, with absolute slack.
  bool satisfied(double prev, double next, double slack = 1e-9) const {
    switch (kind) {
      case ChangeKind::Any: return true;
      case ChangeKind::NonDecreasing: return prev + gap <= next + slack;
      case ChangeKind::NonIncreasing: return prev >= next + gap - slack;
    }
    return false;
  }

  friend bool operator==(const ChangeConstraint&, const ChangeConstraint&) = default;
};

enum class SchedulePreset : std::uint8_t { Unconstrained, ReducedIsotonic, UpDown };

/// Constraints for changes 1..K-1 of a K-segment model.
class ConstraintSchedule {
 public:
  ConstraintSchedule() = default;
  explicit ConstraintSchedule(SchedulePreset preset, double gap = 0) : preset_(preset), gap_(gap) {
    if (preset == SchedulePreset::Unconstrained && gap != 0) {
      throw Error(ErrorCode::InvalidArgument, "the unconstrained preset cannot have a gap");
    }
    if (!(gap >= 0)) throw Error(ErrorCode::InvalidArgument, "gap must be non-negative");
  }
  explicit ConstraintSchedule(std::vector<ChangeConstraint> changes) : explicit_(std::move(changes)) {
    for (const auto& c : *explicit_) c.validate();
  }

  static ConstraintSchedule unconstrained() { return ConstraintSchedule(SchedulePreset::Unconstrained); }
  static ConstraintSchedule isotonic(double gap = 0) { return ConstraintSchedule(SchedulePreset::ReducedIsotonic, gap); }
  static ConstraintSchedule updown(double gap = 0) { return ConstraintSchedule(SchedulePreset::UpDown, gap); }

  /// Constraint of change `k` (1-based: between segments k and k+1).
  ChangeConstraint change(int k) const {
    if (explicit_) {
      if (k < 1 || k > static_cast<int>(explicit_->size())) {
        throw Error(ErrorCode::Arity, "constraint schedule has no entry for change " + std::to_string(k));
      }
      return (*explicit_)[static_cast<std::size_t>(k - 1)];
    }
    switch (preset_) {
      case SchedulePreset::Unconstrained: return ChangeConstraint::any();
      case SchedulePreset::ReducedIsotonic: return ChangeConstraint::up(gap_);
      case SchedulePreset::UpDown: return (k % 2 == 1) ? ChangeConstraint::up(gap_) : ChangeConstraint::down(gap_);
    }
    return {};
  }

  /// Explicit schedules cover a fixed number of changes; presets any number.
  std::optional<int> length() const {
    if (explicit_) return static_cast<int>(explicit_->size());
    return std::nullopt;
  }

  bool is_updown() const { return !explicit_ && preset_ == SchedulePreset::UpDown; }
  bool has_gap() const {
    if (!explicit_) return gap_ != 0;
    for (const auto& c : *explicit_) {
      if (c.gap != 0) return true;
    }
    return false;
  }

 private:
  SchedulePreset preset_ = SchedulePreset::Unconstrained;
  double gap_ = 0;
  std::optional<std::vector<ChangeConstraint>> explicit_;
};

/// Cost of ending the previous segment at `prev_end` and starting a new one
/// at every coordinate x, under constraint `c`. Writes into `out` and returns
/// false when no coordinate is feasible.
template <LossPolicy Loss>
bool constrained_cost_into(const PiecewiseCost<Loss>& f, int prev_end, const ChangeConstraint& c,
                           PiecewiseCost<Loss>& out) {
  switch (c.kind) {
    case ChangeKind::Any: min_unconstrained_into(f, prev_end, out); break;
    case ChangeKind::NonDecreasing: min_less_into(f, prev_end, out); break;
    case ChangeKind::NonIncreasing: min_more_into(f, prev_end, out); break;
  }
  if (c.gap != 0) {
    auto shifted = shift_argument(out, c.kind == ChangeKind::NonDecreasing ? c.gap : -c.gap);
    if (!shifted) return false;
    out = std::move(*shifted);
    out.set_prev_end(prev_end);
  }
  return !out.all_infinite();
}

}  // namespace fpseg
