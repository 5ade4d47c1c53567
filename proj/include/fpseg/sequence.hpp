#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "fpseg/error.hpp"
#include "fpseg/loss.hpp"

namespace fpseg {

/// Data values y_t with positive weights w_t and cumulative weights W_t.
class WeightedSequence {
 public:
  WeightedSequence() = default;

  WeightedSequence(std::vector<double> values, std::vector<double> weights)
      : values_(std::move(values)), weights_(std::move(weights)) {
    if (values_.size() != weights_.size()) throw Error(ErrorCode::InvalidArgument, "values and weights differ in length");
    cumulative_.reserve(weights_.size());
    double total = 0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) throw Error(ErrorCode::InvalidArgument, "data values must be finite");
      if (!(weights_[i] > 0) || !std::isfinite(weights_[i])) {
        throw Error(ErrorCode::InvalidWeight, "weights must be positive and finite");
      }
      total += weights_[i];
      cumulative_.push_back(total);
    }
  }

  /// Unit weights, no merging.
  static WeightedSequence unit(std::vector<double> values) {
    std::vector<double> w(values.size(), 1.0);
    return WeightedSequence(std::move(values), std::move(w));
  }

  /// Run-length encoding: adjacent equal values merge, weights add.
  static WeightedSequence encode(std::span<const double> values, std::span<const double> weights = {}) {
    if (!weights.empty() && weights.size() != values.size()) {
      throw Error(ErrorCode::InvalidArgument, "values and weights differ in length");
    }
    std::vector<double> v;
    std::vector<double> w;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double wi = weights.empty() ? 1.0 : weights[i];
      if (!v.empty() && v.back() == values[i]) {
        w.back() += wi;
      } else {
        v.push_back(values[i]);
        w.push_back(wi);
      }
    }
    return WeightedSequence(std::move(v), std::move(w));
  }

  /// Inverse of encode for integer weights.
  std::vector<double> expand() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const auto reps = static_cast<std::size_t>(std::llround(weights_[i]));
      if (std::abs(weights_[i] - static_cast<double>(reps)) > 1e-9) {
        throw Error(ErrorCode::InvalidWeight, "expand requires integer weights");
      }
      out.insert(out.end(), reps, values_[i]);
    }
    return out;
  }

  int size() const { return static_cast<int>(values_.size()); }
  bool empty() const { return values_.empty(); }
  double value(int t) const { return values_[static_cast<std::size_t>(t)]; }
  double weight(int t) const { return weights_[static_cast<std::size_t>(t)]; }
  /// Sum of the first `count` weights (W_0 = 0).
  double cumulative(int count) const { return count == 0 ? 0.0 : cumulative_[static_cast<std::size_t>(count - 1)]; }
  double total_weight() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  std::span<const double> values() const { return values_; }
  std::span<const double> weights() const { return weights_; }

  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

  void require_counts() const {
    for (double y : values_) {
      if (!(y >= 0) || std::floor(y) != y) throw Error(ErrorCode::InvalidArgument, "Poisson data must be non-negative integer counts");
    }
  }

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// Domain of segment means in loss coordinates. Equal min and max widen to
/// [y - 1, y + 1] (clipped at 0 for Poisson). `margin` extends both ends,
/// for gap constraints that push means past the data range.
template <LossPolicy Loss>
std::pair<double, double> mean_domain(const WeightedSequence& data, double margin = 0) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "empty data");
  double lo = data.min_value() - margin;
  double hi = data.max_value() + margin;
  if (lo == hi) {
    lo -= 1;
    hi += 1;
  }
  if constexpr (Loss::family == LossFamily::Poisson) {
    data.require_counts();
    lo = std::max(lo, 0.0);
  }
  return {Loss::to_coord(lo), Loss::to_coord(hi)};
}

}  // namespace fpseg
