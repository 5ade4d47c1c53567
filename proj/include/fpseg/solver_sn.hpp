#pragma once

// Segment neighborhood solver: optimal models with 1..K segments where each
// change obeys a constraint from a ConstraintSchedule.
//
// C_{1,t} = C_{1,t-1} + l_t
// C_{k,k} = l_k + C^g_{k-1,k-1}
// C_{k,t} = l_t + min{ C^g_{k-1,t-1}, C_{k,t-1} }
//
// where C^g is the constrained minimization of change k-1 (min-less for a
// non-decreasing change, min-more for non-increasing, global minimum for
// any change, followed by an argument shift when there is a gap). Costs are
// stored divided by the cumulative weight W_t unless mean_cost is off.

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "fpseg/constraint.hpp"
#include "fpseg/error.hpp"
#include "fpseg/piecewise.hpp"
#include "fpseg/segmentation.hpp"
#include "fpseg/sequence.hpp"

namespace fpseg {

struct SolverOptions {
  /// Store C_t / W_t instead of C_t.
  bool mean_cost = true;
  /// Keep every cost function (tests and inspection); decoding never needs them.
  bool keep_functions = false;
};

template <LossPolicy Loss>
struct SegmentNeighborhoodResult {
  /// models[k-1]: the k-segment model, nullopt when no feasible model exists.
  std::vector<std::optional<Segmentation>> models;
  PruningStats stats;
  /// functions[k-1][t-1] when keep_functions; scaled by 1/W_t when mean_cost.
  std::vector<std::vector<std::optional<PiecewiseCost<Loss>>>> functions;
  double total_weight = 0;

  const Segmentation& model(int k) const {
    const auto& m = models.at(static_cast<std::size_t>(k - 1));
    if (!m) throw Error(ErrorCode::Infeasible, "no feasible model with " + std::to_string(k) + " segments");
    return *m;
  }
};

namespace detail {

template <LossPolicy Loss>
void append_data_point(PiecewiseCost<Loss>& f, const WeightedSequence& data, int t, bool mean_cost) {
  // t is 1-based
  const double y = data.value(t - 1);
  const double w = data.weight(t - 1);
  if (!mean_cost) {
    f.add(Loss::data_term(y, w));
    return;
  }
  const double prev = data.cumulative(t - 1);
  const double now = data.cumulative(t);
  if (prev > 0) f.scale(prev / now);
  f.add(Loss::data_term(y, w / now));
}

}  // namespace detail

/// Backtrack the k-segment model from the stored backpointers.
template <LossPolicy Loss>
Segmentation decode(const BackpointerTable& table, const ArgMin<Loss>& last, int k, int n, double cost_scale,
                    bool updown_states) {
  Segmentation seg;
  seg.k = k;
  seg.means.assign(static_cast<std::size_t>(k), 0);
  seg.ends.assign(static_cast<std::size_t>(k), 0);
  seg.tied.assign(static_cast<std::size_t>(k > 0 ? k - 1 : 0), false);
  double x = last.coord;
  Backpointer back = last.back;
  seg.means[static_cast<std::size_t>(k - 1)] = x;
  seg.ends[static_cast<std::size_t>(k - 1)] = n;
  for (int s = k - 1; s >= 1; --s) {
    const int end = back.prev_end;
    const int next_end = seg.ends[static_cast<std::size_t>(s)];
    if (end < s || end >= next_end) throw Error(ErrorCode::InternalConsistency, "backpointer segment ends are not decreasing");
    if (back.prev_mean.is_unset()) throw Error(ErrorCode::InternalConsistency, "missing previous mean");
    seg.tied[static_cast<std::size_t>(s - 1)] = back.prev_mean.equality_active() && back.prev_mean.value == 0;
    x = back.prev_mean.resolve(x);
    seg.ends[static_cast<std::size_t>(s - 1)] = end;
    seg.means[static_cast<std::size_t>(s - 1)] = x;
    if (s > 1) back = table.find(s - 1, end - 1, x);
  }
  for (double& m : seg.means) m = Loss::to_mean(m);
  seg.total_cost = last.cost * cost_scale;
  if (updown_states) {
    seg.states.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) seg.states[static_cast<std::size_t>(i)] = i % 2;
  }
  return seg;
}

/// Optimal constrained segmentations for every k = 1..K.
template <LossPolicy Loss>
SegmentNeighborhoodResult<Loss> gpdpa_solve(const WeightedSequence& data, int K, const ConstraintSchedule& schedule,
                                            const SolverOptions& options = {}) {
  const int n = data.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty data");
  if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be at least 1");
  if (K > n) throw Error(ErrorCode::Infeasible, "K = " + std::to_string(K) + " exceeds the number of data points " + std::to_string(n));
  if (auto len = schedule.length(); len && *len < K - 1) {
    throw Error(ErrorCode::Arity, "constraint schedule covers " + std::to_string(*len) + " changes, need " + std::to_string(K - 1));
  }
  if (!Loss::supports_shift && schedule.has_gap()) {
    throw Error(ErrorCode::InvalidArgument, "gap constraints are only supported for the square loss");
  }
  std::vector<ChangeConstraint> changes;
  double max_gap = 0;
  for (int k = 1; k < K; ++k) {
    changes.push_back(schedule.change(k));
    max_gap = std::max(max_gap, changes.back().gap);
  }
  const auto [lo, hi] = mean_domain<Loss>(data, max_gap * (K - 1));
  const auto ku = static_cast<std::size_t>(K);

  SegmentNeighborhoodResult<Loss> result;
  result.total_weight = data.total_weight();
  BackpointerTable table(K, n, lo);
  if (options.keep_functions) {
    result.functions.assign(ku, std::vector<std::optional<PiecewiseCost<Loss>>>(static_cast<std::size_t>(n)));
  }

  std::vector<PiecewiseCost<Loss>> prev(ku);
  std::vector<PiecewiseCost<Loss>> cur(ku);
  std::vector<char> prev_ok(ku, 0);
  std::vector<char> cur_ok(ku, 0);
  PiecewiseCost<Loss> change_cost;

  for (int t = 1; t <= n; ++t) {
    const int top = std::min(t, K);
    for (int k = 1; k <= top; ++k) {
      const auto r = static_cast<std::size_t>(k - 1);
      PiecewiseCost<Loss>& out = cur[r];
      bool ok = false;
      if (k == 1) {
        if (t == 1) {
          out = one_piece<Loss>(0, 0, lo, hi);
        } else {
          out = prev[0];
        }
        ok = true;
      } else {
        const bool change_ok =
            prev_ok[r - 1] && constrained_cost_into(prev[r - 1], t - 1, changes[r - 1], change_cost);
        const bool stay_ok = t > k && prev_ok[r];
        if (change_ok && stay_ok) {
          min_of_two_into(change_cost, prev[r], true, out);
        } else if (change_ok) {
          std::swap(out, change_cost);
        } else if (stay_ok) {
          out = prev[r];
        }
        ok = change_ok || stay_ok;
      }
      cur_ok[r] = ok;
      if (!ok) continue;
      detail::append_data_point(out, data, t, options.mean_cost);
      table.store(k - 1, t - 1, out);
      if (options.keep_functions) result.functions[r][static_cast<std::size_t>(t - 1)] = out;
    }
    std::swap(prev, cur);
    std::swap(prev_ok, cur_ok);
  }

  const double scale = options.mean_cost ? data.total_weight() : 1.0;
  result.models.resize(ku);
  for (int k = 1; k <= K; ++k) {
    const auto r = static_cast<std::size_t>(k - 1);
    if (!prev_ok[r]) continue;
    const ArgMin<Loss> best = arg_min(prev[r]);
    if (best.cost == kInf) continue;
    result.models[r] = decode<Loss>(table, best, k, n, scale, schedule.is_updown());
  }
  result.stats = table.stats();
  return result;
}

}  // namespace fpseg
