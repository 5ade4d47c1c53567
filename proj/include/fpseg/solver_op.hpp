#pragma once

// Penalized solver over a state graph. For every state s and time t,
//
//   C_{s,t}(u) = l_t(u) + min{ C_{s,t-1}(u),  min_{e: u->s} C^{g_e}_{u,t-1}(u) + lambda_e }
//
// with C_{s,1} = l_1 for start states and no function (infeasible) otherwise.

#include <algorithm>
#include <array>
#include <vector>

#include "fpseg/constraint.hpp"
#include "fpseg/error.hpp"
#include "fpseg/piecewise.hpp"
#include "fpseg/segmentation.hpp"
#include "fpseg/sequence.hpp"
#include "fpseg/solver_sn.hpp"
#include "fpseg/state_graph.hpp"

namespace fpseg {

struct PenalizedSolution {
  /// states[i] is a state index of the graph; total_cost is the loss alone.
  Segmentation segmentation;
  /// Loss plus the penalties of every change taken.
  double penalized_cost = 0;
  int change_count = 0;
  /// Graph edge taken at each change.
  std::vector<int> edges;
  PruningStats stats;
};

template <LossPolicy Loss>
double recompute_loss(const WeightedSequence& data, const Segmentation& seg) {
  double total = 0;
  for (int i = 0; i < seg.k; ++i) {
    const double m = seg.means[static_cast<std::size_t>(i)];
    for (int t = seg.start(i); t < seg.ends[static_cast<std::size_t>(i)]; ++t) {
      total += Loss::loss(data.value(t), data.weight(t), m);
    }
  }
  return total;
}

template <LossPolicy Loss>
PenalizedSolution gfpop_solve(const WeightedSequence& data, const StateGraph& graph, const SolverOptions& options = {}) {
  graph.validate();
  const int n = data.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty data");
  if (!Loss::supports_shift && graph.has_gap()) {
    throw Error(ErrorCode::InvalidArgument, "gap constraints are only supported for the square loss");
  }
  const int S = graph.state_count();
  const auto su = static_cast<std::size_t>(S);
  const auto [lo, hi] = mean_domain<Loss>(data, graph.max_gap() * (n - 1));

  std::vector<std::vector<int>> incoming(su);
  for (int e = 0; e < static_cast<int>(graph.edges().size()); ++e) {
    incoming[static_cast<std::size_t>(graph.edge(e).target)].push_back(e);
  }

  BackpointerTable table(S, n, lo);
  std::vector<PiecewiseCost<Loss>> prev(su);
  std::vector<PiecewiseCost<Loss>> cur(su);
  std::vector<char> prev_ok(su, 0);
  std::vector<char> cur_ok(su, 0);
  PiecewiseCost<Loss> change_cost;
  PiecewiseCost<Loss> scratch;

  for (int s : graph.start_states()) {
    const auto r = static_cast<std::size_t>(s);
    prev[r] = one_piece<Loss>(0, 0, lo, hi);
    detail::append_data_point(prev[r], data, 1, options.mean_cost);
    prev_ok[r] = 1;
    table.store(s, 0, prev[r]);
  }

  for (int t = 2; t <= n; ++t) {
    const double penalty_scale = options.mean_cost ? 1.0 / data.cumulative(t - 1) : 1.0;
    for (int s = 0; s < S; ++s) {
      const auto r = static_cast<std::size_t>(s);
      PiecewiseCost<Loss>& out = cur[r];
      bool have = false;
      if (prev_ok[r]) {
        out = prev[r];
        have = true;
      }
      for (int e : incoming[r]) {
        const auto& edge = graph.edge(e);
        const auto src = static_cast<std::size_t>(edge.source);
        if (!prev_ok[src]) continue;
        if (!constrained_cost_into(prev[src], t - 1, edge.constraint, change_cost)) continue;
        change_cost.set_edge(e);
        if (edge.penalty != 0) change_cost.add_constant(edge.penalty * penalty_scale);
        if (have) {
          min_of_two_into(out, change_cost, false, scratch);
          std::swap(out, scratch);
        } else {
          std::swap(out, change_cost);
          have = true;
        }
      }
      cur_ok[r] = have;
      if (!have) continue;
      detail::append_data_point(out, data, t, options.mean_cost);
      table.store(s, t - 1, out);
    }
    std::swap(prev, cur);
    std::swap(prev_ok, cur_ok);
  }

  int best_state = -1;
  ArgMin<Loss> best;
  for (int s : graph.end_states()) {
    if (!prev_ok[static_cast<std::size_t>(s)]) continue;
    const ArgMin<Loss> m = arg_min(prev[static_cast<std::size_t>(s)]);
    if (m.cost < best.cost) {
      best = m;
      best_state = s;
    }
  }
  if (best_state < 0) throw Error(ErrorCode::Infeasible, "no end state is reachable at the last data point");

  // Walk the backpointers from the end.
  std::vector<double> means;
  std::vector<int> ends;
  std::vector<int> states;
  std::vector<int> edges;
  std::vector<bool> tied;
  double x = best.coord;
  int state = best_state;
  int end = n;
  Backpointer back = best.back;
  while (true) {
    means.push_back(x);
    ends.push_back(end);
    states.push_back(state);
    if (back.prev_end == kNoPrevEnd) break;
    if (back.prev_end < 1 || back.prev_end >= end || back.edge < 0 ||
        back.edge >= static_cast<int>(graph.edges().size())) {
      throw Error(ErrorCode::InternalConsistency, "corrupted backpointer during decoding");
    }
    const auto& edge = graph.edge(back.edge);
    if (edge.target != state || back.prev_mean.is_unset()) {
      throw Error(ErrorCode::InternalConsistency, "backpointer edge does not match the decoded state");
    }
    edges.push_back(back.edge);
    tied.push_back(back.prev_mean.equality_active() && back.prev_mean.value == 0);
    x = back.prev_mean.resolve(x);
    end = back.prev_end;
    state = edge.source;
    back = table.find(state, end - 1, x);
  }
  const auto starts = graph.start_states();
  if (std::find(starts.begin(), starts.end(), state) == starts.end()) {
    throw Error(ErrorCode::InternalConsistency, "decoded path does not begin in a start state");
  }
  std::reverse(means.begin(), means.end());
  std::reverse(ends.begin(), ends.end());
  std::reverse(states.begin(), states.end());
  std::reverse(edges.begin(), edges.end());
  std::reverse(tied.begin(), tied.end());

  PenalizedSolution sol;
  Segmentation& seg = sol.segmentation;
  seg.k = static_cast<int>(means.size());
  for (double& m : means) m = Loss::to_mean(m);
  seg.means = std::move(means);
  seg.ends = std::move(ends);
  seg.states = std::move(states);
  seg.tied = std::move(tied);
  seg.total_cost = recompute_loss<Loss>(data, seg);
  sol.penalized_cost = best.cost * (options.mean_cost ? data.total_weight() : 1.0);
  sol.change_count = seg.k - 1;
  sol.edges = std::move(edges);
  sol.stats = table.stats();
  return sol;
}

/// Penalized reduced isotonic regression: one state, non-decreasing changes.
template <LossPolicy Loss>
PenalizedSolution gfpop_isotonic(const WeightedSequence& data, double penalty, const SolverOptions& options = {}) {
  const std::array<double, 1> p{penalty};
  return gfpop_solve<Loss>(data, preset_graph(GraphPreset::Isotonic, p), options);
}

}  // namespace fpseg
