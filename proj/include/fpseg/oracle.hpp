#pragma once

// Deliberately simple reference solvers for verification:
//   - segment_cost:        direct evaluation of one segment
//   - dpa_unconstrained:   O(K n^2) exact dynamic programming over changepoints
//   - enumerate_*:         every changepoint placement, each fitted by a DP
//                          over a grid of candidate means

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fpseg/constraint.hpp"
#include "fpseg/error.hpp"
#include "fpseg/loss.hpp"
#include "fpseg/sequence.hpp"
#include "fpseg/state_graph.hpp"

namespace fpseg::oracle {

/// Weighted loss of mean `mean` on points lo+1..hi (0 <= lo < hi <= n).
template <LossPolicy Loss>
double segment_cost(const WeightedSequence& data, int lo, int hi, double mean) {
  if (lo < 0 || hi > data.size() || lo >= hi) throw Error(ErrorCode::OutOfRange, "segment bounds out of range");
  double total = 0;
  for (int t = lo; t < hi; ++t) total += Loss::loss(data.value(t), data.weight(t), mean);
  return total;
}

/// Sufficient statistics of a run of points: sum w, sum w*y, sum w*y^2.
struct Moments {
  double w = 0;
  double wy = 0;
  double wyy = 0;

  Moments& operator+=(const Moments& o) {
    w += o.w;
    wy += o.wy;
    wyy += o.wyy;
    return *this;
  }
  double mean() const { return wy / w; }
};

template <LossPolicy Loss>
double moment_cost(const Moments& m, double mean) {
  if constexpr (Loss::family == LossFamily::Square) {
    return m.w * mean * mean - 2 * m.wy * mean + m.wyy;
  } else {
    if (m.wy == 0) return m.w * mean;
    if (mean <= 0) return kInf;
    return m.w * mean - m.wy * std::log(mean);
  }
}

/// Cost at the weighted mean, which minimizes both losses.
template <LossPolicy Loss>
double best_moment_cost(const Moments& m) {
  if constexpr (Loss::family == LossFamily::Square) {
    return std::max(0.0, m.wyy - m.wy * m.wy / m.w);
  } else {
    if (m.wy == 0) return 0;
    return m.wy - m.wy * std::log(m.wy / m.w);
  }
}

class PrefixMoments {
 public:
  explicit PrefixMoments(const WeightedSequence& data) : sums_(static_cast<std::size_t>(data.size()) + 1) {
    for (int t = 0; t < data.size(); ++t) {
      const double w = data.weight(t);
      const double y = data.value(t);
      Moments m = sums_[static_cast<std::size_t>(t)];
      m += Moments{w, w * y, w * y * y};
      sums_[static_cast<std::size_t>(t) + 1] = m;
    }
  }
  /// Moments of points lo+1..hi.
  Moments range(int lo, int hi) const {
    const auto& a = sums_[static_cast<std::size_t>(lo)];
    const auto& b = sums_[static_cast<std::size_t>(hi)];
    return {b.w - a.w, b.wy - a.wy, b.wyy - a.wyy};
  }

 private:
  std::vector<Moments> sums_;
};

struct UnconstrainedPath {
  /// costs[k-1], ends[k-1], means[k-1] for the optimal k-segment model.
  std::vector<double> costs;
  std::vector<std::vector<int>> ends;
  std::vector<std::vector<double>> means;
};

template <LossPolicy Loss>
UnconstrainedPath dpa_unconstrained(const WeightedSequence& data, int K) {
  const int n = data.size();
  if (K < 1 || K > n) throw Error(ErrorCode::Infeasible, "need 1 <= K <= n");
  const PrefixMoments pm(data);
  const auto nu = static_cast<std::size_t>(n);
  // best[k][t]: optimal cost of the first t points in k+1 segments.
  std::vector<std::vector<double>> best(static_cast<std::size_t>(K), std::vector<double>(nu + 1, kInf));
  std::vector<std::vector<int>> arg(static_cast<std::size_t>(K), std::vector<int>(nu + 1, 0));
  for (int t = 1; t <= n; ++t) best[0][static_cast<std::size_t>(t)] = best_moment_cost<Loss>(pm.range(0, t));
  for (int k = 1; k < K; ++k) {
    auto& row = best[static_cast<std::size_t>(k)];
    const auto& up = best[static_cast<std::size_t>(k - 1)];
    for (int t = k + 1; t <= n; ++t) {
      for (int s = k; s < t; ++s) {
        const double c = up[static_cast<std::size_t>(s)] + best_moment_cost<Loss>(pm.range(s, t));
        if (c < row[static_cast<std::size_t>(t)]) {
          row[static_cast<std::size_t>(t)] = c;
          arg[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] = s;
        }
      }
    }
  }
  UnconstrainedPath out;
  for (int k = 1; k <= K; ++k) {
    std::vector<int> ends(static_cast<std::size_t>(k));
    int t = n;
    for (int j = k - 1; j >= 0; --j) {
      ends[static_cast<std::size_t>(j)] = t;
      t = arg[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
    }
    std::vector<double> means;
    int start = 0;
    for (int e : ends) {
      means.push_back(pm.range(start, e).mean());
      start = e;
    }
    out.costs.push_back(best[static_cast<std::size_t>(k - 1)][nu]);
    out.ends.push_back(std::move(ends));
    out.means.push_back(std::move(means));
  }
  return out;
}

struct GridOptions {
  /// Points of the uniform grid over [min(y), max(y)].
  int grid_size = 512;
  /// The refinement pass adds refine_points points within refine_radius
  /// coarse steps of every fitted mean.
  int refine_points = 64;
  double refine_radius = 2;
  /// Also try the pooled mean of every run of adjacent segments. These
  /// contain the exact optimum whenever no constraint has a gap.
  bool block_means = true;
  /// Largest n the enumerations accept.
  int max_points = 12;
};

struct OracleFit {
  double cost = kInf;
  std::vector<int> ends;
  std::vector<double> means;
  std::vector<int> states;
  /// Edge taken at each change (graph enumeration) or change index.
  std::vector<int> edges;
};

namespace detail {

// Best means and states for fixed segment ends: DP over segments where the
// state space is (graph state, grid point).
template <LossPolicy Loss>
OracleFit fit_on_grid(const std::vector<Moments>& segs, const StateGraph& graph, const std::vector<double>& grid) {
  const std::size_t m = segs.size();
  const std::size_t G = grid.size();
  const auto S = static_cast<std::size_t>(graph.state_count());
  const auto cell = [&](std::size_t s, std::size_t g) { return s * G + g; };

  std::vector<std::vector<double>> value(m, std::vector<double>(S * G, kInf));
  std::vector<std::vector<int>> from_edge(m, std::vector<int>(S * G, -1));
  std::vector<std::vector<int>> from_point(m, std::vector<int>(S * G, -1));
  std::vector<double> h(G);

  for (std::size_t g = 0; g < G; ++g) h[g] = moment_cost<Loss>(segs[0], grid[g]);
  for (int s : graph.start_states()) {
    for (std::size_t g = 0; g < G; ++g) value[0][cell(static_cast<std::size_t>(s), g)] = h[g];
  }

  std::vector<double> run(G);
  std::vector<int> run_arg(G);
  for (std::size_t j = 1; j < m; ++j) {
    for (std::size_t g = 0; g < G; ++g) h[g] = moment_cost<Loss>(segs[j], grid[g]);
    for (int e = 0; e < static_cast<int>(graph.edges().size()); ++e) {
      const auto& edge = graph.edge(e);
      const auto src = static_cast<std::size_t>(edge.source);
      const auto dst = static_cast<std::size_t>(edge.target);
      const double* prev = &value[j - 1][cell(src, 0)];
      // run[i]: min of prev over the feasible prefix/suffix ending at i.
      const auto kind = edge.constraint.kind;
      if (kind == ChangeKind::NonIncreasing) {
        for (std::size_t i = G; i-- > 0;) {
          const bool better = i + 1 == G || prev[i] < run[i + 1];
          run[i] = better ? prev[i] : run[i + 1];
          run_arg[i] = better ? static_cast<int>(i) : run_arg[i + 1];
        }
      } else {
        for (std::size_t i = 0; i < G; ++i) {
          const bool better = i == 0 || prev[i] < run[i - 1];
          run[i] = better ? prev[i] : run[i - 1];
          run_arg[i] = better ? static_cast<int>(i) : run_arg[i - 1];
        }
      }
      const double gap = edge.constraint.gap;
      for (std::size_t g = 0; g < G; ++g) {
        std::ptrdiff_t idx;
        if (kind == ChangeKind::Any) {
          idx = static_cast<std::ptrdiff_t>(G) - 1;
        } else if (kind == ChangeKind::NonDecreasing) {
          // largest i with grid[i] + gap <= grid[g]
          idx = std::upper_bound(grid.begin(), grid.end(), grid[g] - gap) - grid.begin() - 1;
          if (gap == 0) idx = static_cast<std::ptrdiff_t>(g);
        } else {
          idx = std::lower_bound(grid.begin(), grid.end(), grid[g] + gap) - grid.begin();
          if (gap == 0) idx = static_cast<std::ptrdiff_t>(g);
        }
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(G)) continue;
        const double c = run[static_cast<std::size_t>(idx)] + edge.penalty + h[g];
        double& slot = value[j][cell(dst, g)];
        if (c < slot) {
          slot = c;
          from_edge[j][cell(dst, g)] = e;
          from_point[j][cell(dst, g)] = run_arg[static_cast<std::size_t>(idx)];
        }
      }
    }
  }

  OracleFit fit;
  std::size_t best_cell = 0;
  for (int s : graph.end_states()) {
    for (std::size_t g = 0; g < G; ++g) {
      const double c = value[m - 1][cell(static_cast<std::size_t>(s), g)];
      if (c < fit.cost) {
        fit.cost = c;
        best_cell = cell(static_cast<std::size_t>(s), g);
      }
    }
  }
  if (fit.cost == kInf) return fit;
  fit.means.assign(m, 0);
  fit.states.assign(m, 0);
  fit.edges.assign(m - 1, -1);
  std::size_t c = best_cell;
  for (std::size_t j = m; j-- > 0;) {
    fit.states[j] = static_cast<int>(c / G);
    fit.means[j] = grid[c % G];
    if (j == 0) break;
    const int e = from_edge[j][c];
    fit.edges[j - 1] = e;
    c = cell(static_cast<std::size_t>(graph.edge(e).source), static_cast<std::size_t>(from_point[j][c]));
  }
  return fit;
}

inline void sort_unique(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

template <LossPolicy Loss>
OracleFit fit_partition(const WeightedSequence& data, const PrefixMoments& pm, const std::vector<int>& ends,
                        const StateGraph& graph, const GridOptions& opt) {
  const auto changes = static_cast<double>(ends.size() - 1);
  const auto [clo, chi] = mean_domain<Loss>(data, graph.max_gap() * changes);
  const double lo = Loss::to_mean(clo);
  const double hi = Loss::to_mean(chi);
  std::vector<Moments> segs;
  int start = 0;
  for (int e : ends) {
    segs.push_back(pm.range(start, e));
    start = e;
  }
  const int G = std::max(2, opt.grid_size);
  const double step = (hi - lo) / (G - 1);
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(G));
  for (int i = 0; i < G; ++i) grid.push_back(i == G - 1 ? hi : lo + step * i);
  if (opt.block_means) {
    for (std::size_t a = 0; a < segs.size(); ++a) {
      Moments pooled;
      for (std::size_t b = a; b < segs.size(); ++b) {
        pooled += segs[b];
        grid.push_back(std::clamp(pooled.mean(), lo, hi));
      }
    }
  }
  sort_unique(grid);
  OracleFit coarse = fit_on_grid<Loss>(segs, graph, grid);
  if (coarse.cost == kInf) return coarse;
  const double radius = opt.refine_radius * step;
  const int P = std::max(2, opt.refine_points);
  for (double m : coarse.means) {
    for (int i = 0; i <= P; ++i) {
      const double x = m - radius + 2 * radius * i / P;
      if (x >= lo && x <= hi) grid.push_back(x);
    }
  }
  sort_unique(grid);
  OracleFit fine = fit_on_grid<Loss>(segs, graph, grid);
  fine.ends = ends;
  return fine;
}

// The K-segment schedule as a path graph 0 -> 1 -> ... -> K-1.
inline StateGraph path_graph(int K, const ConstraintSchedule& schedule) {
  StateGraph g;
  for (int k = 0; k < K; ++k) g.add_state(std::to_string(k));
  for (int k = 1; k < K; ++k) g.add_edge(k - 1, k, 0, schedule.change(k));
  g.set_start({0});
  g.set_end({K - 1});
  return g;
}

// Lower bound for a placement: each segment at its unconstrained optimum.
template <LossPolicy Loss>
double relaxed_cost(const PrefixMoments& pm, const std::vector<int>& ends) {
  double total = 0;
  int start = 0;
  for (int e : ends) {
    total += best_moment_cost<Loss>(pm.range(start, e));
    start = e;
  }
  return total;
}

inline void check_size(const WeightedSequence& data, const GridOptions& opt) {
  if (data.size() > opt.max_points) {
    throw Error(ErrorCode::SizeGuard, "enumeration oracle limited to n <= " + std::to_string(opt.max_points));
  }
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "empty data");
}

}  // namespace detail

/// Means (and states) for fixed segment ends under a state graph.
template <LossPolicy Loss>
OracleFit fit_means(const WeightedSequence& data, const std::vector<int>& ends, const StateGraph& graph,
                    const GridOptions& opt = {}) {
  return detail::fit_partition<Loss>(data, PrefixMoments(data), ends, graph, opt);
}

/// Best K-segment model under a constraint schedule, over all placements.
template <LossPolicy Loss>
OracleFit enumerate_constrained(const WeightedSequence& data, int K, const ConstraintSchedule& schedule,
                                const GridOptions& opt = {}) {
  detail::check_size(data, opt);
  const int n = data.size();
  if (K < 1 || K > n) throw Error(ErrorCode::Infeasible, "need 1 <= K <= n");
  const PrefixMoments pm(data);
  const StateGraph graph = detail::path_graph(K, schedule);
  OracleFit best;
  // Choose K-1 of the n-1 boundaries.
  std::vector<int> ends(static_cast<std::size_t>(K));
  for (int k = 0; k < K - 1; ++k) ends[static_cast<std::size_t>(k)] = k + 1;
  ends.back() = n;
  while (true) {
    if (detail::relaxed_cost<Loss>(pm, ends) < best.cost) {
      OracleFit fit = detail::fit_partition<Loss>(data, pm, ends, graph, opt);
      if (fit.cost < best.cost) best = std::move(fit);
    }
    int i = K - 2;
    while (i >= 0 && ends[static_cast<std::size_t>(i)] == n - (K - 1 - i)) --i;
    if (i < 0) break;
    ++ends[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < K - 1; ++j) ends[static_cast<std::size_t>(j)] = ends[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

/// Best penalized model over every changepoint set and state path.
template <LossPolicy Loss>
OracleFit enumerate_penalized(const WeightedSequence& data, const StateGraph& graph, const GridOptions& opt = {}) {
  detail::check_size(data, opt);
  const int n = data.size();
  const PrefixMoments pm(data);
  double min_penalty = kInf;
  for (const auto& e : graph.edges()) min_penalty = std::min(min_penalty, e.penalty);
  OracleFit best;
  const unsigned subsets = 1u << static_cast<unsigned>(n - 1);
  for (unsigned mask = 0; mask < subsets; ++mask) {
    std::vector<int> ends;
    for (int b = 0; b < n - 1; ++b) {
      if (mask & (1u << static_cast<unsigned>(b))) ends.push_back(b + 1);
    }
    ends.push_back(n);
    const auto changes = static_cast<double>(ends.size() - 1);
    if (changes > 0 && graph.edges().empty()) continue;
    const double bound = detail::relaxed_cost<Loss>(pm, ends) + (changes > 0 ? changes * min_penalty : 0.0);
    if (!(bound < best.cost)) continue;
    OracleFit fit = detail::fit_partition<Loss>(data, pm, ends, graph, opt);
    if (fit.cost < best.cost) best = std::move(fit);
  }
  if (best.cost == kInf) throw Error(ErrorCode::Infeasible, "no feasible model");
  return best;
}

}  // namespace fpseg::oracle
