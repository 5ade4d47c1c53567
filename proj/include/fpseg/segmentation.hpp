#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "fpseg/error.hpp"
#include "fpseg/piecewise.hpp"

namespace fpseg {

/// Decoded model. Indices refer to the (run-length encoded) data sequence:
/// segment i covers points ends[i-1]+1 .. ends[i] (1-based, ends[-1] = 0).
struct Segmentation {
  int k = 0;
  std::vector<double> means;
  std::vector<int> ends;
  std::vector<int> states;
  /// tied[i]: the equality constraint between segments i and i+1 is active.
  std::vector<bool> tied;
  /// Un-normalized total loss (no penalties).
  double total_cost = 0;

  int start(int i) const { return i == 0 ? 0 : ends[static_cast<std::size_t>(i - 1)]; }

  int effective_segments() const {
    return 1 + static_cast<int>(std::count(tied.begin(), tied.end(), false));
  }

  /// Adjacent segments joined by an active equality constraint merged.
  Segmentation collapsed() const {
    Segmentation out;
    out.total_cost = total_cost;
    for (int i = 0; i < k; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const bool merge_with_prev = i > 0 && tied[u - 1];
      if (merge_with_prev) {
        out.ends.back() = ends[u];
        continue;
      }
      out.means.push_back(means[u]);
      out.ends.push_back(ends[u]);
      if (!states.empty()) out.states.push_back(states[u]);
      if (i > 0) out.tied.push_back(false);
    }
    out.k = static_cast<int>(out.means.size());
    return out;
  }
};

/// Stored interval counts of the cost functions, one cell per (row, column).
struct PruningStats {
  int rows = 0;
  int cols = 0;
  /// counts[row * cols + col]; 0 for cells that hold no function.
  std::vector<std::uint32_t> counts;
  double median = 0;
  std::uint32_t max = 0;
  double mean = 0;

  std::uint32_t at(int row, int col) const {
    return counts[static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(col)];
  }

  /// Summary over non-empty cells.
  void summarize() {
    std::vector<std::uint32_t> present;
    present.reserve(counts.size());
    double total = 0;
    for (auto c : counts) {
      if (c > 0) {
        present.push_back(c);
        total += c;
      }
    }
    if (present.empty()) return;
    max = *std::max_element(present.begin(), present.end());
    mean = total / static_cast<double>(present.size());
    const std::size_t mid = present.size() / 2;
    std::nth_element(present.begin(), present.begin() + static_cast<std::ptrdiff_t>(mid), present.end());
    const double upper = present[mid];
    if (present.size() % 2 == 1) {
      median = upper;
    } else {
      const double lower = *std::max_element(present.begin(), present.begin() + static_cast<std::ptrdiff_t>(mid));
      median = 0.5 * (lower + upper);
    }
  }
};

/// Piece boundaries and backpointers of every cost function, without the
/// coefficients. This is all decoding needs, at a third of the memory.
class BackpointerTable {
 public:
  BackpointerTable() = default;
  BackpointerTable(int rows, int cols, double lower)
      : rows_(rows),
        cols_(cols),
        lower_(lower),
        begin_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), kAbsent),
        count_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0) {}

  template <LossPolicy Loss>
  void store(int row, int col, const PiecewiseCost<Loss>& f) {
    const std::size_t cell = index(row, col);
    begin_[cell] = arena_.size();
    count_[cell] = static_cast<std::uint32_t>(f.size());
    for (const auto& p : f.pieces()) {
      arena_.push_back({p.upper, p.back.prev_mean.value, p.back.prev_end, static_cast<std::int16_t>(p.back.edge),
                        p.back.prev_mean.kind});
    }
  }

  bool present(int row, int col) const { return begin_[index(row, col)] != kAbsent; }
  std::uint32_t count(int row, int col) const { return count_[index(row, col)]; }

  /// Backpointers of the piece containing coordinate x.
  Backpointer find(int row, int col, double x) const {
    const std::size_t cell = index(row, col);
    if (begin_[cell] == kAbsent) throw Error(ErrorCode::InternalConsistency, "decoding reached an empty cost function");
    const auto first = arena_.begin() + static_cast<std::ptrdiff_t>(begin_[cell]);
    const auto last = first + count_[cell];
    const double slack = kMergeTolerance * std::max(1.0, std::abs(x));
    if (!(x >= lower_ - slack) || !(x <= (last - 1)->upper + slack)) {
      throw Error(ErrorCode::OutOfRange, "decoded mean outside the cost function domain");
    }
    auto it = std::lower_bound(first, last, x, [](const Stored& s, double v) { return s.upper < v; });
    if (it == last) --it;
    return {it->prev_end, it->edge, PrevMean{it->kind, it->prev_value}};
  }

  PruningStats stats() const {
    PruningStats s;
    s.rows = rows_;
    s.cols = cols_;
    s.counts = count_;
    s.summarize();
    return s;
  }

  std::size_t stored_pieces() const { return arena_.size(); }

 private:
  struct Stored {
    double upper;
    double prev_value;
    std::int32_t prev_end;
    std::int16_t edge;
    PrevMean::Kind kind;
  };
  static constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();

  std::size_t index(int row, int col) const {
    if (row < 0 || row >= rows_ || col < 0 || col >= cols_) {
      throw Error(ErrorCode::InternalConsistency, "cost table index out of range");
    }
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col);
  }

  int rows_ = 0;
  int cols_ = 0;
  double lower_ = 0;
  std::vector<Stored> arena_;
  std::vector<std::size_t> begin_;
  std::vector<std::uint32_t> count_;
};

}  // namespace fpseg
