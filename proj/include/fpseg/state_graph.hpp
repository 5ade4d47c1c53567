#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpseg/constraint.hpp"
#include "fpseg/error.hpp"

namespace fpseg {

/// Directed graph of model states. Edges are the allowed changes, each with
/// a penalty and a constraint on the adjacent means. Staying in a state
/// without a change is always allowed and free.
class StateGraph {
 public:
  struct Edge {
    int source = 0;
    int target = 0;
    double penalty = 0;
    ChangeConstraint constraint;
  };

  int add_state(std::string name) {
    if (find_state(name) >= 0) throw Error(ErrorCode::InvalidArgument, "duplicate state '" + name + "'");
    names_.push_back(std::move(name));
    return static_cast<int>(names_.size()) - 1;
  }

  void add_edge(int source, int target, double penalty, ChangeConstraint constraint) {
    check_state(source);
    check_state(target);
    if (!(penalty >= 0) || !std::isfinite(penalty)) throw Error(ErrorCode::InvalidArgument, "edge penalties must be finite and non-negative");
    constraint.validate();
    edges_.push_back({source, target, penalty, constraint});
  }

  void set_start(std::vector<int> states) { start_ = checked(std::move(states)); }
  void set_end(std::vector<int> states) { end_ = checked(std::move(states)); }

  int state_count() const { return static_cast<int>(names_.size()); }
  const std::string& name(int s) const { return names_[static_cast<std::size_t>(s)]; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }

  /// Start/end sets; empty means every state.
  std::vector<int> start_states() const { return start_.empty() ? all_states() : start_; }
  std::vector<int> end_states() const { return end_.empty() ? all_states() : end_; }

  int find_state(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
  }

  void validate() const {
    if (names_.empty()) throw Error(ErrorCode::InvalidArgument, "state graph has no states");
  }

  bool has_gap() const { return max_gap() != 0; }
  double max_gap() const {
    double g = 0;
    for (const auto& e : edges_) g = std::max(g, e.constraint.gap);
    return g;
  }

  /// Text form, one edge per line:
  ///   source target penalty {any|up|down} [gap]
  ///   start: s1 s2
  ///   end: s1
  /// States are created in order of first mention; '#' starts a comment.
  static StateGraph parse(std::istream& in) {
    StateGraph g;
    std::vector<std::string> start_names;
    std::vector<std::string> end_names;
    std::string line;
    int line_no = 0;
    auto state_id = [&](const std::string& name) {
      const int s = g.find_state(name);
      return s >= 0 ? s : g.add_state(name);
    };
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream fields(line);
      std::string first;
      if (!(fields >> first)) continue;
      if (first == "start:" || first == "end:") {
        auto& dest = first == "start:" ? start_names : end_names;
        std::string s;
        while (fields >> s) dest.push_back(s);
        if (dest.empty()) throw Error(ErrorCode::Format, "line " + std::to_string(line_no) + ": empty state list");
        continue;
      }
      std::string target;
      std::string penalty_text;
      std::string kind_text;
      if (!(fields >> target >> penalty_text >> kind_text)) {
        throw Error(ErrorCode::Format, "line " + std::to_string(line_no) + ": expected 'source target penalty kind [gap]'");
      }
      double penalty = 0;
      double gap = 0;
      try {
        std::size_t used = 0;
        penalty = std::stod(penalty_text, &used);
        if (used != penalty_text.size()) throw std::invalid_argument("trailing");
        std::string gap_text;
        if (fields >> gap_text) {
          gap = std::stod(gap_text, &used);
          if (used != gap_text.size()) throw std::invalid_argument("trailing");
        }
        std::string extra;
        if (fields >> extra) throw std::invalid_argument("extra");
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::Format, "line " + std::to_string(line_no) + ": malformed number or extra field");
      }
      ChangeConstraint c{parse_change_kind(kind_text), gap};
      const int s = state_id(first);
      const int t = state_id(target);
      try {
        g.add_edge(s, t, penalty, c);
      } catch (const Error& e) {
        throw Error(ErrorCode::Format, "line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    auto resolve = [&](const std::vector<std::string>& names) {
      std::vector<int> ids;
      for (const auto& n : names) ids.push_back(state_id(n));
      return ids;
    };
    if (!start_names.empty()) g.set_start(resolve(start_names));
    if (!end_names.empty()) g.set_end(resolve(end_names));
    g.validate();
    return g;
  }

  std::string to_text() const {
    std::ostringstream out;
    out.precision(17);
    for (const auto& e : edges_) {
      out << name(e.source) << ' ' << name(e.target) << ' ' << e.penalty << ' ' << change_kind_name(e.constraint.kind);
      if (e.constraint.gap != 0) out << ' ' << e.constraint.gap;
      out << '\n';
    }
    auto list = [&](const char* label, const std::vector<int>& ids) {
      if (ids.empty()) return;
      out << label;
      for (int s : ids) out << ' ' << name(s);
      out << '\n';
    };
    list("start:", start_);
    list("end:", end_);
    return out.str();
  }

 private:
  void check_state(int s) const {
    if (s < 0 || s >= state_count()) throw Error(ErrorCode::InvalidArgument, "edge references an unknown state");
  }
  std::vector<int> checked(std::vector<int> states) const {
    if (states.empty()) throw Error(ErrorCode::InvalidArgument, "start/end state sets must be non-empty");
    for (int s : states) check_state(s);
    return states;
  }
  std::vector<int> all_states() const {
    std::vector<int> v(names_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
    return v;
  }

  std::vector<std::string> names_;
  std::vector<Edge> edges_;
  std::vector<int> start_;
  std::vector<int> end_;
};

enum class GraphPreset { Unconstrained, Isotonic, UpDown, Unimodal };

inline GraphPreset parse_graph_preset(std::string_view name) {
  if (name == "unconstrained") return GraphPreset::Unconstrained;
  if (name == "isotonic") return GraphPreset::Isotonic;
  if (name == "updown") return GraphPreset::UpDown;
  if (name == "unimodal") return GraphPreset::Unimodal;
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + std::string(name) + "'");
}

inline int preset_penalty_count(GraphPreset preset) {
  switch (preset) {
    case GraphPreset::Unconstrained:
    case GraphPreset::Isotonic: return 1;
    case GraphPreset::UpDown: return 2;
    case GraphPreset::Unimodal: return 4;
  }
  return 0;
}

/// The four standard models. Penalties: unconstrained/isotonic [lambda];
/// updown [up, down]; unimodal [up->up/down, up/down self, up/down->down,
/// down self]. `gap` applies to every constrained edge.
inline StateGraph preset_graph(GraphPreset preset, std::span<const double> penalties, double gap = 0) {
  const int want = preset_penalty_count(preset);
  if (static_cast<int>(penalties.size()) != want) {
    throw Error(ErrorCode::Arity, "model needs " + std::to_string(want) + " penalties, got " + std::to_string(penalties.size()));
  }
  StateGraph g;
  switch (preset) {
    case GraphPreset::Unconstrained: {
      const int s = g.add_state("1");
      g.add_edge(s, s, penalties[0], ChangeConstraint::any());
      break;
    }
    case GraphPreset::Isotonic: {
      const int s = g.add_state("1");
      g.add_edge(s, s, penalties[0], ChangeConstraint::up(gap));
      break;
    }
    case GraphPreset::UpDown: {
      const int bkg = g.add_state("background");
      const int peak = g.add_state("peak");
      g.add_edge(bkg, peak, penalties[0], ChangeConstraint::up(gap));
      g.add_edge(peak, bkg, penalties[1], ChangeConstraint::down(gap));
      g.set_start({bkg});
      g.set_end({bkg});
      break;
    }
    case GraphPreset::Unimodal: {
      const int up = g.add_state("up");
      const int updown = g.add_state("up/down");
      const int down = g.add_state("down");
      g.add_edge(up, updown, penalties[0], ChangeConstraint::up(gap));
      g.add_edge(updown, updown, penalties[1], ChangeConstraint::up(gap));
      g.add_edge(updown, down, penalties[2], ChangeConstraint::down(gap));
      g.add_edge(down, down, penalties[3], ChangeConstraint::down(gap));
      break;
    }
  }
  return g;
}

}  // namespace fpseg
