// fpseg: constrained changepoint detection from the command line.
//
//   fpseg --model updown --loss poisson --segments 19 coverage.bedGraph --format bedgraph
//   printf '2\n1\n0\n4\n' | fpseg --model isotonic --penalty 1

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fpseg/fpseg.hpp"

namespace {

using namespace fpseg;
using json = nlohmann::json;

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;

struct Options {
  std::string model = "unconstrained";
  std::string graph_file;
  std::string loss = "square";
  std::optional<int> segments;
  std::vector<double> penalties;
  std::string format = "tsv";
  bool stats = false;
  bool bench = false;
  std::vector<int> bench_sizes{1000, 10000, 100000};
  int bench_reps = 3;
  std::uint64_t seed = 1;
  bool verify = false;
  bool peaks = false;
  double gap = 0;
  std::string input = "-";
  std::string output;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One fitted model, ready to print.
struct Fit {
  std::string label;  // "k=3" or "penalty=1"
  json k_or_penalty;
  Segmentation seg;
  double reported_cost = 0;
  std::optional<double> penalized_cost;
  std::vector<std::string> state_names;
};

struct SequenceResult {
  std::vector<Fit> fits;
  PruningStats stats;
  double wall_seconds = 0;
  std::string verify_note;
};

int exit_code(const Error& e) {
  if (e.code() == ErrorCode::Infeasible) return kExitInfeasible;
  if (e.code() == ErrorCode::Arity) return kExitUsage;
  return kExitError;
}

int thread_cap() {
  if (const char* env = std::getenv("FPSEG_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

StateGraph build_graph(const Options& o) {
  if (!o.graph_file.empty()) {
    std::ifstream in(o.graph_file);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open graph file '" + o.graph_file + "'");
    return StateGraph::parse(in);
  }
  const GraphPreset preset = parse_graph_preset(o.model);
  std::vector<double> p = o.penalties;
  // a single penalty applies to every edge of the preset
  if (p.size() == 1) p.assign(static_cast<std::size_t>(preset_penalty_count(preset)), p[0]);
  return preset_graph(preset, p, o.gap);
}

ConstraintSchedule build_schedule(const Options& o) {
  if (o.model == "unconstrained") return ConstraintSchedule::unconstrained();
  if (o.model == "isotonic") return ConstraintSchedule::isotonic(o.gap);
  if (o.model == "updown") return ConstraintSchedule::updown(o.gap);
  if (o.model == "unimodal") throw UsageError("--model unimodal needs --penalty (it has no segment-count form)");
  throw UsageError("unknown model '" + o.model + "'");
}

void check_close(double got, double want, const std::string& what) {
  if (std::abs(got - want) > 1e-5 * std::max(1.0, std::abs(want))) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "verification failed for " << what << ": solver " << got << ", oracle " << want;
    throw Error(ErrorCode::InternalConsistency, msg.str());
  }
}

template <LossPolicy Loss>
SequenceResult solve_sequence(const Options& o, const WeightedSequence& data) {
  SequenceResult out;
  const auto t0 = std::chrono::steady_clock::now();
  if (o.segments) {
    const ConstraintSchedule schedule = build_schedule(o);
    const int K = std::min(*o.segments, data.size());
    if (*o.segments > data.size()) {
      throw Error(ErrorCode::Infeasible, "--segments " + std::to_string(*o.segments) + " exceeds the " +
                                             std::to_string(data.size()) + " data points");
    }
    const auto res = gpdpa_solve<Loss>(data, K, schedule);
    out.stats = res.stats;
    const bool updown = schedule.is_updown();
    for (int k = 1; k <= K; ++k) {
      if (updown && k % 2 == 0) continue;
      const auto& m = res.models[static_cast<std::size_t>(k - 1)];
      if (!m) continue;
      Fit f;
      f.label = "k=" + std::to_string(k);
      f.k_or_penalty = k;
      f.seg = *m;
      f.reported_cost = m->total_cost;
      if (updown) {
        f.state_names = {"background", "peak"};
      } else {
        f.state_names = {"1"};
        f.seg.states.assign(static_cast<std::size_t>(k), 0);
      }
      out.fits.push_back(std::move(f));
    }
    if (out.fits.empty()) throw Error(ErrorCode::Infeasible, "no feasible model");
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.verify) {
      oracle::GridOptions g;
      if (data.size() > g.max_points) {
        out.verify_note = "verify skipped: more than " + std::to_string(g.max_points) + " points";
      } else {
        for (const auto& f : out.fits) {
          const int k = f.seg.k;
          if (schedule.change(1).kind == ChangeKind::Any && !schedule.has_gap()) {
            check_close(f.reported_cost, oracle::dpa_unconstrained<Loss>(data, k).costs.back(), f.label);
          } else {
            check_close(f.reported_cost, oracle::enumerate_constrained<Loss>(data, k, schedule, g).cost, f.label);
          }
        }
        out.verify_note = "verify ok";
      }
    }
    return out;
  }

  const StateGraph graph = build_graph(o);
  const auto sol = gfpop_solve<Loss>(data, graph);
  out.stats = sol.stats;
  Fit f;
  if (o.penalties.size() == 1) {
    f.k_or_penalty = o.penalties[0];
    f.label = "penalty=" + format_double(o.penalties[0]);
  } else if (o.penalties.empty()) {
    f.k_or_penalty = o.graph_file;
    f.label = "graph=" + o.graph_file;
  } else {
    f.k_or_penalty = o.penalties;
    std::string s;
    for (double p : o.penalties) s += (s.empty() ? "" : ",") + format_double(p);
    f.label = "penalty=" + s;
  }
  f.seg = sol.segmentation;
  f.reported_cost = sol.segmentation.total_cost;
  f.penalized_cost = sol.penalized_cost;
  f.state_names = graph.names();
  out.fits.push_back(std::move(f));
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.verify) {
    oracle::GridOptions g;
    if (data.size() > g.max_points) {
      out.verify_note = "verify skipped: more than " + std::to_string(g.max_points) + " points";
    } else {
      check_close(sol.penalized_cost, oracle::enumerate_penalized<Loss>(data, graph, g).cost, out.fits[0].label);
      out.verify_note = "verify ok";
    }
  }
  return out;
}

SequenceResult solve_any(const Options& o, LossFamily loss, const WeightedSequence& data) {
  return with_loss(loss, [&](auto l) { return solve_sequence<decltype(l)>(o, data); });
}

void print_fit(std::ostream& out, const Options& o, const Track& track, const Fit& f) {
  out << "# " << track.name << ' ' << f.label << " total_cost=" << format_double(f.reported_cost);
  if (f.penalized_cost) out << " penalized_cost=" << format_double(*f.penalized_cost);
  out << '\n';
  if (o.peaks) {
    for (const auto& [b, e] : peaks_from_segments(f.seg, track)) out << b << '\t' << e << '\n';
    return;
  }
  for (int i = 0; i < f.seg.k; ++i) {
    const auto [b, e] = track.span(f.seg, i);
    const int s = f.seg.states.empty() ? 0 : f.seg.states[static_cast<std::size_t>(i)];
    out << b << '\t' << e << '\t' << format_double(f.seg.means[static_cast<std::size_t>(i)]) << '\t'
        << f.state_names[static_cast<std::size_t>(s)] << '\n';
  }
}

json summary(const Track& track, const SequenceResult& r, const Fit& f) {
  json j;
  j["sequence"] = track.name;
  j["n"] = track.data.size();
  j["k_or_penalty"] = f.k_or_penalty;
  j["total_cost"] = f.reported_cost;
  if (f.penalized_cost) j["penalized_cost"] = *f.penalized_cost;
  j["change_count"] = f.seg.k - 1;
  j["intervals_median"] = r.stats.median;
  j["intervals_max"] = r.stats.max;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

std::vector<Track> read_tracks(const Options& o) {
  const InputFormat fmt = parse_input_format(o.format);
  if (o.input == "-") return ingest(std::cin, fmt);
  std::ifstream in(o.input);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open input '" + o.input + "'");
  return ingest(in, fmt);
}

int run_bench(const Options& o, LossFamily loss, std::ostream& out) {
  out << "n\twall_seconds\tintervals_median\tintervals_max\n";
  for (int n : o.bench_sizes) {
    std::vector<double> secs;
    SequenceResult last;
    for (int rep = 0; rep < o.bench_reps; ++rep) {
      const auto data = WeightedSequence::unit(synthetic_peaks(n, o.seed + static_cast<std::uint64_t>(rep)));
      last = solve_any(o, loss, data);
      secs.push_back(last.wall_seconds);
    }
    std::sort(secs.begin(), secs.end());
    out << n << '\t' << format_double(secs[secs.size() / 2]) << '\t' << format_double(last.stats.median) << '\t'
        << last.stats.max << '\n';
  }
  return 0;
}

int run(int argc, char** argv) {
  Options o;
  CLI::App app{"Constrained optimal changepoint detection by functional pruning"};
  app.add_option("input", o.input, "Input file, '-' for standard input")->capture_default_str();
  app.add_option("--model", o.model, "Model preset")
      ->check(CLI::IsMember({"unconstrained", "isotonic", "updown", "unimodal"}))
      ->capture_default_str();
  auto* graph_opt = app.add_option("--graph", o.graph_file, "State graph file (penalized models)");
  app.add_option("--loss", o.loss, "Loss")->check(CLI::IsMember({"square", "poisson"}))->capture_default_str();
  auto* seg_opt = app.add_option("--segments", o.segments, "Fit the best models with 1..K segments")
                      ->check(CLI::PositiveNumber);
  auto* pen_opt = app.add_option("--penalty", o.penalties, "Penalty per change; one value or one per preset edge")
                      ->delimiter(',');
  seg_opt->excludes(pen_opt);
  seg_opt->excludes(graph_opt);
  app.add_option("--format", o.format, "Input format")->check(CLI::IsMember({"tsv", "bedgraph"}))->capture_default_str();
  app.add_flag("--stats", o.stats, "Print a JSON summary line per model to standard error");
  app.add_flag("--peaks", o.peaks, "Print peak intervals of up-down models instead of segments");
  app.add_option("--gap", o.gap, "Minimum jump size of constrained changes (square loss)")->check(CLI::NonNegativeNumber);
  app.add_option("-o,--output", o.output, "Write results here instead of standard output");
  app.add_flag("--bench", o.bench, "Time the solver on synthetic peak data");
  app.add_option("--bench-sizes", o.bench_sizes, "Data sizes for --bench")->delimiter(',')->capture_default_str();
  app.add_option("--bench-reps", o.bench_reps, "Repetitions per size for --bench")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "Seed for --bench data")->capture_default_str();
  app.add_flag("--verify", o.verify, "Cross-check against the enumeration oracle (small inputs)")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (!o.segments && o.penalties.empty() && o.graph_file.empty()) {
      throw UsageError("exactly one of --segments or --penalty is required");
    }
    if (!o.graph_file.empty() && !o.penalties.empty()) throw UsageError("--penalty does not apply to --graph files");
    if (o.peaks && o.model != "updown" && o.graph_file.empty()) throw UsageError("--peaks needs --model updown");
    const LossFamily loss = parse_loss(o.loss);

    std::ofstream file;
    if (!o.output.empty()) {
      file.open(o.output);
      if (!file) throw Error(ErrorCode::InvalidArgument, "cannot write '" + o.output + "'");
    }
    std::ostream& out = o.output.empty() ? std::cout : file;

    if (o.bench) return run_bench(o, loss, out);

    const std::vector<Track> tracks = read_tracks(o);
    if (loss == LossFamily::Poisson) {
      for (const auto& t : tracks) t.data.require_counts();
    }

    // One solver per sequence; results are printed in input order.
    std::vector<std::optional<SequenceResult>> results(tracks.size());
    std::vector<std::exception_ptr> errors(tracks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < tracks.size(); i = next++) {
        try {
          results[i] = solve_any(o, loss, tracks[i].data);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), tracks.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (errors[i]) {
        try {
          std::rethrow_exception(errors[i]);
        } catch (const Error& e) {
          std::cerr << "fpseg: " << tracks[i].name << ": " << e.what() << '\n';
          return exit_code(e);
        }
      }
      for (const auto& f : results[i]->fits) {
        print_fit(out, o, tracks[i], f);
        if (o.stats) std::cerr << summary(tracks[i], *results[i], f).dump() << '\n';
      }
      if (!results[i]->verify_note.empty()) std::cerr << tracks[i].name << ": " << results[i]->verify_note << '\n';
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "fpseg: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "fpseg: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "fpseg: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
