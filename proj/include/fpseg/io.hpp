#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fpseg/error.hpp"
#include "fpseg/segmentation.hpp"
#include "fpseg/sequence.hpp"

namespace fpseg {

enum class InputFormat { Tsv, BedGraph };

inline InputFormat parse_input_format(std::string_view name) {
  if (name == "tsv") return InputFormat::Tsv;
  if (name == "bedgraph") return InputFormat::BedGraph;
  throw Error(ErrorCode::InvalidArgument, "unknown format '" + std::string(name) + "' (expected tsv|bedgraph)");
}

/// A run-length encoded sequence plus the coordinates each encoded point
/// covers: [begin[i], end[i]). For plain value lists these are positions in
/// the expanded input; for bedGraph they are genomic coordinates.
struct Track {
  std::string name;
  WeightedSequence data;
  std::vector<long long> begin;
  std::vector<long long> end;

  /// Coordinates of segment i of a model on this track.
  std::pair<long long, long long> span(const Segmentation& seg, int i) const {
    return {begin[static_cast<std::size_t>(seg.start(i))], end[static_cast<std::size_t>(seg.ends[static_cast<std::size_t>(i)] - 1)]};
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t j = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

[[noreturn]] inline void bad_line(int line_no, const std::string& why) {
  throw Error(ErrorCode::Format, "line " + std::to_string(line_no) + ": " + why);
}

inline bool skippable(std::string_view line) {
  const auto fields = split_fields(line);
  return fields.empty() || fields.front().front() == '#';
}

// Appends a point, merging it into the previous one when the value is equal
// and the coordinates touch.
struct TrackBuilder {
  std::vector<double> values;
  std::vector<double> weights;
  std::vector<long long> begin;
  std::vector<long long> end;

  void add(double value, double weight, long long b, long long e) {
    if (!values.empty() && values.back() == value && end.back() == b) {
      weights.back() += weight;
      end.back() = e;
      return;
    }
    values.push_back(value);
    weights.push_back(weight);
    begin.push_back(b);
    end.push_back(e);
  }

  Track finish(std::string name) {
    return {std::move(name), WeightedSequence(std::move(values), std::move(weights)), std::move(begin), std::move(end)};
  }
};

}  // namespace detail

/// One value per line with an optional positive weight: `value [weight]`.
/// Blank lines and lines starting with '#' are skipped.
inline Track read_values(std::istream& in, std::string name = "sequence") {
  detail::TrackBuilder b;
  std::string line;
  int line_no = 0;
  long long pos = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skippable(line)) continue;
    const auto f = detail::split_fields(line);
    if (f.size() > 2) detail::bad_line(line_no, "expected 'value [weight]'");
    const auto value = detail::parse_number<double>(f[0]);
    if (!value || !std::isfinite(*value)) detail::bad_line(line_no, "malformed value '" + std::string(f[0]) + "'");
    double weight = 1;
    if (f.size() == 2) {
      const auto w = detail::parse_number<double>(f[1]);
      if (!w || !(*w > 0) || !std::isfinite(*w)) detail::bad_line(line_no, "weight must be a positive number");
      weight = *w;
    }
    const auto width = static_cast<long long>(std::llround(weight));
    const long long span = std::abs(weight - static_cast<double>(width)) < 1e-9 && width > 0 ? width : 1;
    b.add(*value, weight, pos, pos + span);
    pos += span;
  }
  if (b.values.empty()) throw Error(ErrorCode::Format, "no data rows");
  return b.finish(std::move(name));
}

/// bedGraph rows `chrom start end count`, one track per chromosome in order
/// of first appearance. Rows must be sorted and non-overlapping per chrom;
/// `track` and `browser` header lines are skipped.
inline std::vector<Track> read_bedgraph(std::istream& in) {
  std::vector<std::string> names;
  std::vector<detail::TrackBuilder> builders;
  std::string line;
  int line_no = 0;
  std::size_t current = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::skippable(line)) continue;
    const auto f = detail::split_fields(line);
    if (f[0] == "track" || f[0] == "browser") continue;
    if (f.size() != 4) detail::bad_line(line_no, "expected 'chrom start end count'");
    const auto start = detail::parse_number<long long>(f[1]);
    const auto stop = detail::parse_number<long long>(f[2]);
    const auto count = detail::parse_number<long long>(f[3]);
    if (!start || !stop || *start < 0 || *stop <= *start) detail::bad_line(line_no, "bad interval");
    if (!count || *count < 0) detail::bad_line(line_no, "count must be a non-negative integer");
    if (names.empty() || names[current] != f[0]) {
      const auto it = std::find(names.begin(), names.end(), f[0]);
      if (it != names.end()) detail::bad_line(line_no, "rows for '" + std::string(f[0]) + "' are not contiguous");
      names.emplace_back(f[0]);
      builders.emplace_back();
      current = names.size() - 1;
    }
    auto& b = builders[current];
    if (!b.end.empty() && *start < b.end.back()) detail::bad_line(line_no, "interval overlaps or precedes the previous one");
    b.add(static_cast<double>(*count), static_cast<double>(*stop - *start), *start, *stop);
  }
  if (names.empty()) throw Error(ErrorCode::Format, "no data rows");
  std::vector<Track> tracks;
  for (std::size_t i = 0; i < names.size(); ++i) tracks.push_back(builders[i].finish(names[i]));
  return tracks;
}

inline std::vector<Track> ingest(std::istream& in, InputFormat format) {
  if (format == InputFormat::BedGraph) return read_bedgraph(in);
  std::vector<Track> out;
  out.push_back(read_values(in));
  return out;
}

/// Peaks of an up-down model: the segments in state 1, in track coordinates.
inline std::vector<std::pair<long long, long long>> peaks_from_segments(const Segmentation& seg, const Track& track) {
  if (static_cast<int>(seg.states.size()) != seg.k) {
    throw Error(ErrorCode::InvalidArgument, "peak extraction needs an up-down model with states");
  }
  std::vector<std::pair<long long, long long>> peaks;
  for (int i = 0; i < seg.k; ++i) {
    const int s = seg.states[static_cast<std::size_t>(i)];
    if (s != i % 2) throw Error(ErrorCode::InvalidArgument, "peak extraction needs alternating background/peak states");
    if (s == 1) peaks.push_back(track.span(seg, i));
  }
  if (seg.k > 0 && seg.states.back() != 0) throw Error(ErrorCode::InvalidArgument, "up-down model must end in background");
  return peaks;
}

/// %.17g, so that values round-trip exactly.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace fpseg
