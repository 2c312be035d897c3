#pragma once

// Trace CSV: `k,component,demand,usage,observation,allocation,backlog,mrt,cr`,
// one row per component per sample. mrt and cr are per-sample values and
// repeat on every component row. Numbers use the shortest representation
// that parses back to the same double, so replaying a trace is exact.

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "provisim/scenario.hpp"
#include "provisim/simcluster.hpp"

namespace provisim {

inline constexpr std::array<std::string_view, 9> kTraceColumns = {
    "k", "component", "demand", "usage", "observation", "allocation", "backlog", "mrt", "cr"};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string fmt_num(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

struct TraceRow {
  std::size_t k = 0;
  std::size_t component = 0;
  double demand = 0, usage = 0, observation = 0, allocation = 0, backlog = 0, mrt = 0;
  std::uint64_t cr = 0;
};

inline void write_trace(std::ostream& out, std::span<const StepRecord> records) {
  for (std::size_t i = 0; i < kTraceColumns.size(); ++i) out << (i ? "," : "") << kTraceColumns[i];
  out << '\n';
  for (const auto& r : records) {
    for (std::size_t c = 0; c < r.usage.size(); ++c) {
      out << r.k << ',' << c << ',' << fmt_num(r.demand[c]) << ',' << fmt_num(r.usage[c]) << ','
          << fmt_num(r.observation[c]) << ',' << fmt_num(r.allocation[c]) << ',' << fmt_num(r.backlog[c])
          << ',' << fmt_num(r.mrt) << ',' << r.completed << '\n';
    }
  }
}

// Reads a trace; extra columns are ignored, missing ones are a SchemaError
// naming the column.
inline std::vector<TraceRow> read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("trace is empty (missing header row)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split(line, ',');
  std::array<std::size_t, kTraceColumns.size()> idx{};
  for (std::size_t i = 0; i < kTraceColumns.size(); ++i) {
    std::size_t j = 0;
    while (j < header.size() && header[j] != kTraceColumns[i]) ++j;
    if (j == header.size()) throw SchemaError("trace is missing column '" + std::string(kTraceColumns[i]) + "'");
    idx[i] = j;
  }
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() < header.size()) {
      throw SchemaError("trace line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    try {
      TraceRow r;
      r.k = detail::parse_uint(f[idx[0]], "k");
      r.component = detail::parse_uint(f[idx[1]], "component");
      r.demand = detail::parse_double(f[idx[2]], "demand");
      r.usage = detail::parse_double(f[idx[3]], "usage");
      r.observation = detail::parse_double(f[idx[4]], "observation");
      r.allocation = detail::parse_double(f[idx[5]], "allocation");
      r.backlog = detail::parse_double(f[idx[6]], "backlog");
      r.mrt = detail::parse_double(f[idx[7]], "mrt");
      r.cr = detail::parse_uint(f[idx[8]], "cr");
      rows.push_back(r);
    } catch (const UsageError& e) {
      throw SchemaError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

// Regroups rows into per-sample observation vectors ordered by k, then
// component. Every sample must carry the same component set 0..n-1.
inline std::vector<Vec> observations_by_sample(std::span<const TraceRow> rows, std::size_t& components) {
  std::map<std::size_t, std::map<std::size_t, double>> grouped;
  for (const auto& r : rows) grouped[r.k][r.component] = r.observation;
  components = grouped.empty() ? 0 : grouped.begin()->second.size();
  std::vector<Vec> out;
  for (const auto& [k, comps] : grouped) {
    if (comps.size() != components || comps.rbegin()->first != components - 1) {
      throw SchemaError("trace sample " + std::to_string(k) + " has inconsistent components");
    }
    Vec y;
    for (const auto& [c, v] : comps) y.push_back(v);
    out.push_back(std::move(y));
  }
  return out;
}

// Write to a sibling temp file, then rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace provisim
