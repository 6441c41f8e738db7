#pragma once

// Text formats used by the command-line tool.
//
// Sample files are CSV with a header `rank_1,...,rank_d,weight`; the weight
// column may be omitted, in which case weights are uniform. A file without
// a header is read as one comma-separated permutation per line. Lines
// starting with '#' are comments everywhere.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "permqmc/discrepancy.hpp"
#include "permqmc/error.hpp"
#include "permqmc/games.hpp"
#include "permqmc/permutation.hpp"

namespace permqmc {

/// Shortest round-tripping decimal form of a double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) {
    throw Error(Errc::invalid_arguments, where + ": cannot parse number '" + s + "'");
  }
  return v;
}

// Next non-empty, non-comment line; false at end of input.
inline bool next_data_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (!line.empty() && line.front() != '#') return true;
  }
  return false;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot open '" + path + "'");
  return in;
}

}  // namespace detail

inline void write_samples_csv(std::ostream& out, const WeightedSampleSet& set) {
  set.validate();
  const int d = set.dim();
  for (int i = 1; i <= d; ++i) out << "rank_" << i << ',';
  out << "weight\n";
  for (std::size_t k = 0; k < set.size(); ++k) {
    out << format_permutation(set.samples[k]) << ',' << format_double(set.weights[k]) << '\n';
  }
}

inline WeightedSampleSet read_samples(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!detail::next_data_line(in, line, line_no)) {
    throw Error(Errc::invalid_arguments, "sample file is empty");
  }
  std::vector<Permutation> samples;
  std::vector<double> weights;
  bool weighted = false;
  int d = 0;
  if (line.rfind("rank_", 0) == 0) {
    const auto header = detail::split_csv(line);
    for (const auto& h : header) {
      if (h.rfind("rank_", 0) == 0) {
        ++d;
      } else if (h == "weight") {
        weighted = true;
      } else {
        throw Error(Errc::invalid_arguments, "unexpected sample column '" + h + "'");
      }
    }
    if (static_cast<std::size_t>(d + (weighted ? 1 : 0)) != header.size() ||
        (weighted && header.back() != "weight")) {
      throw Error(Errc::invalid_arguments, "weight must be the last sample column");
    }
    while (detail::next_data_line(in, line, line_no)) {
      const auto fields = detail::split_csv(line);
      if (fields.size() != header.size()) {
        throw Error(Errc::invalid_arguments, "line " + std::to_string(line_no) + ": expected " +
                                                 std::to_string(header.size()) + " fields");
      }
      std::string ranks;
      for (int i = 0; i < d; ++i) ranks += (i ? "," : "") + fields[i];
      samples.push_back(parse_permutation(ranks));
      if (weighted) {
        weights.push_back(detail::parse_number(fields.back(), "line " + std::to_string(line_no)));
      }
    }
  } else {
    do {
      samples.push_back(parse_permutation(line));
    } while (detail::next_data_line(in, line, line_no));
  }
  if (samples.empty()) throw Error(Errc::invalid_arguments, "sample file has no permutations");
  WeightedSampleSet set;
  if (weighted) {
    set.samples = std::move(samples);
    set.weights = std::move(weights);
    set.meta.algorithm = "file";
  } else {
    set = WeightedSampleSet::uniform(std::move(samples), "file");
  }
  set.validate();
  return set;
}

inline WeightedSampleSet read_samples_file(const std::string& path) {
  auto in = detail::open_input(path);
  return read_samples(in);
}

/// Numeric CSV with a header row.
struct Table {
  std::vector<std::string> columns;
  std::vector<Row> rows;
};

inline Table read_table(std::istream& in) {
  Table t;
  std::string line;
  int line_no = 0;
  if (!detail::next_data_line(in, line, line_no)) {
    throw Error(Errc::invalid_arguments, "table is empty");
  }
  t.columns = detail::split_csv(line);
  while (detail::next_data_line(in, line, line_no)) {
    const auto fields = detail::split_csv(line);
    if (fields.size() != t.columns.size()) {
      throw Error(Errc::invalid_arguments, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(t.columns.size()) + " fields, got " +
                                               std::to_string(fields.size()));
    }
    Row r;
    r.reserve(fields.size());
    for (const auto& f : fields) r.push_back(detail::parse_number(f, "line " + std::to_string(line_no)));
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline Table read_table_file(const std::string& path) {
  auto in = detail::open_input(path);
  return read_table(in);
}

}  // namespace permqmc
