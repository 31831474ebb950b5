#include "ffvd/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ffvd/error.hpp"

namespace ffvd::io {
namespace {

/// Rows of a CSV file after checking its header; the header itself is skipped.
std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path,
                                                 const std::string& expected_header) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header) {
    throw DataError(path.string() + ": expected header '" + expected_header + "', found '" +
                    line + "'");
  }
  std::vector<std::vector<std::string>> rows;
  const auto width = split_csv_line(expected_header).size();
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != width) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

long parse_index(const std::string& cell, long row, long col) {
  long value = 0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 0) {
    throw DataError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                    ": expected a non-negative integer, found '" + cell + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& cell, long row, long col) {
  std::size_t start = cell.find_first_not_of(" \t");
  std::size_t stop = cell.find_last_not_of(" \t");
  const std::string s = start == std::string::npos ? "" : cell.substr(start, stop - start + 1);
  double value = 0.0;
  const auto* begin = s.data() + (!s.empty() && s[0] == '+' ? 1 : 0);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw DataError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                    ": cannot parse '" + cell + "' as a finite number");
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
  if (!out) throw DataError("failed writing " + path.string());
}

void write_trace(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
  std::string out = "iter,log_target,train_loglik\n";
  for (const auto& r : trace) {
    out += std::to_string(r.iter) + ',' + format_double(r.log_target) + ',' +
           format_double(r.train_loglik) + '\n';
  }
  write_file(path, out);
}

std::vector<TraceRow> read_trace(const std::filesystem::path& path) {
  const auto rows = read_table(path, "iter,log_target,train_loglik");
  std::vector<TraceRow> trace;
  trace.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const long r = static_cast<long>(i) + 1;
    trace.push_back({parse_index(rows[i][0], r, 0), parse_double(rows[i][1], r, 1),
                     parse_double(rows[i][2], r, 2)});
  }
  return trace;
}

void write_sample_states(const SampleStore& store, const std::filesystem::path& path) {
  std::string out = "sample,t,dim,value\n";
  for (std::size_t s = 0; s < store.draws.size(); ++s) {
    const Mat& X = store.draws[s].trajectory.states;
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
      for (Eigen::Index d = 0; d < X.cols(); ++d) {
        out += std::to_string(s) + ',' + std::to_string(t) + ',' + std::to_string(d) + ',' +
               format_double(X(t, d)) + '\n';
      }
    }
  }
  write_file(path, out);
}

void write_sample_inducing(const SampleStore& store, const std::filesystem::path& path) {
  std::string out = "sample,dim,m,value\n";
  for (std::size_t s = 0; s < store.draws.size(); ++s) {
    const Mat& V = store.draws[s].v.v;
    for (Eigen::Index d = 0; d < V.rows(); ++d) {
      for (Eigen::Index m = 0; m < V.cols(); ++m) {
        out += std::to_string(s) + ',' + std::to_string(d) + ',' + std::to_string(m) + ',' +
               format_double(V(d, m)) + '\n';
      }
    }
  }
  write_file(path, out);
}

SampleStore read_samples(const std::filesystem::path& states_path,
                         const std::filesystem::path& inducing_path) {
  using Key = std::array<long, 3>;
  const auto load = [](const std::filesystem::path& path, const std::string& header) {
    std::map<Key, double> cells;
    Key extent{0, 0, 0};
    const auto rows = read_table(path, header);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const long r = static_cast<long>(i) + 1;
      const Key k{parse_index(rows[i][0], r, 0), parse_index(rows[i][1], r, 1),
                  parse_index(rows[i][2], r, 2)};
      for (int j = 0; j < 3; ++j) extent[j] = std::max(extent[j], k[j] + 1);
      if (!cells.emplace(k, parse_double(rows[i][3], r, 3)).second) {
        throw DataError(path.string() + ": duplicate entry at row " + std::to_string(r));
      }
    }
    if (cells.empty()) extent = {0, 0, 0};
    if (static_cast<long>(cells.size()) != extent[0] * extent[1] * extent[2]) {
      throw DataError(path.string() + ": incomplete sample table");
    }
    return std::pair{cells, extent};
  };
  const auto [states, se] = load(states_path, "sample,t,dim,value");
  const auto [inducing, ie] = load(inducing_path, "sample,dim,m,value");
  if (se[0] != ie[0]) throw DataError("state and inducing sample files hold different draw counts");

  SampleStore store;
  store.draws.resize(se[0]);
  for (long s = 0; s < se[0]; ++s) {
    auto& d = store.draws[s];
    d.trajectory.states.resize(se[1], se[2]);
    d.v.v.resize(ie[1], ie[2]);
  }
  for (const auto& [k, value] : states) store.draws[k[0]].trajectory.states(k[1], k[2]) = value;
  for (const auto& [k, value] : inducing) store.draws[k[0]].v.v(k[1], k[2]) = value;
  return store;
}

void write_predictions(const PredictiveSummary& summary, int first_row,
                       const std::filesystem::path& path) {
  std::string out = "t,dim,mean,std\n";
  for (Eigen::Index h = 0; h < summary.mean.rows(); ++h) {
    for (Eigen::Index d = 0; d < summary.mean.cols(); ++d) {
      out += std::to_string(first_row + h) + ',' + std::to_string(d) + ',' +
             format_double(summary.mean(h, d)) + ',' + format_double(summary.std(h, d)) + '\n';
    }
  }
  write_file(path, out);
}

PredictionFile read_predictions(const std::filesystem::path& path) {
  const auto rows = read_table(path, "t,dim,mean,std");
  if (rows.empty()) throw DataError(path.string() + ": no predictions");
  std::map<std::pair<long, long>, std::pair<double, double>> cells;
  long t_min = -1, t_max = -1, dims = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const long r = static_cast<long>(i) + 1;
    const long t = parse_index(rows[i][0], r, 0), d = parse_index(rows[i][1], r, 1);
    cells[{t, d}] = {parse_double(rows[i][2], r, 2), parse_double(rows[i][3], r, 3)};
    t_min = t_min < 0 ? t : std::min(t_min, t);
    t_max = std::max(t_max, t);
    dims = std::max(dims, d + 1);
  }
  const long steps = t_max - t_min + 1;
  if (static_cast<long>(cells.size()) != steps * dims) {
    throw DataError(path.string() + ": predictions are not a complete t x dim grid");
  }
  PredictionFile out;
  out.first_row = static_cast<int>(t_min);
  out.mean.resize(steps, dims);
  out.std.resize(steps, dims);
  for (long h = 0; h < steps; ++h) out.rows.push_back(static_cast<int>(t_min + h));
  for (const auto& [k, v] : cells) {
    out.mean(k.first - t_min, k.second) = v.first;
    out.std(k.first - t_min, k.second) = v.second;
  }
  return out;
}

void write_normality(const NormalityReport& report, const std::filesystem::path& path) {
  std::string out = "quantity,t_or_m,dim,k2,p\n";
  for (const auto& r : report.rows) {
    out += r.quantity + ',' + std::to_string(r.index) + ',' + std::to_string(r.dim) + ',' +
           format_double(r.k2) + ',' + format_double(r.p) + '\n';
  }
  write_file(path, out);
}

}  // namespace ffvd::io
