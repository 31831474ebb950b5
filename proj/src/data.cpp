#include "ffvd/data.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <unordered_map>

#include "ffvd/error.hpp"
#include "ffvd/io.hpp"
#include "ffvd/predict.hpp"

namespace ffvd {

void Dataset::validate() const {
  if (y.rows() < 1 || y.cols() < 1) throw DataError("dataset needs at least one observation column and row");
  if (a.rows() != y.rows()) throw ShapeError("controls and observations differ in length");
  if (train_len < 1 || train_len > T()) {
    throw DataError("train_len " + std::to_string(train_len) + " outside [1, " +
                    std::to_string(T()) + "]");
  }
  if (!y.allFinite() || !a.allFinite()) throw DataError("dataset has non-finite entries");
}

Vec SyntheticTruth::transition_mean(const Eigen::Ref<const Vec>& x_prev) const {
  return TransitionEvaluator(model, v)(x_prev, Vec(0)).mean;
}

SyntheticData generate_synthetic(std::uint64_t seed, const SyntheticSettings& s) {
  if (s.num_inducing < 1 || s.train_len < 1 || s.test_len < 0) {
    throw UsageError("synthetic settings need M >= 1 and train_len >= 1");
  }
  ModelParams p;
  p.d_x = 1;
  p.d_a = 0;
  p.d_y = 1;
  p.kernels = {{s.signal_variance, Vec::Constant(1, s.lengthscale)}};
  p.Z = Vec::LinSpaced(s.num_inducing, s.z_min, s.z_max);
  p.Q = Vec::Constant(1, s.process_variance);
  p.C = Mat::Identity(1, 1);
  p.d = Vec::Zero(1);
  p.R = Vec::Constant(1, s.observation_variance);
  p.x0_mean = Vec::Zero(1);
  p.x0_var = Vec::Ones(1);
  GpssmModel model(std::move(p));

  Rng rng(seed);
  // u ~ N(m_Z, K_Z) is drawn through its whitened coordinates.
  WhitenedInducing v{standard_normal(rng, s.num_inducing).transpose()};
  const int T = s.train_len + s.test_len;
  GenerativeDraw draw = sample_generative(model, v, Mat(T, 0), T, rng);

  Dataset data;
  data.y = std::move(draw.observations);
  data.a = Mat(T, 0);
  data.train_len = s.train_len;
  data.name = "synthetic";
  return {std::move(data), {std::move(model), std::move(v), std::move(draw.trajectory), s}};
}

Dataset load_csv(const std::filesystem::path& path, int d_y, int d_a, int train_len,
                 bool shift_controls) {
  if (d_y < 1 || d_a < 0) throw UsageError("need d_y >= 1 and d_a >= 0");
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = io::split_csv_line(line);
  std::unordered_map<std::string, int> column;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) column[header[j]] = j;
  std::vector<int> y_cols(d_y), a_cols(d_a);
  const auto find = [&](const std::string& name) {
    const auto it = column.find(name);
    if (it == column.end()) throw DataError(path.string() + ": missing column '" + name + "'");
    return it->second;
  };
  for (int i = 0; i < d_y; ++i) y_cols[i] = find("y" + std::to_string(i));
  for (int i = 0; i < d_a; ++i) a_cols[i] = find("a" + std::to_string(i));

  std::vector<std::vector<double>> rows;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = io::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    std::vector<double> values(d_y + d_a);
    for (int i = 0; i < d_y; ++i) values[i] = io::parse_double(cells[y_cols[i]], row, y_cols[i]);
    for (int i = 0; i < d_a; ++i) {
      values[d_y + i] = io::parse_double(cells[a_cols[i]], row, a_cols[i]);
    }
    rows.push_back(std::move(values));
  }
  const int T = static_cast<int>(rows.size());
  if (T < 1) throw DataError(path.string() + ": no data rows");

  Dataset data;
  data.y.resize(T, d_y);
  data.a.resize(T, d_a);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < d_y; ++i) data.y(t, i) = rows[t][i];
    for (int i = 0; i < d_a; ++i) data.a(t, i) = rows[t][d_y + i];
  }
  if (shift_controls && T > 1 && d_a > 0) {
    const Mat a = data.a;
    data.a.bottomRows(T - 1) = a.topRows(T - 1);
  }
  data.train_len = train_len;
  data.name = path.stem().string();
  data.validate();
  return data;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::string out;
  for (int i = 0; i < data.d_y(); ++i) out += (i ? ",y" : "y") + std::to_string(i);
  for (int i = 0; i < data.d_a(); ++i) out += ",a" + std::to_string(i);
  out += '\n';
  for (int t = 0; t < data.T(); ++t) {
    for (int i = 0; i < data.d_y(); ++i) {
      if (i) out += ',';
      out += io::format_double(data.y(t, i));
    }
    for (int i = 0; i < data.d_a(); ++i) out += "," + io::format_double(data.a(t, i));
    out += '\n';
  }
  io::write_file(path, out);
}

namespace {

void column_stats(const Mat& block, const char* prefix, Vec& mean, Vec& std) {
  mean = block.colwise().mean().transpose();
  std.resize(block.cols());
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    std[j] = std::sqrt((block.col(j).array() - mean[j]).square().mean());
    if (!(std[j] > 0.0)) {
      throw DataError(std::string("column ") + prefix + std::to_string(j) +
                      " has zero variance in the training block");
    }
  }
}

}  // namespace

Dataset standardize(const Dataset& data) {
  data.validate();
  Dataset out = data;
  Vec y_mean, y_std, a_mean, a_std;
  column_stats(data.y_train(), "y", y_mean, y_std);
  column_stats(data.a_train(), "a", a_mean, a_std);
  out.y = (data.y.rowwise() - y_mean.transpose()).array().rowwise() / y_std.transpose().array();
  out.a = (data.a.rowwise() - a_mean.transpose()).array().rowwise() / a_std.transpose().array();

  // Compose with any earlier standardization so that inversion recovers the raw scale.
  auto& st = out.stats;
  if (data.stats.applied) {
    st.y_mean = data.stats.y_mean + data.stats.y_std.cwiseProduct(y_mean);
    st.y_std = data.stats.y_std.cwiseProduct(y_std);
    st.a_mean = data.stats.a_mean + data.stats.a_std.cwiseProduct(a_mean);
    st.a_std = data.stats.a_std.cwiseProduct(a_std);
  } else {
    st.y_mean = y_mean;
    st.y_std = y_std;
    st.a_mean = a_mean;
    st.a_std = a_std;
  }
  st.applied = true;
  return out;
}

PredictiveSummary unstandardize_predictions(const PredictiveSummary& summary,
                                            const Standardization& stats) {
  if (!stats.applied) return summary;
  if (summary.mean.cols() != stats.y_mean.size() || summary.std.cols() != stats.y_std.size()) {
    throw ShapeError("prediction columns do not match standardization statistics");
  }
  PredictiveSummary out;
  out.mean = (summary.mean.array().rowwise() * stats.y_std.transpose().array()).rowwise() +
             stats.y_mean.transpose().array();
  out.std = summary.std.array().rowwise() * stats.y_std.transpose().array();
  return out;
}

}  // namespace ffvd
