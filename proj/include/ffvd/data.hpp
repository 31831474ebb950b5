#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ffvd/model.hpp"

namespace ffvd {

struct Standardization {
  bool applied = false;
  Vec y_mean, y_std;  ///< d_y
  Vec a_mean, a_std;  ///< d_a
};

/// Observations y_1..y_T (row t-1 holds y_t) and controls a_1..a_T, where a_t
/// drives the transition into x_t. Rows [0, train_len) are the training block.
struct Dataset {
  Mat y;
  Mat a;
  int train_len = 0;
  Standardization stats;
  std::string name;

  int T() const { return static_cast<int>(y.rows()); }
  int d_y() const { return static_cast<int>(y.cols()); }
  int d_a() const { return static_cast<int>(a.cols()); }
  int test_len() const { return T() - train_len; }
  Mat y_train() const { return y.topRows(train_len); }
  Mat a_train() const { return a.topRows(train_len); }
  void validate() const;
};

struct SyntheticSettings {
  double signal_variance = 2.0;
  double lengthscale = 0.5;
  double process_variance = 0.01;
  double observation_variance = 0.01;
  int num_inducing = 20;
  double z_min = -2.0;
  double z_max = 2.0;
  int train_len = 120;
  int test_len = 30;
};

/// Ground truth behind a synthetic dataset.
struct SyntheticTruth {
  GpssmModel model;
  WhitenedInducing v;
  Trajectory trajectory;  ///< covers train + test steps
  SyntheticSettings settings;

  /// Mean of the true transition at x_prev (no controls).
  Vec transition_mean(const Eigen::Ref<const Vec>& x_prev) const;
};

struct SyntheticData {
  Dataset dataset;
  SyntheticTruth truth;
};

/// One-dimensional sparse GPSSM with SE kernel and inducing inputs evenly
/// spread over [z_min, z_max]; u ~ N(m_Z, K_Z) drawn once per seed.
SyntheticData generate_synthetic(std::uint64_t seed, const SyntheticSettings& settings = {});

/// CSV with header y0..y{d_y-1},a0..a{d_a-1}. With `shift_controls`, a row's
/// control is taken to drive the following transition and is moved down one
/// row (the first row repeats).
Dataset load_csv(const std::filesystem::path& path, int d_y, int d_a, int train_len,
                 bool shift_controls = false);
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// Z-score y and a columns with training-block statistics.
Dataset standardize(const Dataset& data);

struct PredictiveSummary;
PredictiveSummary unstandardize_predictions(const PredictiveSummary& summary,
                                            const Standardization& stats);

}  // namespace ffvd
