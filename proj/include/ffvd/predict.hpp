#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "ffvd/model.hpp"

namespace ffvd {

struct SampleStore;

/// Per-step predictive moments of the observations, aggregated over posterior
/// samples. Row h corresponds to the (h+1)-th step after the training block.
struct PredictiveSummary {
  Mat mean;  ///< horizon x d_y, across-sample mean of per-sample means
  Mat std;   ///< horizon x d_y, total predictive standard deviation
};

struct RolloutOptions {
  int rollouts_per_sample = 1;
  std::uint64_t seed = 0;
};

/// Free simulation from the last training state of every stored sample.
/// `controls_future` holds the controls of the predicted steps (horizon x d_a).
PredictiveSummary rollout_predict(const GpssmModel& model, const SampleStore& store,
                                  const Mat& controls_future, int horizon,
                                  const RolloutOptions& options = {});

/// sqrt(mean of squared entry-wise errors)
double rmse(const Mat& pred, const Mat& truth);

struct TraceSummary {
  /// First iteration whose trailing moving average exceeds the threshold.
  std::optional<long> iterations_to_threshold;
  double final_moving_average = 0.0;
};

/// Trailing moving averages of `values` over `window` entries; entry i covers
/// iterations [i+1, i+window] (1-based), so the first is at iteration `window`.
Vec moving_average(std::span<const double> values, int window);

TraceSummary trace_summary(std::span<const double> values, double threshold, int window = 1000);

}  // namespace ffvd
