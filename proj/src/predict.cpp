#include "ffvd/predict.hpp"

#include <cmath>
#include <string>

#include "ffvd/error.hpp"
#include "ffvd/fit.hpp"
#include "ffvd/parallel.hpp"

namespace ffvd {

PredictiveSummary rollout_predict(const GpssmModel& model, const SampleStore& store,
                                  const Mat& controls_future, int horizon,
                                  const RolloutOptions& options) {
  if (horizon < 1) throw UsageError("prediction horizon must be >= 1");
  if (store.draws.empty()) throw DataError("cannot predict from an empty sample store");
  if (options.rollouts_per_sample < 1) throw UsageError("need at least one rollout per sample");
  if (controls_future.rows() < horizon || controls_future.cols() != model.d_a()) {
    throw ShapeError("future controls must be at least horizon x d_a");
  }
  const auto& p = model.params();
  const int S = static_cast<int>(store.draws.size());
  const int R = options.rollouts_per_sample;
  const int n_paths = S * R, dx = model.d_x(), dy = model.d_y();
  for (const auto& draw : store.draws) {
    if (draw.trajectory.states.cols() != dx || draw.trajectory.states.rows() < 1) {
      throw ShapeError("stored trajectory does not match the model");
    }
  }

  // Per-path Gaussian moments of y at each step.
  std::vector<Mat> path_mean(n_paths, Mat(horizon, dy)), path_var(n_paths, Mat(horizon, dy));
  const Mat C2 = p.C.cwiseAbs2();

#pragma omp parallel for schedule(static) num_threads(kernels::max_threads()) if (n_paths >= 8)
  for (int k = 0; k < n_paths; ++k) {
    const int s = k / R, r = k % R;
    const auto& draw = store.draws[s];
    const TransitionEvaluator transition(model, draw.v);
    StreamRng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(s),
                                             static_cast<std::uint64_t>(r)}));
    Vec x = draw.trajectory.states.row(draw.trajectory.states.rows() - 1).transpose();
    for (int h = 0; h < horizon; ++h) {
      const auto step = transition(x, controls_future.row(h).transpose());
      path_mean[k].row(h) = (p.C * step.mean + p.d).transpose();
      path_var[k].row(h) = (C2 * step.var + p.R).transpose();
      x = step.mean.array() + step.var.array().sqrt() * standard_normal(rng, dx).array();
    }
  }

  PredictiveSummary out{Mat::Zero(horizon, dy), Mat::Zero(horizon, dy)};
  for (int k = 0; k < n_paths; ++k) out.mean += path_mean[k];
  out.mean /= n_paths;
  Mat var = Mat::Zero(horizon, dy);
  for (int k = 0; k < n_paths; ++k) {
    var += path_var[k] + (path_mean[k] - out.mean).cwiseAbs2();
  }
  out.std = (var / n_paths).cwiseSqrt();
  return out;
}

double rmse(const Mat& pred, const Mat& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw ShapeError("prediction is " + std::to_string(pred.rows()) + "x" +
                     std::to_string(pred.cols()) + ", truth is " + std::to_string(truth.rows()) +
                     "x" + std::to_string(truth.cols()));
  }
  if (pred.size() == 0) throw ShapeError("rmse needs at least one entry");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

Vec moving_average(std::span<const double> values, int window) {
  if (window < 1) throw UsageError("moving-average window must be >= 1");
  const auto n = static_cast<Eigen::Index>(values.size());
  if (n < window) return Vec();
  Vec out(n - window + 1);
  double sum = 0.0;
  for (int i = 0; i < window; ++i) sum += values[i];
  out[0] = sum / window;
  for (Eigen::Index i = window; i < n; ++i) {
    sum += values[i] - values[i - window];
    out[i - window + 1] = sum / window;
  }
  return out;
}

TraceSummary trace_summary(std::span<const double> values, double threshold, int window) {
  if (values.empty()) throw DataError("empty trace");
  const Vec ma = moving_average(values, window);
  TraceSummary out;
  if (ma.size() == 0) {
    double sum = 0.0;
    for (double v : values) sum += v;
    out.final_moving_average = sum / static_cast<double>(values.size());
    return out;
  }
  for (Eigen::Index i = 0; i < ma.size(); ++i) {
    if (ma[i] > threshold) {
      out.iterations_to_threshold = static_cast<long>(i) + window;
      break;
    }
  }
  out.final_moving_average = ma[ma.size() - 1];
  return out;
}

}  // namespace ffvd
