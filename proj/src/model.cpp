#include "ffvd/model.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <numbers>
#include <numeric>
#include <string>

#include "ffvd/data.hpp"
#include "ffvd/error.hpp"

namespace ffvd {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DataError("invalid model: " + what);
}

bool positive_finite(const Vec& x) {
  return x.allFinite() && (x.array() > 0.0).all();
}

Vec column_variance(const Mat& X) {
  const RowVec mean = X.colwise().mean();
  return ((X.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(X.rows()))
      .transpose();
}

}  // namespace

GpssmModel::GpssmModel(ModelParams params) : params_(std::move(params)) {
  auto& p = params_;
  require(p.d_x >= 1 && p.d_a >= 0 && p.d_y >= 1, "dimensions");
  const int D = p.d_x + p.d_a;
  require(static_cast<int>(p.kernels.size()) == p.d_x, "need one kernel per latent dimension");
  for (const auto& k : p.kernels) {
    require(k.input_dim() == D, "kernel lengthscales must have d_x + d_a entries");
    k.validate();
  }
  require(p.Z.rows() >= 1 && p.Z.cols() == D && p.Z.allFinite(), "Z must be M x (d_x + d_a)");
  require(p.Q.size() == p.d_x && positive_finite(p.Q), "Q must be d_x positive variances");
  require(p.C.rows() == p.d_y && p.C.cols() == p.d_x && p.C.allFinite(), "C must be d_y x d_x");
  require(p.d.size() == p.d_y && p.d.allFinite(), "d must have d_y entries");
  require(p.R.size() == p.d_y && positive_finite(p.R), "R must be d_y positive variances");
  require(p.x0_mean.size() == p.d_x && p.x0_mean.allFinite(), "x0 mean must have d_x entries");
  require(p.x0_var.size() == p.d_x && positive_finite(p.x0_var), "x0 variance must be positive");
  caches_.reserve(p.d_x);
  for (int d = 0; d < p.d_x; ++d) caches_.push_back(GramCache::build(p.kernels[d], p.Z, p.Z.col(d)));
}

Mat Trajectory::transition_inputs() const {
  const int n = T();
  const auto d_x = states.cols(), d_a = controls.cols();
  Mat X(n, d_x + d_a);
  X.leftCols(d_x) = states.topRows(n);
  if (d_a > 0) X.rightCols(d_a) = controls;
  return X;
}

void Trajectory::validate(int d_x, int d_a) const {
  if (states.rows() < 2) throw ShapeError("trajectory needs T >= 1");
  if (states.cols() != d_x) throw ShapeError("trajectory state dimension");
  if (controls.rows() != T() || controls.cols() != d_a) {
    throw ShapeError("controls must be T x d_a");
  }
  if (!states.allFinite() || !controls.allFinite()) {
    throw NumericalError("trajectory has non-finite entries");
  }
}

WhitenedInducing whiten(const GpssmModel& model, const Mat& u) {
  if (u.rows() != model.d_x() || u.cols() != model.num_inducing()) {
    throw ShapeError("inducing values must be d_x x M");
  }
  WhitenedInducing out{Mat(u.rows(), u.cols())};
  for (int d = 0; d < model.d_x(); ++d) {
    const auto& c = model.cache(d);
    out.v.row(d) =
        c.L_Z.triangularView<Eigen::Lower>().solve(u.row(d).transpose() - c.m_Z).transpose();
  }
  return out;
}

Mat unwhiten(const GpssmModel& model, const WhitenedInducing& v) {
  if (v.v.rows() != model.d_x() || v.v.cols() != model.num_inducing()) {
    throw ShapeError("whitened inducing values must be d_x x M");
  }
  Mat u(v.v.rows(), v.v.cols());
  for (int d = 0; d < model.d_x(); ++d) {
    const auto& c = model.cache(d);
    u.row(d) = (c.m_Z + c.L_Z.triangularView<Eigen::Lower>() * v.v.row(d).transpose()).transpose();
  }
  return u;
}

TransitionEvaluator::TransitionEvaluator(const GpssmModel& model, const WhitenedInducing& v)
    : model_(&model), alpha_(model.num_inducing(), model.d_x()) {
  if (v.v.rows() != model.d_x() || v.v.cols() != model.num_inducing()) {
    throw ShapeError("whitened inducing values must be d_x x M");
  }
  for (int d = 0; d < model.d_x(); ++d) {
    alpha_.col(d) =
        model.cache(d).L_Z.transpose().triangularView<Eigen::Upper>().solve(v.v.row(d).transpose());
  }
}

DiagonalGaussian TransitionEvaluator::operator()(const Eigen::Ref<const Vec>& x_prev,
                                                 const Eigen::Ref<const Vec>& control) const {
  const auto& m = *model_;
  if (x_prev.size() != m.d_x() || control.size() != m.d_a()) {
    throw ShapeError("transition input dimension");
  }
  Vec input(m.input_dim());
  input.head(m.d_x()) = x_prev;
  if (m.d_a() > 0) input.tail(m.d_a()) = control;
  const Mat& Z = m.Z();
  DiagonalGaussian out{Vec(m.d_x()), Vec(m.d_x())};
  Vec k(Z.rows());
  for (int d = 0; d < m.d_x(); ++d) {
    const auto& kp = m.kernel(d);
    for (Eigen::Index j = 0; j < Z.rows(); ++j) k[j] = kernel_eval(kp, input, Z.row(j).transpose());
    const double explained = m.cache(d).L_Z.triangularView<Eigen::Lower>().solve(k).squaredNorm();
    out.mean[d] = x_prev[d] + k.dot(alpha_.col(d));
    out.var[d] = clamp_conditional_variance(kp.signal_variance - explained, kp.signal_variance) +
                 m.params().Q[d];
  }
  return out;
}

DiagonalGaussian transition_predictive(const GpssmModel& model, const Eigen::Ref<const Vec>& x_prev,
                                       const Eigen::Ref<const Vec>& control,
                                       const WhitenedInducing& v) {
  return TransitionEvaluator(model, v)(x_prev, control);
}

GenerativeDraw sample_generative(const GpssmModel& model, const WhitenedInducing& v,
                                 const Mat& controls, int T, Rng& rng) {
  if (T < 1) throw ShapeError("sample_generative needs T >= 1");
  if (controls.rows() != T || controls.cols() != model.d_a()) {
    throw ShapeError("controls must be T x d_a");
  }
  const auto& p = model.params();
  const TransitionEvaluator transition(model, v);
  GenerativeDraw out;
  out.trajectory.states.resize(T + 1, model.d_x());
  out.trajectory.controls = controls;
  out.observations.resize(T, model.d_y());

  out.trajectory.states.row(0) =
      (p.x0_mean.array() + p.x0_var.array().sqrt() * standard_normal(rng, model.d_x()).array())
          .transpose();
  for (int t = 1; t <= T; ++t) {
    const Vec prev = out.trajectory.states.row(t - 1).transpose();
    const auto step = transition(prev, controls.row(t - 1).transpose());
    const Vec x = step.mean.array() + step.var.array().sqrt() * standard_normal(rng, model.d_x()).array();
    out.trajectory.states.row(t) = x.transpose();
    const Vec y = (p.C * x + p.d).array() + p.R.array().sqrt() * standard_normal(rng, model.d_y()).array();
    out.observations.row(t - 1) = y.transpose();
  }
  return out;
}

double log_likelihood_obs(const GpssmModel& model, const Eigen::Ref<const Vec>& x,
                          const Eigen::Ref<const Vec>& y) {
  const auto& p = model.params();
  if (x.size() != model.d_x() || y.size() != model.d_y()) {
    throw ShapeError("observation likelihood dimension");
  }
  const Vec e = y - p.C * x - p.d;
  return -0.5 * (static_cast<double>(model.d_y()) * std::log(2.0 * std::numbers::pi) +
                 p.R.array().log().sum() + (e.array().square() / p.R.array()).sum());
}

Mat kmeans(const Mat& points, int k, int iters, std::uint64_t seed) {
  const auto n = points.rows();
  if (k < 1 || k > n) {
    throw DataError("k-means needs 1 <= k <= number of points (k = " + std::to_string(k) +
                    ", points = " + std::to_string(n) + ")");
  }
  Rng rng(seed);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  Mat centers(k, points.cols());
  for (int c = 0; c < k; ++c) centers.row(c) = points.row(order[c]);

  std::vector<int> assign(n, 0);
  for (int it = 0; it < iters; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double dist = (points.row(i) - centers.row(c)).squaredNorm();
        if (dist < best) {
          best = dist;
          assign[i] = c;
        }
      }
    }
    Mat sums = Mat::Zero(k, points.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += points.row(i);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
    }
  }
  return centers;
}

Initialization init_from_data(const Dataset& data, const InitConfig& config) {
  const int T = data.train_len;
  if (T < 2) throw DataError("initialization needs at least 2 training observations");
  if (config.d_x < 1) throw UsageError("d_x must be >= 1");
  const int d_x = config.d_x, d_y = data.d_y(), d_a = data.d_a();
  const Mat y = data.y_train();
  const Mat a = data.a_train();

  const Vec y_var = column_variance(y);
  for (int i = 0; i < d_y; ++i) {
    if (!(y_var[i] > 0.0)) {
      throw DataError("initialization: observation column " + std::to_string(i) +
                      " has zero variance");
    }
  }

  Mat C = Mat::Zero(d_y, d_x);
  const int n_obs = std::min(d_x, d_y);
  for (int i = 0; i < n_obs; ++i) C(i, i) = 1.0;
  const Vec d = Vec::Zero(d_y);
  const Mat C_pinv = Eigen::CompleteOrthogonalDecomposition<Mat>(C).pseudoInverse();

  Mat states(T + 1, d_x);
  for (int t = 1; t <= T; ++t) states.row(t) = (C_pinv * (y.row(t - 1).transpose() - d)).transpose();
  // Latent dimensions outside the row space of C carry delayed copies of the
  // observed coordinates.
  for (int j = n_obs; j < d_x; ++j) {
    const int src = j % n_obs, lag = j / n_obs;
    for (int t = 1; t <= T; ++t) states(t, j) = states(std::max(t - lag, 1), src);
  }
  states.row(0) = states.row(1);

  Trajectory traj{states, a};
  const Mat inputs = traj.transition_inputs();
  const Vec input_var = column_variance(inputs);
  const Vec next_var = column_variance(states.bottomRows(T));

  ModelParams p;
  p.d_x = d_x;
  p.d_a = d_a;
  p.d_y = d_y;
  p.Z = kmeans(inputs, config.num_inducing, config.kmeans_iters, config.seed);
  Vec lengthscales(d_x + d_a);
  for (int j = 0; j < d_x + d_a; ++j) {
    if (input_var[j] > 0.0) {
      lengthscales[j] = std::sqrt(input_var[j]);
    } else if (j >= d_x) {
      lengthscales[j] = 1.0;  // constant control column
    } else {
      throw DataError("initialization: latent dimension " + std::to_string(j) +
                      " has zero variance");
    }
  }
  p.kernels.reserve(d_x);
  for (int k = 0; k < d_x; ++k) {
    if (!(next_var[k] > 0.0)) {
      throw DataError("initialization: latent dimension " + std::to_string(k) +
                      " has zero variance");
    }
    p.kernels.push_back({next_var[k], lengthscales});
  }
  p.Q = 0.1 * next_var;
  p.C = C;
  p.d = d;
  p.R = 0.1 * y_var;
  p.x0_mean = Vec::Zero(d_x);
  p.x0_var = Vec::Ones(d_x);

  GpssmModel model(std::move(p));
  WhitenedInducing v{Mat::Zero(d_x, model.num_inducing())};
  return {std::move(model), std::move(traj), std::move(v)};
}

}  // namespace ffvd
