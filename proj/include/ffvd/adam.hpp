#pragma once

#include "ffvd/model.hpp"
#include "ffvd/objective.hpp"

namespace ffvd {

struct AdamConfig {
  double lr0 = 0.01;
  double decay = 0.05;
  int iters_per_epoch = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// lr0 / (1 + decay * epoch), epoch = step / iters_per_epoch
  double learning_rate(long step) const;
};

/// Adam on a flat parameter vector, ascending the objective.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// In-place ascent step with the given gradient and learning rate.
  void step(Vec& params, const Vec& gradient, double lr);
  /// Step using the decayed learning rate for the current step count.
  void step(Vec& params, const Vec& gradient) { step(params, gradient, config_.learning_rate(t_)); }

  long steps() const { return t_; }
  const Vec& first_moment() const { return m_; }
  const Vec& second_moment() const { return v_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  Vec m_, v_;
  long t_ = 0;
};

/// Flat layout of the optimized hyperparameters:
/// [log sigma^2 (d_x) | log l (d_x * D, row-major) | Z (M * D, row-major) |
///  C (d_y * d_x, row-major) | d (d_y) | log R (d_y) | log Q (d_x)]
Vec pack_hypers(const GpssmModel& model);
GpssmModel unpack_hypers(const GpssmModel& model, const Vec& packed);
Vec pack_hyper_gradient(const GpssmModel& model, const GradientBundle& grad);

/// One Adam ascent step on the hyperparameters. `grad` should already contain
/// the hyper-prior contribution.
GpssmModel adam_hyper_step(const GpssmModel& model, const GradientBundle& grad, Adam& optimizer);

}  // namespace ffvd
