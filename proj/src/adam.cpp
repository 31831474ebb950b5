#include "ffvd/adam.hpp"

#include <cmath>

#include "ffvd/error.hpp"

namespace ffvd {
namespace {

Eigen::Index hyper_size(const GpssmModel& m) {
  const Eigen::Index dx = m.d_x(), dy = m.d_y(), D = m.input_dim(), M = m.num_inducing();
  return dx + dx * D + M * D + dy * dx + 2 * dy + dx;
}

/// Row-major copy of a matrix into `out` starting at `pos`.
void put(Vec& out, Eigen::Index& pos, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[pos++] = m(i, j);
  }
}

void put(Vec& out, Eigen::Index& pos, const Vec& v) {
  out.segment(pos, v.size()) = v;
  pos += v.size();
}

void get(const Vec& in, Eigen::Index& pos, Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = in[pos++];
  }
}

void get(const Vec& in, Eigen::Index& pos, Vec& v) {
  v = in.segment(pos, v.size());
  pos += v.size();
}

/// Empty gradient fields count as zero.
template <class T>
T or_zero(const T& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.size() == 0) return T::Zero(rows, cols);
  if (g.rows() != rows || g.cols() != cols) throw ShapeError("hyperparameter gradient");
  return g;
}

}  // namespace

double AdamConfig::learning_rate(long step) const {
  const double epoch = static_cast<double>(step / iters_per_epoch);
  return lr0 / (1.0 + decay * epoch);
}

void Adam::step(Vec& params, const Vec& gradient, double lr) {
  if (gradient.size() != params.size()) throw ShapeError("Adam gradient size");
  if (m_.size() != params.size()) {
    m_ = Vec::Zero(params.size());
    v_ = Vec::Zero(params.size());
  }
  ++t_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * gradient;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  params.array() += lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
}

Vec pack_hypers(const GpssmModel& model) {
  const auto& p = model.params();
  Vec out(hyper_size(model));
  Eigen::Index pos = 0;
  for (int d = 0; d < model.d_x(); ++d) out[pos++] = std::log(p.kernels[d].signal_variance);
  for (int d = 0; d < model.d_x(); ++d) put(out, pos, Vec(p.kernels[d].lengthscales.array().log()));
  put(out, pos, p.Z);
  put(out, pos, p.C);
  put(out, pos, p.d);
  put(out, pos, Vec(p.R.array().log()));
  put(out, pos, Vec(p.Q.array().log()));
  return out;
}

GpssmModel unpack_hypers(const GpssmModel& model, const Vec& packed) {
  if (packed.size() != hyper_size(model)) throw ShapeError("packed hyperparameter length");
  if (!packed.allFinite()) throw NumericalError("non-finite hyperparameters");
  ModelParams p = model.params();
  Eigen::Index pos = 0;
  for (int d = 0; d < model.d_x(); ++d) p.kernels[d].signal_variance = std::exp(packed[pos++]);
  for (int d = 0; d < model.d_x(); ++d) {
    Vec log_l(model.input_dim());
    get(packed, pos, log_l);
    p.kernels[d].lengthscales = log_l.array().exp();
  }
  get(packed, pos, p.Z);
  get(packed, pos, p.C);
  get(packed, pos, p.d);
  Vec log_R(model.d_y()), log_Q(model.d_x());
  get(packed, pos, log_R);
  get(packed, pos, log_Q);
  p.R = log_R.array().exp();
  p.Q = log_Q.array().exp();
  return GpssmModel(std::move(p));
}

Vec pack_hyper_gradient(const GpssmModel& model, const GradientBundle& grad) {
  const Eigen::Index dx = model.d_x(), dy = model.d_y(), D = model.input_dim(),
                     M = model.num_inducing();
  Vec out(hyper_size(model));
  Eigen::Index pos = 0;
  put(out, pos, or_zero<Vec>(grad.log_signal_variance, dx, 1));
  put(out, pos, or_zero<Mat>(grad.log_lengthscales, dx, D));
  put(out, pos, or_zero<Mat>(grad.Z, M, D));
  put(out, pos, or_zero<Mat>(grad.C, dy, dx));
  put(out, pos, or_zero<Vec>(grad.d, dy, 1));
  put(out, pos, or_zero<Vec>(grad.log_R, dy, 1));
  put(out, pos, or_zero<Vec>(grad.log_Q, dx, 1));
  return out;
}

GpssmModel adam_hyper_step(const GpssmModel& model, const GradientBundle& grad, Adam& optimizer) {
  Vec theta = pack_hypers(model);
  const Vec g = pack_hyper_gradient(model, grad);
  if (!g.allFinite()) throw NumericalError("non-finite hyperparameter gradient");
  optimizer.step(theta, g);
  return unpack_hypers(model, theta);
}

}  // namespace ffvd
