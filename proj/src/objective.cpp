#include "ffvd/objective.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ffvd/error.hpp"
#include "ffvd/parallel.hpp"

namespace ffvd {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void check_inputs(const GpssmModel& model, const Trajectory& traj, const Mat& y) {
  traj.validate(model.d_x(), model.d_a());
  if (y.rows() != traj.T() || y.cols() != model.d_y()) {
    throw ShapeError("observations must be T x d_y (T = " + std::to_string(traj.T()) + ")");
  }
}

void check_inducing(const GpssmModel& model, const WhitenedInducing* v) {
  if (v == nullptr) throw UsageError("the joint objective needs inducing values");
  if (v->v.rows() != model.d_x() || v->v.cols() != model.num_inducing()) {
    throw ShapeError("whitened inducing values must be d_x x M");
  }
}

/// Quantities of one latent dimension that depend on the states but not on v.
struct DimForward {
  Mat Kxz;             ///< T x M
  Mat A;               ///< M x T, column t is L_Z^{-1} k(Z, input_t)
  Vec B;               ///< clamped conditional variances
  Vec active;          ///< 1 where B was not clamped
  Vec r;               ///< x_t[d] - x_{t-1}[d]
};

DimForward forward_dim(const GpssmModel& model, const Mat& inputs, const Mat& states, int d) {
  const auto& kp = model.kernel(d);
  const int T = static_cast<int>(inputs.rows());
  DimForward f;
  kernels::cross_gram(kp, inputs, model.Z(), f.Kxz);
  f.A = model.cache(d).L_Z.triangularView<Eigen::Lower>().solve(f.Kxz.transpose());
  f.B.resize(T);
  f.active.resize(T);
  for (int t = 0; t < T; ++t) {
    const double b = kp.signal_variance - f.A.col(t).squaredNorm();
    f.B[t] = clamp_conditional_variance(b, kp.signal_variance);
    f.active[t] = b >= 0.0 ? 1.0 : 0.0;
  }
  f.r = states.col(d).tail(T) - states.col(d).head(T);
  return f;
}

struct DimCollapsed {
  Vec g;
  Mat H;
  Vec x_tilde;
  Mat L_P;
  double log_det_H = 0.0;
};

DimCollapsed collapse_dim(const DimForward& f, double Q) {
  const auto M = f.A.rows();
  Mat P = Mat::Identity(M, M);
  P.selfadjointView<Eigen::Lower>().rankUpdate(f.A, 1.0 / Q);
  P.triangularView<Eigen::StrictlyUpper>() = P.transpose();
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success) throw NumericalError("collapsed precision is not positive definite");
  DimCollapsed c;
  c.L_P = llt.matrixL();
  c.x_tilde = f.A * f.r / Q;
  c.g = llt.solve(c.x_tilde);
  c.H = llt.solve(Mat::Identity(M, M));
  c.log_det_H = -2.0 * c.L_P.diagonal().array().log().sum();
  return c;
}

/// Index of the first non-finite entry, or -1.
long first_nonfinite(const Vec& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) return static_cast<long>(i);
  }
  return -1;
}

/// Throws NumericalError naming the time step t (1-based) of the first
/// non-finite term; entry i of `per_step` belongs to t = i + 1.
void check_terms(const Vec& per_step, const char* what) {
  if (const long i = first_nonfinite(per_step); i >= 0) {
    throw NumericalError(std::string("non-finite ") + what + " term at time step", i + 1);
  }
}

/// Throws NumericalError with the flattened coordinate index (fields in
/// declaration order) of the first non-finite partial derivative.
void check_gradient(const GradientBundle& g) {
  long offset = 0;
  const auto scan = [&](const auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (!std::isfinite(m.data()[i])) throw NumericalError("non-finite gradient", offset + i);
    }
    offset += static_cast<long>(m.size());
  };
  scan(g.states);
  scan(g.v);
  scan(g.log_signal_variance);
  scan(g.log_lengthscales);
  scan(g.Z);
  scan(g.C);
  scan(g.d);
  scan(g.log_R);
  scan(g.log_Q);
  scan(g.x0_mean);
}

/// Per-dimension terms shared by both objectives:
/// sum_t [-0.5 log(2 pi Q) - B_t / (2 Q)].
double variance_terms(const DimForward& f, double Q) {
  const double T = static_cast<double>(f.B.size());
  return -0.5 * T * (kLog2Pi + std::log(Q)) - f.B.sum() / (2.0 * Q);
}

void allocate(GradientBundle& g, const GpssmModel& model, int T, unsigned groups, bool with_v) {
  const int dx = model.d_x(), dy = model.d_y(), D = model.input_dim(), M = model.num_inducing();
  if (groups & kStates) g.states = Mat::Zero(T + 1, dx);
  if ((groups & kInducing) && with_v) g.v = Mat::Zero(dx, M);
  if (groups & kKernel) {
    g.log_signal_variance = Vec::Zero(dx);
    g.log_lengthscales = Mat::Zero(dx, D);
  }
  if (groups & kInducingInputs) g.Z = Mat::Zero(M, D);
  if (groups & kLikelihood) {
    g.C = Mat::Zero(dy, dx);
    g.d = Vec::Zero(dy);
    g.log_R = Vec::Zero(dy);
  }
  if (groups & kProcessNoise) g.log_Q = Vec::Zero(dx);
  if (groups & kInitialMean) g.x0_mean = Vec::Zero(dx);
}

/// Pushes dF/dA (Gamma, M x T), dF/dr (rho) and the summed dF/dB over
/// unclamped steps back to the states, kernel hyperparameters and Z.
void backward_dim(const GpssmModel& model, const Mat& inputs, const DimForward& f, int d,
                  const Mat& Gamma, const Vec& rho, double dB_sum, unsigned groups,
                  GradientBundle& out) {
  const int T = static_cast<int>(inputs.rows());
  const int dx = model.d_x();
  const auto& kp = model.kernel(d);
  const auto& cache = model.cache(d);

  if (groups & kStates) {
    out.states.col(d).tail(T) += rho;
    out.states.col(d).head(T) -= rho;
  }
  const bool need_kernel = groups & kKernel;
  const bool need_Z = groups & kInducingInputs;
  if (!(groups & kStates) && !need_kernel && !need_Z) return;

  const auto L = cache.L_Z.triangularView<Eigen::Lower>();
  const Mat beta = L.transpose().solve(Gamma);  // dF/dK(Z, X), M x T
  const Mat adjoint = beta.transpose();
  const auto gk = kernels::cross_gram_backward(kp, inputs, model.Z(), f.Kxz, adjoint);
  if (groups & kStates) out.states.topRows(T) += gk.X.leftCols(dx);
  if (need_Z) out.Z += gk.Z;
  if (need_kernel) {
    out.log_lengthscales.row(d) += gk.log_lengthscales.transpose();
    out.log_signal_variance[d] += gk.log_signal_variance + kp.signal_variance * dB_sum;
  }
  if (!need_kernel && !need_Z) return;

  // Through L_Z = chol(K_Z + jitter I).
  const Mat L_bar = (-beta * f.A.transpose()).triangularView<Eigen::Lower>();
  Mat phi = (cache.L_Z.transpose() * L_bar).triangularView<Eigen::Lower>();
  phi.diagonal() *= 0.5;
  const Mat sym = 0.5 * (phi + phi.transpose());
  const Mat left = L.transpose().solve(sym);                          // L^{-T} S
  const Mat K_bar = L.transpose().solve(left.transpose()).transpose();  // L^{-T} S L^{-1}
  const auto gz = kernels::cross_gram_backward(kp, model.Z(), model.Z(), cache.K_Z, K_bar);
  if (need_Z) out.Z += gz.X + gz.Z;
  if (need_kernel) {
    out.log_lengthscales.row(d) += gz.log_lengthscales.transpose();
    out.log_signal_variance[d] += gz.log_signal_variance + cache.jitter * K_bar.trace();
  }
}

/// log p(x_0) + sum_t log N(y_t; C x_t + d, R), with gradients.
double observation_terms(const GpssmModel& model, const Trajectory& traj, const Mat& y,
                         unsigned groups, GradientBundle& out) {
  const auto& p = model.params();
  const int T = traj.T();
  double value = 0.0;

  const Vec x0 = traj.states.row(0).transpose();
  const Vec diff0 = x0 - p.x0_mean;
  value += -0.5 * ((kLog2Pi + p.x0_var.array().log()).sum() +
                   (diff0.array().square() / p.x0_var.array()).sum());
  const Vec score0 = (diff0.array() / p.x0_var.array()).matrix();
  if (groups & kStates) out.states.row(0) -= score0.transpose();
  if (groups & kInitialMean) out.x0_mean += score0;

  const Mat X = traj.states.bottomRows(T);
  const Mat E = y - X * p.C.transpose() - Vec::Ones(T) * p.d.transpose();  // T x d_y
  check_terms(E.rowwise().squaredNorm(), "observation");
  const RowVec inv_R = p.R.cwiseInverse().transpose();
  value += -0.5 * static_cast<double>(T) *
               (static_cast<double>(model.d_y()) * kLog2Pi + p.R.array().log().sum()) -
           0.5 * (E.array().square().rowwise() * inv_R.array()).sum();
  if (groups & (kStates | kLikelihood)) {
    const Mat W = E.array().rowwise() * inv_R.array();  // R^{-1} e_t per row
    if (groups & kStates) out.states.bottomRows(T) += W * p.C;
    if (groups & kLikelihood) {
      out.C += W.transpose() * X;
      out.d += W.colwise().sum().transpose();
      out.log_R += (-0.5 * static_cast<double>(T) +
                    0.5 * (E.array().square().rowwise() * inv_R.array()).colwise().sum())
                       .transpose()
                       .matrix();
    }
  }
  return value;
}

/// sum_t log N(y_t; C mu_t + d, C diag(var_t) C^T + R).
double predictive_loglik(const GpssmModel& model, const Mat& mu, const Mat& var, const Mat& y) {
  const auto& p = model.params();
  double total = 0.0;
  for (Eigen::Index t = 0; t < y.rows(); ++t) {
    Mat S = p.C * var.row(t).asDiagonal() * p.C.transpose();
    S.diagonal() += p.R;
    total += log_mvn_density(y.row(t).transpose(), p.C * mu.row(t).transpose() + p.d, S);
  }
  return total;
}

Evaluation evaluate_impl(Objective objective, const GpssmModel& model, const Trajectory& traj,
                         const WhitenedInducing* v, const Mat& y, unsigned groups,
                         bool want_loglik) {
  check_inputs(model, traj, y);
  const bool joint = objective == Objective::joint;
  if (joint) check_inducing(model, v);
  const int T = traj.T(), M = model.num_inducing();
  const Mat inputs = traj.transition_inputs();
  const auto& p = model.params();

  Evaluation ev;
  allocate(ev.grad, model, T, groups, joint);
  Mat mu(T, model.d_x()), var(T, model.d_x());

  for (int d = 0; d < model.d_x(); ++d) {
    const double Q = p.Q[d];
    const DimForward f = forward_dim(model, inputs, traj.states, d);
    const double n_active = f.active.sum();
    Mat Gamma;
    Vec rho;
    double dlogQ = 0.0;

    if (joint) {
      const Vec vd = v->v.row(d).transpose();
      const Vec e = f.r - f.A.transpose() * vd;
      check_terms(e.array().square() + f.B.array(), "transition");
      ev.value += -0.5 * vd.squaredNorm() - 0.5 * M * kLog2Pi + variance_terms(f, Q) -
                  e.squaredNorm() / (2.0 * Q);
      Gamma = (vd * e.transpose() + f.A * f.active.asDiagonal()) / Q;
      rho = -e / Q;
      if (ev.grad.v.size() != 0) ev.grad.v.row(d) = (f.A * e / Q - vd).transpose();
      dlogQ = -0.5 * T + (e.squaredNorm() + f.B.sum()) / (2.0 * Q);
      mu.col(d) = traj.states.col(d).head(T) + f.A.transpose() * vd;
    } else {
      check_terms(f.r.array().square() + f.B.array(), "transition");
      const DimCollapsed c = collapse_dim(f, Q);
      ev.value += variance_terms(f, Q) - f.r.squaredNorm() / (2.0 * Q) + 0.5 * c.log_det_H +
                  0.5 * c.x_tilde.dot(c.g);
      Gamma = (-(c.H * f.A) - c.g * (c.g.transpose() * f.A) + c.g * f.r.transpose() +
               f.A * f.active.asDiagonal()) /
              Q;
      rho = (-f.r + f.A.transpose() * c.g) / Q;
      dlogQ = -0.5 * T + (f.r.squaredNorm() + f.B.sum()) / (2.0 * Q) +
              0.5 * (M - c.H.trace()) - 0.5 * c.g.dot(c.x_tilde) - 0.5 * c.g.squaredNorm();
      mu.col(d) = traj.states.col(d).head(T) + f.A.transpose() * c.g;
    }
    var.col(d) = f.B.array() + Q;
    if (groups & kProcessNoise) ev.grad.log_Q[d] += dlogQ;
    backward_dim(model, inputs, f, d, Gamma, rho, -n_active / (2.0 * Q), groups, ev.grad);
  }

  ev.value += observation_terms(model, traj, y, groups, ev.grad);
  if (!std::isfinite(ev.value)) throw NumericalError("non-finite objective value");
  check_gradient(ev.grad);
  if (want_loglik) ev.train_loglik = predictive_loglik(model, mu, var, y);
  return ev;
}

}  // namespace

double log_q_joint(const GpssmModel& model, const Trajectory& traj, const WhitenedInducing& v,
                   const Mat& y) {
  return evaluate_impl(Objective::joint, model, traj, &v, y, 0u, false).value;
}

double log_q_collapsed(const GpssmModel& model, const Trajectory& traj, const Mat& y) {
  return evaluate_impl(Objective::collapsed, model, traj, nullptr, y, 0u, false).value;
}

CollapsedStats collapsed_stats(const GpssmModel& model, const Trajectory& traj) {
  traj.validate(model.d_x(), model.d_a());
  const Mat inputs = traj.transition_inputs();
  CollapsedStats s;
  for (int d = 0; d < model.d_x(); ++d) {
    auto c = collapse_dim(forward_dim(model, inputs, traj.states, d), model.params().Q[d]);
    s.g.push_back(std::move(c.g));
    s.H.push_back(std::move(c.H));
    s.x_tilde.push_back(std::move(c.x_tilde));
    s.L_P.push_back(std::move(c.L_P));
    s.log_det_H.push_back(c.log_det_H);
  }
  return s;
}

WhitenedInducing sample_conditional_inducing(const CollapsedStats& stats, Rng& rng) {
  const auto dx = static_cast<Eigen::Index>(stats.g.size());
  if (dx == 0) throw ShapeError("empty collapsed statistics");
  WhitenedInducing out{Mat(dx, stats.g[0].size())};
  for (Eigen::Index d = 0; d < dx; ++d) {
    const Vec eps = standard_normal(rng, stats.g[d].size());
    out.v.row(d) =
        (stats.g[d] + stats.L_P[d].transpose().triangularView<Eigen::Upper>().solve(eps))
            .transpose();
  }
  return out;
}

WhitenedInducing sample_conditional_inducing(const GpssmModel& model, const Trajectory& traj,
                                             Rng& rng) {
  return sample_conditional_inducing(collapsed_stats(model, traj), rng);
}

double log_conditional_inducing(const CollapsedStats& stats, const WhitenedInducing& v) {
  const auto dx = static_cast<Eigen::Index>(stats.g.size());
  if (v.v.rows() != dx || (dx > 0 && v.v.cols() != stats.g[0].size())) {
    throw ShapeError("inducing values do not match collapsed statistics");
  }
  double total = 0.0;
  for (Eigen::Index d = 0; d < dx; ++d) {
    const Vec diff = v.v.row(d).transpose() - stats.g[d];
    const Vec z = stats.L_P[d].transpose() * diff;
    total += -0.5 * static_cast<double>(diff.size()) * kLog2Pi - 0.5 * stats.log_det_H[d] -
             0.5 * z.squaredNorm();
  }
  return total;
}

Evaluation evaluate(Objective objective, const GpssmModel& model, const Trajectory& traj,
                    const WhitenedInducing* v, const Mat& y, unsigned groups) {
  return evaluate_impl(objective, model, traj, v, y, groups, true);
}

GradientBundle grad(Objective objective, const GpssmModel& model, const Trajectory& traj,
                    const WhitenedInducing* v, const Mat& y, unsigned groups) {
  return evaluate_impl(objective, model, traj, v, y, groups, false).grad;
}

double log_hyper_prior(const GpssmModel& model) {
  const auto& p = model.params();
  const auto std_normal = [](double z) { return -0.5 * (kLog2Pi + z * z); };
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.C.size(); ++i) total += std_normal(p.C.data()[i]);
  for (Eigen::Index i = 0; i < p.d.size(); ++i) total += std_normal(p.d[i]);
  for (Eigen::Index i = 0; i < p.R.size(); ++i) total += std_normal(0.5 * std::log(p.R[i]));
  for (Eigen::Index i = 0; i < p.Q.size(); ++i) total += std_normal(std::log(p.Q[i]));
  return total;
}

void add_log_hyper_prior_grad(const GpssmModel& model, GradientBundle& out) {
  const auto& p = model.params();
  if (out.C.size() == 0) out.C = Mat::Zero(p.C.rows(), p.C.cols());
  if (out.d.size() == 0) out.d = Vec::Zero(p.d.size());
  if (out.log_R.size() == 0) out.log_R = Vec::Zero(p.R.size());
  if (out.log_Q.size() == 0) out.log_Q = Vec::Zero(p.Q.size());
  out.C -= p.C;
  out.d -= p.d;
  out.log_R.array() -= 0.25 * p.R.array().log();
  out.log_Q.array() -= p.Q.array().log();
}

double train_loglik(const GpssmModel& model, const Trajectory& traj, const WhitenedInducing& v,
                    const Mat& y) {
  check_inputs(model, traj, y);
  check_inducing(model, &v);
  const int T = traj.T();
  const Mat inputs = traj.transition_inputs();
  Mat mu(T, model.d_x()), var(T, model.d_x());
  for (int d = 0; d < model.d_x(); ++d) {
    const DimForward f = forward_dim(model, inputs, traj.states, d);
    mu.col(d) = traj.states.col(d).head(T) + f.A.transpose() * v.v.row(d).transpose();
    var.col(d) = f.B.array() + model.params().Q[d];
  }
  return predictive_loglik(model, mu, var, y);
}

}  // namespace ffvd
