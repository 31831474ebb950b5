#pragma once

#include <vector>

#include "ffvd/model.hpp"

namespace ffvd {

/// Sufficient statistics of q(v | x_{0:T}) for each latent dimension:
///   P = I + sum_t a_t a_t^T / Q_d,   H = P^{-1},
///   xt = sum_t a_t (x_t[d] - x_{t-1}[d]) / Q_d,   g = H xt,
/// where a_t = L_Z^{-1} k(Z, [x_{t-1}; a_t]).
struct CollapsedStats {
  std::vector<Vec> g;
  std::vector<Mat> H;
  std::vector<Vec> x_tilde;
  std::vector<Mat> L_P;  ///< Cholesky factor of P (so H = L_P^{-T} L_P^{-1})
  std::vector<double> log_det_H;
};

enum class Objective { joint, collapsed };

/// Parameter groups selectable for differentiation.
enum ParamGroup : unsigned {
  kStates = 1u << 0,
  kInducing = 1u << 1,
  kKernel = 1u << 2,          ///< log signal variance and log lengthscales
  kInducingInputs = 1u << 3,  ///< Z
  kLikelihood = 1u << 4,      ///< C, d, log R
  kProcessNoise = 1u << 5,    ///< log Q
  kInitialMean = 1u << 6,     ///< mean of p(x_0)
  kHypers = kKernel | kInducingInputs | kLikelihood | kProcessNoise,
  kAll = 0x7fu,
};

/// Partial derivatives of a log density. Groups that were not requested are
/// left empty (size zero).
struct GradientBundle {
  Mat states;                ///< (T+1) x d_x
  Mat v;                     ///< d_x x M
  Vec log_signal_variance;   ///< d_x
  Mat log_lengthscales;      ///< d_x x (d_x + d_a)
  Mat Z;                     ///< M x (d_x + d_a)
  Mat C;                     ///< d_y x d_x
  Vec d;                     ///< d_y
  Vec log_R;                 ///< d_y
  Vec log_Q;                 ///< d_x
  Vec x0_mean;               ///< d_x
};

/// Whitened joint target log q~(v, x_{0:T}), up to the global normalizer.
double log_q_joint(const GpssmModel& model, const Trajectory& traj, const WhitenedInducing& v,
                   const Mat& y);

CollapsedStats collapsed_stats(const GpssmModel& model, const Trajectory& traj);

/// Collapsed target log q*(x_{0:T}) = log of the integral of q~(v, x) over v.
double log_q_collapsed(const GpssmModel& model, const Trajectory& traj, const Mat& y);

/// Draw v ~ prod_d N(g_d, H_d).
WhitenedInducing sample_conditional_inducing(const GpssmModel& model, const Trajectory& traj,
                                             Rng& rng);
WhitenedInducing sample_conditional_inducing(const CollapsedStats& stats, Rng& rng);

/// log prod_d N(v_d; g_d, H_d)
double log_conditional_inducing(const CollapsedStats& stats, const WhitenedInducing& v);

struct Evaluation {
  double value = 0.0;
  GradientBundle grad;
  /// One-step-ahead predictive log-likelihood of the observations, using the
  /// supplied v for the joint objective and v = g for the collapsed one.
  double train_loglik = 0.0;
};

/// Value and analytic gradient of the selected objective. `v` is required for
/// the joint objective and ignored for the collapsed one.
Evaluation evaluate(Objective objective, const GpssmModel& model, const Trajectory& traj,
                    const WhitenedInducing* v, const Mat& y, unsigned groups);

/// Gradient only; see evaluate().
GradientBundle grad(Objective objective, const GpssmModel& model, const Trajectory& traj,
                    const WhitenedInducing* v, const Mat& y, unsigned groups);

/// Standard-normal priors on the entries of C, d, 0.5 log R and log Q.
double log_hyper_prior(const GpssmModel& model);
/// Adds the hyper-prior gradient into the C, d, log R, log Q fields of `out`
/// (allocating them when empty).
void add_log_hyper_prior_grad(const GpssmModel& model, GradientBundle& out);

/// sum_t log N(y_t; C mu_t + d, C diag(B_t + Q) C^T + R) with mu_t the
/// transition mean from x_{t-1} under v.
double train_loglik(const GpssmModel& model, const Trajectory& traj, const WhitenedInducing& v,
                    const Mat& y);

}  // namespace ffvd
