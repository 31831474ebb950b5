#pragma once

#include <cstdint>
#include <vector>

#include "ffvd/kernel.hpp"
#include "ffvd/rng.hpp"

namespace ffvd {

/// Raw parameters of a sparse GP state-space model.
///
/// Latent transitions: x_t | x_{t-1} ~ N(f(x_{t-1}, a_t), diag(Q)) with one
/// independent GP per latent dimension, all sharing the inducing inputs Z.
/// The GP mean is the identity on the latent coordinates, m_d([x; a]) = x_d.
/// Observations: y_t | x_t ~ N(C x_t + d, diag(R)).
struct ModelParams {
  int d_x = 1;
  int d_a = 0;
  int d_y = 1;
  std::vector<KernelParams> kernels;  ///< one per latent dimension
  Mat Z;                              ///< M x (d_x + d_a)
  Vec Q;                              ///< d_x process variances
  Mat C;                              ///< d_y x d_x
  Vec d;                              ///< d_y
  Vec R;                              ///< d_y observation variances
  Vec x0_mean;                        ///< d_x
  Vec x0_var;                         ///< d_x
};

/// Immutable model: validated parameters plus per-dimension gram caches.
/// Updates construct a new model.
class GpssmModel {
 public:
  explicit GpssmModel(ModelParams params);

  const ModelParams& params() const { return params_; }
  int d_x() const { return params_.d_x; }
  int d_a() const { return params_.d_a; }
  int d_y() const { return params_.d_y; }
  int input_dim() const { return params_.d_x + params_.d_a; }
  int num_inducing() const { return static_cast<int>(params_.Z.rows()); }
  const KernelParams& kernel(int dim) const { return params_.kernels[dim]; }
  const GramCache& cache(int dim) const { return caches_[dim]; }
  const Mat& Z() const { return params_.Z; }

 private:
  ModelParams params_;
  std::vector<GramCache> caches_;
};

/// Latent states x_0..x_T ((T+1) x d_x) and controls a_1..a_T (T x d_a). Row
/// t-1 of `controls` is the input active on the transition into x_t.
struct Trajectory {
  Mat states;
  Mat controls;

  int T() const { return static_cast<int>(states.rows()) - 1; }
  /// Transition inputs [x_{t-1}; a_t] for t = 1..T, one per row.
  Mat transition_inputs() const;
  void validate(int d_x, int d_a) const;
};

/// Whitened inducing values, one row per latent dimension (d_x x M).
struct WhitenedInducing {
  Mat v;
};

WhitenedInducing whiten(const GpssmModel& model, const Mat& u);
Mat unwhiten(const GpssmModel& model, const WhitenedInducing& v);

struct DiagonalGaussian {
  Vec mean;
  Vec var;
};

/// p(x_t | x_{t-1}, a_t, v) per latent dimension.
DiagonalGaussian transition_predictive(const GpssmModel& model, const Eigen::Ref<const Vec>& x_prev,
                                       const Eigen::Ref<const Vec>& control,
                                       const WhitenedInducing& v);

/// Precomputed L_Z^{-T} v per dimension, for repeated transition evaluations.
class TransitionEvaluator {
 public:
  TransitionEvaluator(const GpssmModel& model, const WhitenedInducing& v);
  DiagonalGaussian operator()(const Eigen::Ref<const Vec>& x_prev,
                              const Eigen::Ref<const Vec>& control) const;

 private:
  const GpssmModel* model_;
  Mat alpha_;  ///< M x d_x
};

struct GenerativeDraw {
  Trajectory trajectory;
  Mat observations;  ///< T x d_y, row t-1 holds y_t
};

GenerativeDraw sample_generative(const GpssmModel& model, const WhitenedInducing& v,
                                 const Mat& controls, int T, Rng& rng);

/// log N(y; C x + d, diag(R))
double log_likelihood_obs(const GpssmModel& model, const Eigen::Ref<const Vec>& x,
                          const Eigen::Ref<const Vec>& y);

struct InitConfig {
  int d_x = 4;
  int num_inducing = 100;
  std::uint64_t seed = 0;
  int kmeans_iters = 20;
};

struct Initialization {
  GpssmModel model;
  Trajectory trajectory;
  WhitenedInducing v;
};

struct Dataset;

/// Deterministic initialization from the training block of a dataset.
Initialization init_from_data(const Dataset& data, const InitConfig& config);

/// Lloyd's algorithm with Forgy initialization from a seeded draw of distinct rows.
Mat kmeans(const Mat& points, int k, int iters, std::uint64_t seed);

}  // namespace ffvd
