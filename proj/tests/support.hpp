#pragma once

#include <functional>
#include <random>

#include "ffvd/model.hpp"
#include "ffvd/rng.hpp"

namespace ffvd::test {

inline Mat random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Mat out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = normal(rng);
  return out;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct ModelShape {
  int d_x = 1;
  int d_a = 0;
  int d_y = 1;
  int M = 3;
};

/// Model with moderately scaled random hyperparameters; Z spread over [-1.5, 1.5].
inline GpssmModel random_model(Rng& rng, const ModelShape& s) {
  ModelParams p;
  p.d_x = s.d_x;
  p.d_a = s.d_a;
  p.d_y = s.d_y;
  const int D = s.d_x + s.d_a;
  for (int d = 0; d < s.d_x; ++d) {
    Vec l(D);
    for (int j = 0; j < D; ++j) l[j] = uniform(rng, 0.6, 1.5);
    p.kernels.push_back({uniform(rng, 0.5, 2.0), l});
  }
  p.Z = Mat(s.M, D);
  for (Eigen::Index i = 0; i < p.Z.size(); ++i) p.Z.data()[i] = uniform(rng, -1.5, 1.5);
  p.Q = Vec(s.d_x);
  for (int d = 0; d < s.d_x; ++d) p.Q[d] = uniform(rng, 0.1, 0.5);
  p.C = random_matrix(rng, s.d_y, s.d_x, 0.8);
  p.d = random_matrix(rng, s.d_y, 1, 0.3);
  p.R = Vec(s.d_y);
  for (int i = 0; i < s.d_y; ++i) p.R[i] = uniform(rng, 0.2, 0.6);
  p.x0_mean = random_matrix(rng, s.d_x, 1, 0.3);
  p.x0_var = Vec(s.d_x);
  for (int d = 0; d < s.d_x; ++d) p.x0_var[d] = uniform(rng, 0.5, 1.5);
  return GpssmModel(std::move(p));
}

inline Trajectory random_trajectory(Rng& rng, int T, int d_x, int d_a, double scale = 0.8) {
  return {random_matrix(rng, T + 1, d_x, scale), random_matrix(rng, T, d_a, scale)};
}

inline WhitenedInducing random_inducing(Rng& rng, const GpssmModel& m, double scale = 0.7) {
  return {random_matrix(rng, m.d_x(), m.num_inducing(), scale)};
}

/// Copy of `model` with the listed parameters replaced.
inline GpssmModel with_params(const GpssmModel& model,
                              const std::function<void(ModelParams&)>& edit) {
  ModelParams p = model.params();
  edit(p);
  return GpssmModel(std::move(p));
}

/// Central differences of f at x with step h_rel * max(|x_i|, 1).
inline Vec central_difference(const std::function<double(const Vec&)>& f, const Vec& x,
                              double h_rel = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = h_rel * std::max(std::abs(x[i]), 1.0);
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// |a - f| / max(|a|, |f|, 1)
inline double gradient_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1.0});
}

}  // namespace ffvd::test
