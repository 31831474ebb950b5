#include "ffvd/pmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ffvd/error.hpp"
#include "ffvd/parallel.hpp"

namespace ffvd {
namespace {

/// Inverse-CDF draw from normalized weights.
int draw_index(const std::vector<double>& cumulative, StreamRng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                   static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
}

}  // namespace

Trajectory pmcmc_sweep(const GpssmModel& model, const WhitenedInducing& v,
                       const Trajectory& reference, const Mat& y, const PmcmcConfig& config,
                       Rng& rng) {
  const int S = config.n_particles;
  if (S < 1) throw UsageError("need at least one particle");
  reference.validate(model.d_x(), model.d_a());
  const int T = reference.T(), dx = model.d_x();
  if (y.rows() != T || y.cols() != model.d_y()) throw ShapeError("observations must be T x d_y");
  if (S == 1) return reference;

  const std::uint64_t sweep_seed = rng();
  const auto& p = model.params();
  const TransitionEvaluator transition(model, v);
  const int ref = S - 1;

  // particles[t] is S x d_x; ancestors[t][i] indexes particles[t-1].
  std::vector<Mat> particles(T + 1, Mat(S, dx));
  std::vector<std::vector<int>> ancestors(T + 1, std::vector<int>(S));
  std::vector<double> weights(S), cumulative(S);

  for (int i = 0; i < ref; ++i) {
    StreamRng stream(derive_seed(sweep_seed, {0, static_cast<std::uint64_t>(i)}));
    particles[0].row(i) =
        (p.x0_mean.array() + p.x0_var.array().sqrt() * standard_normal(stream, dx).array())
            .transpose();
  }
  particles[0].row(ref) = reference.states.row(0);

  const bool parallel = config.parallel && S - 1 >= 2;
  for (int t = 1; t <= T; ++t) {
    const Vec control = reference.controls.row(t - 1).transpose();
    auto& anc = ancestors[t];
    const Mat& prev = particles[t - 1];
    Mat& cur = particles[t];
    std::vector<double> log_w(S);

#pragma omp parallel for schedule(static) num_threads(kernels::max_threads()) if (parallel)
    for (int i = 0; i < ref; ++i) {
      StreamRng stream(derive_seed(sweep_seed, {static_cast<std::uint64_t>(t),
                                                static_cast<std::uint64_t>(i)}));
      anc[i] = t == 1 ? i : draw_index(cumulative, stream);
      const auto step = transition(prev.row(anc[i]).transpose(), control);
      cur.row(i) = (step.mean.array() + step.var.array().sqrt() * standard_normal(stream, dx).array())
                       .transpose();
      log_w[i] = log_likelihood_obs(model, cur.row(i).transpose(), y.row(t - 1).transpose());
    }
    anc[ref] = ref;
    cur.row(ref) = reference.states.row(t);
    log_w[ref] = log_likelihood_obs(model, cur.row(ref).transpose(), y.row(t - 1).transpose());

    double max_w = -std::numeric_limits<double>::infinity();
    for (double& lw : log_w) {
      if (std::isnan(lw)) lw = -std::numeric_limits<double>::infinity();
      max_w = std::max(max_w, lw);
    }
    if (!std::isfinite(max_w)) throw WeightCollapseError(t);
    double total = 0.0;
    for (int i = 0; i < S; ++i) {
      weights[i] = std::exp(log_w[i] - max_w);
      total += weights[i];
    }
    double run = 0.0;
    for (int i = 0; i < S; ++i) {
      weights[i] /= total;
      run += weights[i];
      cumulative[i] = run;
    }
    if (config.on_weights) config.on_weights(t, weights);
  }

  StreamRng final_stream(derive_seed(sweep_seed, {static_cast<std::uint64_t>(T) + 1, 0}));
  int j = draw_index(cumulative, final_stream);
  Trajectory out{Mat(T + 1, dx), reference.controls};
  for (int t = T; t >= 1; --t) {
    out.states.row(t) = particles[t].row(j);
    j = ancestors[t][j];
  }
  out.states.row(0) = particles[0].row(j);
  return out;
}

}  // namespace ffvd
