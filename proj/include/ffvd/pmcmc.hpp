#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "ffvd/model.hpp"

namespace ffvd {

struct PmcmcConfig {
  int n_particles = 32;
  long n_sweeps = 1000;
  std::uint64_t seed = 0;
  /// Propagate particles with OpenMP. Results are identical either way since
  /// every particle draws from its own counter-derived stream.
  bool parallel = true;
  /// Observer for the normalized weights at each time step (testing hook).
  std::function<void(int t, std::span<const double> weights)> on_weights;
};

/// One conditional SMC sweep with the last particle pinned to `reference`.
/// Particles are propagated through the transition predictive, weighted by the
/// observation likelihood, and multinomially resampled at every t < T; at t = T
/// a single index is drawn and its ancestral path returned.
Trajectory pmcmc_sweep(const GpssmModel& model, const WhitenedInducing& v,
                       const Trajectory& reference, const Mat& y, const PmcmcConfig& config,
                       Rng& rng);

}  // namespace ffvd
