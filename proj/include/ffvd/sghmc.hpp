#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ffvd/kernel.hpp"
#include "ffvd/rng.hpp"

namespace ffvd {

struct SghmcConfig {
  double step_size = 0.01;
  /// Step size at iteration i is step_size / (1 + step_decay * epoch), with
  /// epoch = (i - 1) / iters_per_epoch.
  double step_decay = 0.05;
  long iters_per_epoch = 1000;
  double friction = 1.0;
  long n_iters = 50000;
  long burn_in = 25000;
  long thin = 250;
  double mass_states = 1.0;
  double mass_inducing = 1.0;
  double mass_hypers = 1.0;
  std::uint64_t seed = 0;
  int max_halvings = 5;

  /// Throws UsageError unless burn_in < n_iters, thin >= 1 and step * friction < 1.
  void validate() const;
  long retained_draws() const { return (n_iters - burn_in) / thin; }
  double step_at(long iteration) const;
};

/// Log density and gradient at a position. Returns the value and writes the
/// gradient; may throw NumericalError.
using LogDensity = std::function<double(const Vec& position, Vec& gradient)>;

/// Discretized underdamped Langevin dynamics without Metropolis correction:
///   p <- (1 - eta*gamma/m) p + eta grad log q + N(0, 2 eta gamma)
///   x <- x + (eta/m) p
class SghmcSampler {
 public:
  /// `mass` has one entry per coordinate of the position.
  SghmcSampler(const SghmcConfig& config, Vec mass, std::uint64_t seed);

  /// Evaluate the target at `position` to prime the cached gradient.
  double initialize(const LogDensity& target, const Vec& position);

  /// Advance one iteration. Non-finite states roll back and retry with the
  /// step size halved, up to config.max_halvings times, before throwing
  /// NumericalError with the iteration index. Returns the new log density.
  double step(const LogDensity& target, Vec& position, long iteration);

  /// Draw fresh momentum from N(0, M).
  void resample_momentum();

  const Vec& momentum() const { return momentum_; }
  Vec& momentum() { return momentum_; }
  double last_log_density() const { return log_density_; }

 private:
  SghmcConfig config_;
  Vec mass_;
  Vec momentum_;
  Vec gradient_;
  double log_density_ = 0.0;
  Rng rng_;
};

struct ChainDraw {
  Vec position;
  double log_target;
  long iteration;
};

/// Run a full chain, keeping every `thin`-th post-burn-in state. Momentum is
/// resampled when burn-in ends.
std::vector<ChainDraw> sghmc_run(const LogDensity& target, const Vec& init,
                                 const SghmcConfig& config, Vec mass = {});

}  // namespace ffvd
