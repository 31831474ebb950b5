#include "ffvd/sghmc.hpp"

#include <cmath>
#include <string>

#include "ffvd/error.hpp"

namespace ffvd {

void SghmcConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw UsageError("step size must be positive");
  if (!(friction > 0.0) || !std::isfinite(friction)) throw UsageError("friction must be positive");
  if (!(mass_states > 0.0 && mass_inducing > 0.0 && mass_hypers > 0.0)) {
    throw UsageError("masses must be positive");
  }
  if (n_iters < 1 || burn_in < 0 || burn_in >= n_iters) {
    throw UsageError("need 0 <= burn_in < n_iters (burn_in = " + std::to_string(burn_in) +
                     ", n_iters = " + std::to_string(n_iters) + ")");
  }
  if (thin < 1) throw UsageError("thin must be >= 1");
  if (!(step_size * friction < 1.0)) throw UsageError("step_size * friction must be < 1");
  if (max_halvings < 0) throw UsageError("max_halvings must be >= 0");
  if (!(step_decay >= 0.0) || !std::isfinite(step_decay)) throw UsageError("step decay must be >= 0");
  if (iters_per_epoch < 1) throw UsageError("iters_per_epoch must be >= 1");
}

double SghmcConfig::step_at(long iteration) const {
  const long epoch = iteration > 0 ? (iteration - 1) / iters_per_epoch : 0;
  return step_size / (1.0 + step_decay * static_cast<double>(epoch));
}

SghmcSampler::SghmcSampler(const SghmcConfig& config, Vec mass, std::uint64_t seed)
    : config_(config), mass_(std::move(mass)), rng_(seed) {
  config_.validate();
  if (!(mass_.array() > 0.0).all()) throw UsageError("masses must be positive");
}

double SghmcSampler::initialize(const LogDensity& target, const Vec& position) {
  if (position.size() != mass_.size()) throw ShapeError("position and mass differ in length");
  gradient_ = Vec::Zero(position.size());
  log_density_ = target(position, gradient_);
  if (!std::isfinite(log_density_) || !gradient_.allFinite()) {
    throw NumericalError("target is not finite at the initial state", 0);
  }
  resample_momentum();
  return log_density_;
}

void SghmcSampler::resample_momentum() {
  momentum_ = mass_.array().sqrt() * standard_normal(rng_, mass_.size()).array();
}

double SghmcSampler::step(const LogDensity& target, Vec& position, long iteration) {
  double eta = config_.step_at(iteration);
  const double gamma = config_.friction;
  Vec grad_new(position.size());
  for (int attempt = 0; attempt <= config_.max_halvings; ++attempt, eta *= 0.5) {
    const Vec noise = std::sqrt(2.0 * eta * gamma) * standard_normal(rng_, position.size());
    const Vec p = (1.0 - eta * gamma / mass_.array()) * momentum_.array() +
                  eta * gradient_.array() + noise.array();
    const Vec x = position.array() + eta * p.array() / mass_.array();
    if (!x.allFinite() || !p.allFinite()) continue;
    double value;
    try {
      value = target(x, grad_new);
    } catch (const NumericalError&) {
      continue;
    }
    if (!std::isfinite(value) || !grad_new.allFinite()) continue;
    position = x;
    momentum_ = p;
    gradient_ = grad_new;
    log_density_ = value;
    return value;
  }
  throw NumericalError("SGHMC state became non-finite after step-size halving", iteration);
}

std::vector<ChainDraw> sghmc_run(const LogDensity& target, const Vec& init,
                                 const SghmcConfig& config, Vec mass) {
  config.validate();
  if (mass.size() == 0) mass = Vec::Ones(init.size());
  SghmcSampler sampler(config, std::move(mass), config.seed);
  Vec position = init;
  sampler.initialize(target, position);
  std::vector<ChainDraw> draws;
  draws.reserve(static_cast<std::size_t>(config.retained_draws()));
  for (long i = 1; i <= config.n_iters; ++i) {
    const double value = sampler.step(target, position, i);
    if (i == config.burn_in) sampler.resample_momentum();
    if (i > config.burn_in && (i - config.burn_in) % config.thin == 0) {
      draws.push_back({position, value, i});
    }
  }
  return draws;
}

}  // namespace ffvd
