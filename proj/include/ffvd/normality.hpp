#pragma once

#include <span>
#include <string>
#include <vector>

namespace ffvd {

struct SampleStore;

struct NormalityResult {
  double k2;
  double p;
};

inline constexpr std::size_t kMinNormalitySamples = 20;

/// D'Agostino-Pearson omnibus test: squared skewness and kurtosis z-scores
/// summed and referred to chi^2 with two degrees of freedom. Throws
/// InsufficientSamplesError below 20 samples. A zero-variance sample is
/// reported as k2 = inf, p = 0.
NormalityResult normality_test(std::span<const double> samples);

struct NormalityRow {
  std::string quantity;  ///< "state" or "inducing"
  int index;             ///< t for states, m for inducing values
  int dim;
  double k2;
  double p;
};

struct NormalityReport {
  std::vector<NormalityRow> rows;
  double state_rejection_fraction = 0.0;
  double inducing_rejection_fraction = 0.0;
  double overall_rejection_fraction = 0.0;
};

inline constexpr double kNormalityLevel = 0.05;

/// Test every scalar state x_t[d] and whitened inducing value v[d][m] across
/// the stored draws.
NormalityReport normality_sweep(const SampleStore& store);

}  // namespace ffvd
