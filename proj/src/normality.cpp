#include "ffvd/normality.hpp"

#include <cmath>
#include <limits>

#include "ffvd/error.hpp"
#include "ffvd/fit.hpp"

namespace ffvd {
namespace {

double skew_z(double b1, double n) {
  double y = b1 * std::sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)));
  const double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                       ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
  const double W2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
  const double delta = 1.0 / std::sqrt(0.5 * std::log(W2));
  const double alpha = std::sqrt(2.0 / (W2 - 1.0));
  if (y == 0.0) y = 1.0;
  const double ya = y / alpha;
  return delta * std::log(ya + std::sqrt(ya * ya + 1.0));
}

double kurtosis_z(double b2, double n) {
  const double E = 3.0 * (n - 1.0) / (n + 1.0);
  const double var_b2 =
      24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
  const double x = (b2 - E) / std::sqrt(var_b2);
  const double sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) *
                            std::sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)));
  const double A = 6.0 + 8.0 / sqrt_beta1 *
                             (2.0 / sqrt_beta1 + std::sqrt(1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)));
  const double term1 = 1.0 - 2.0 / (9.0 * A);
  const double denom = 1.0 + x * std::sqrt(2.0 / (A - 4.0));
  const double term2 =
      denom == 0.0 ? 0.0
                   : std::copysign(std::cbrt((1.0 - 2.0 / A) / std::abs(denom)), denom);
  return (term1 - term2) / std::sqrt(2.0 / (9.0 * A));
}

}  // namespace

NormalityResult normality_test(std::span<const double> samples) {
  const std::size_t count = samples.size();
  if (count < kMinNormalitySamples) throw InsufficientSamplesError(count, kMinNormalitySamples);
  const double n = static_cast<double>(count);
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double s : samples) {
    const double d = s - mean, d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) return {std::numeric_limits<double>::infinity(), 0.0};
  const double zs = skew_z(m3 / std::pow(m2, 1.5), n);
  const double zk = kurtosis_z(m4 / (m2 * m2), n);
  const double k2 = zs * zs + zk * zk;
  return {k2, std::exp(-0.5 * k2)};
}

NormalityReport normality_sweep(const SampleStore& store) {
  const std::size_t S = store.draws.size();
  if (S < kMinNormalitySamples) throw InsufficientSamplesError(S, kMinNormalitySamples);
  const auto& first = store.draws.front();
  const auto rows = first.trajectory.states.rows(), dx = first.trajectory.states.cols();
  const auto M = first.v.v.cols();
  for (const auto& d : store.draws) {
    if (d.trajectory.states.rows() != rows || d.trajectory.states.cols() != dx ||
        d.v.v.rows() != first.v.v.rows() || d.v.v.cols() != M) {
      throw ShapeError("draws in the sample store disagree in shape");
    }
  }

  NormalityReport report;
  std::vector<double> buf(S);
  long rejected_states = 0, rejected_inducing = 0, n_states = 0, n_inducing = 0;
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (Eigen::Index d = 0; d < dx; ++d) {
      for (std::size_t s = 0; s < S; ++s) buf[s] = store.draws[s].trajectory.states(t, d);
      const auto r = normality_test(buf);
      report.rows.push_back({"state", static_cast<int>(t), static_cast<int>(d), r.k2, r.p});
      rejected_states += r.p < kNormalityLevel;
      ++n_states;
    }
  }
  for (Eigen::Index d = 0; d < first.v.v.rows(); ++d) {
    for (Eigen::Index m = 0; m < M; ++m) {
      for (std::size_t s = 0; s < S; ++s) buf[s] = store.draws[s].v.v(d, m);
      const auto r = normality_test(buf);
      report.rows.push_back({"inducing", static_cast<int>(m), static_cast<int>(d), r.k2, r.p});
      rejected_inducing += r.p < kNormalityLevel;
      ++n_inducing;
    }
  }
  const auto frac = [](long a, long b) { return b > 0 ? static_cast<double>(a) / b : 0.0; };
  report.state_rejection_fraction = frac(rejected_states, n_states);
  report.inducing_rejection_fraction = frac(rejected_inducing, n_inducing);
  report.overall_rejection_fraction =
      frac(rejected_states + rejected_inducing, n_states + n_inducing);
  return report;
}

}  // namespace ffvd
