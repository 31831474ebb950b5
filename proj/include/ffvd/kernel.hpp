#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace ffvd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

/// Squared-exponential ARD hyperparameters for one output dimension.
struct KernelParams {
  double signal_variance = 1.0;
  Vec lengthscales;

  int input_dim() const { return static_cast<int>(lengthscales.size()); }
  /// Throws DataError unless signal_variance > 0 and every lengthscale > 0.
  void validate() const;
};

/// sigma^2 * exp(-0.5 * sum_j (x_j - x'_j)^2 / l_j^2)
double kernel_eval(const KernelParams& params, const Eigen::Ref<const Vec>& x,
                   const Eigen::Ref<const Vec>& x_prime);

/// Rows of X against rows of X_prime.
Mat gram(const KernelParams& params, const Mat& X, const Mat& X_prime);

struct JitteredCholesky {
  Mat L;          ///< lower factor, L L^T = K + jitter I
  double jitter;  ///< absolute jitter added to the diagonal
};

/// Relative jitter ladder: 1e-8, 1e-7, ..., 1e-2 times mean(diag K).
inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-2;

/// Cholesky with escalating diagonal jitter. Throws NonPsdError when even the
/// largest jitter fails.
JitteredCholesky cholesky_jittered(const Mat& K);

struct GaussianMoments {
  Vec mean;
  Mat cov;
};

/// Moments of x_b | x_a for a joint Gaussian. `observed` lists the indices of
/// the conditioning block; the remaining indices (in increasing order) form b.
GaussianMoments gaussian_conditional(const Vec& mean, const Mat& cov,
                                     std::span<const int> observed, const Vec& x_observed);

/// log N(y; mean, cov) for a dense covariance.
double log_mvn_density(const Vec& y, const Vec& mean, const Mat& cov);

/// E_{f ~ N(mu, Sigma)}[log N(y; f, Sigma_y)]
///   = log N(y; mu, Sigma_y) - 0.5 tr(Sigma_y^{-1} Sigma)
double expected_log_gaussian(const Vec& mu, const Mat& Sigma, const Vec& y, const Mat& Sigma_y);

/// Prior quantities at the inducing inputs for one output dimension.
struct GramCache {
  Mat K_Z;  ///< gram(Z, Z) without jitter
  Mat L_Z;  ///< factor of K_Z + jitter I
  Vec m_Z;
  double jitter = 0.0;

  static GramCache build(const KernelParams& params, const Mat& Z, Vec m_Z);
};

/// Projection weights A = k(x,Z) K_Z^{-1} and conditional variance
/// B = k(x,x) - k(x,Z) K_Z^{-1} k(Z,x), clamped to be non-negative.
struct SparseCond {
  RowVec A;
  double B = 0.0;
};

SparseCond sparse_cond(const KernelParams& params, const GramCache& cache, const Mat& Z,
                       const Eigen::Ref<const Vec>& x);

/// Clamp a conditional variance at zero, warning when the negative excursion
/// exceeds 1e-4 * signal_variance.
double clamp_conditional_variance(double b, double signal_variance);

}  // namespace ffvd
