#include "ffvd/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ffvd/diagnostics.hpp"
#include "ffvd/error.hpp"
#include "ffvd/parallel.hpp"

namespace ffvd {

void KernelParams::validate() const {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw DataError("kernel signal variance must be positive and finite");
  }
  if (lengthscales.size() == 0) throw DataError("kernel needs at least one lengthscale");
  for (Eigen::Index j = 0; j < lengthscales.size(); ++j) {
    if (!(lengthscales[j] > 0.0) || !std::isfinite(lengthscales[j])) {
      throw DataError("kernel lengthscale " + std::to_string(j) + " must be positive and finite");
    }
  }
}

double kernel_eval(const KernelParams& params, const Eigen::Ref<const Vec>& x,
                   const Eigen::Ref<const Vec>& x_prime) {
  const auto D = params.lengthscales.size();
  if (x.size() != D || x_prime.size() != D) {
    throw ShapeError("kernel inputs have dimension " + std::to_string(x.size()) + " and " +
                     std::to_string(x_prime.size()) + ", lengthscales " + std::to_string(D));
  }
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < D; ++j) {
    const double s = (x[j] - x_prime[j]) / params.lengthscales[j];
    r2 += s * s;
  }
  return params.signal_variance * std::exp(-0.5 * r2);
}

Mat gram(const KernelParams& params, const Mat& X, const Mat& X_prime) {
  const auto D = params.lengthscales.size();
  if (X.cols() != D || X_prime.cols() != D) {
    throw ShapeError("gram inputs have " + std::to_string(X.cols()) + " and " +
                     std::to_string(X_prime.cols()) + " columns, lengthscales " +
                     std::to_string(D));
  }
  Mat out;
  kernels::cross_gram(params, X, X_prime, out);
  return out;
}

JitteredCholesky cholesky_jittered(const Mat& K) {
  if (K.rows() != K.cols() || K.rows() == 0) {
    throw ShapeError("cholesky needs a non-empty square matrix");
  }
  const double scale = K.diagonal().mean();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw NonPsdError("matrix diagonal has non-positive mean", 0.0);
  }
  const Mat Ksym = 0.5 * (K + K.transpose());
  double jitter = 0.0;
  for (double rel = kJitterStart; rel <= kJitterMax * (1.0 + 1e-12); rel *= 10.0) {
    jitter = rel * scale;
    Mat A = Ksym;
    A.diagonal().array() += jitter;
    Eigen::LLT<Mat> llt(A);
    if (llt.info() == Eigen::Success) {
      Mat L = llt.matrixL();
      if (L.allFinite() && (L.diagonal().array() > 0.0).all()) return {std::move(L), jitter};
    }
  }
  throw NonPsdError("cholesky failed at maximum jitter", jitter);
}

GaussianMoments gaussian_conditional(const Vec& mean, const Mat& cov, std::span<const int> observed,
                                     const Vec& x_observed) {
  const int n = static_cast<int>(mean.size());
  if (cov.rows() != n || cov.cols() != n) throw ShapeError("covariance does not match mean");
  if (static_cast<Eigen::Index>(observed.size()) != x_observed.size()) {
    throw ShapeError("observed indices and values differ in length");
  }
  std::vector<char> is_observed(n, 0);
  for (int i : observed) {
    if (i < 0 || i >= n || is_observed[i]) throw ShapeError("invalid observed index");
    is_observed[i] = 1;
  }
  std::vector<int> rest;
  for (int i = 0; i < n; ++i) {
    if (!is_observed[i]) rest.push_back(i);
  }
  const auto na = static_cast<Eigen::Index>(observed.size());
  const auto nb = static_cast<Eigen::Index>(rest.size());

  Vec mu_a(na), mu_b(nb);
  Mat S_aa(na, na), S_ba(nb, na), S_bb(nb, nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    mu_a[i] = mean[observed[i]];
    for (Eigen::Index j = 0; j < na; ++j) S_aa(i, j) = cov(observed[i], observed[j]);
  }
  for (Eigen::Index i = 0; i < nb; ++i) {
    mu_b[i] = mean[rest[i]];
    for (Eigen::Index j = 0; j < na; ++j) S_ba(i, j) = cov(rest[i], observed[j]);
    for (Eigen::Index j = 0; j < nb; ++j) S_bb(i, j) = cov(rest[i], rest[j]);
  }
  if (na == 0) return {mu_b, S_bb};

  const auto chol = cholesky_jittered(S_aa);
  const auto L = chol.L.triangularView<Eigen::Lower>();
  // W = L^{-1} S_ab, so S_ba S_aa^{-1} S_ab = W^T W
  const Mat W = L.solve(S_ba.transpose());
  const Vec w = L.solve(x_observed - mu_a);
  return {mu_b + W.transpose() * w, S_bb - W.transpose() * W};
}

double log_mvn_density(const Vec& y, const Vec& mean, const Mat& cov) {
  const auto n = y.size();
  if (mean.size() != n || cov.rows() != n || cov.cols() != n) {
    throw ShapeError("log density arguments disagree in dimension");
  }
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Vec z = llt.matrixL().solve(y - mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det +
                 z.squaredNorm());
}

double expected_log_gaussian(const Vec& mu, const Mat& Sigma, const Vec& y, const Mat& Sigma_y) {
  const auto n = y.size();
  if (mu.size() != n || Sigma.rows() != n || Sigma.cols() != n || Sigma_y.rows() != n ||
      Sigma_y.cols() != n) {
    throw ShapeError("expected log density arguments disagree in dimension");
  }
  Eigen::LLT<Mat> llt(Sigma_y);
  if (llt.info() != Eigen::Success) throw NumericalError("noise covariance is singular");
  const double trace = llt.solve(Sigma).trace();
  return log_mvn_density(y, mu, Sigma_y) - 0.5 * trace;
}

GramCache GramCache::build(const KernelParams& params, const Mat& Z, Vec m_Z) {
  params.validate();
  if (m_Z.size() != Z.rows()) throw ShapeError("inducing mean does not match Z");
  GramCache cache;
  cache.K_Z = gram(params, Z, Z);
  auto chol = cholesky_jittered(cache.K_Z);
  cache.L_Z = std::move(chol.L);
  cache.jitter = chol.jitter;
  cache.m_Z = std::move(m_Z);
  return cache;
}

double clamp_conditional_variance(double b, double signal_variance) {
  if (b >= 0.0) return b;
  if (-b > 1e-4 * signal_variance) {
    diagnostics::warn("conditional variance " + std::to_string(b) + " clamped to zero");
  }
  return 0.0;
}

SparseCond sparse_cond(const KernelParams& params, const GramCache& cache, const Mat& Z,
                       const Eigen::Ref<const Vec>& x) {
  if (x.size() != params.input_dim()) throw ShapeError("sparse_cond input dimension");
  if (Z.rows() != cache.L_Z.rows()) throw ShapeError("cache does not match Z");
  Vec k(Z.rows());
  for (Eigen::Index m = 0; m < Z.rows(); ++m) k[m] = kernel_eval(params, x, Z.row(m).transpose());
  const auto L = cache.L_Z.triangularView<Eigen::Lower>();
  const Vec a_white = L.solve(k);                      // L^{-1} k
  const Vec a = L.transpose().solve(a_white);          // K^{-1} k
  SparseCond out;
  out.A = a.transpose();
  out.B = clamp_conditional_variance(params.signal_variance - a_white.squaredNorm(),
                                     params.signal_variance);
  return out;
}

}  // namespace ffvd
