#include "ffvd/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "ffvd/error.hpp"

namespace ffvd::kernels {
namespace {

int initial_threads() {
  if (const char* env = std::getenv("FFVD_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return std::min(n, omp_get_max_threads());
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{initial_threads()};
  return cap;
}

void check_shapes(const KernelParams& params, const Mat& X, const Mat& Z) {
  const auto D = params.lengthscales.size();
  if (X.cols() != D || Z.cols() != D) {
    throw ShapeError("cross gram inputs have " + std::to_string(X.cols()) + " and " +
                     std::to_string(Z.cols()) + " columns, lengthscales " + std::to_string(D));
  }
}

inline double entry(const KernelParams& params, const Mat& X, Eigen::Index i, const Mat& Z,
                    Eigen::Index m) {
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double s = (X(i, j) - Z(m, j)) / params.lengthscales[j];
    r2 += s * s;
  }
  return params.signal_variance * std::exp(-0.5 * r2);
}

}  // namespace

int max_threads() { return thread_cap().load(); }

void set_max_threads(int n) {
  thread_cap().store(std::max(1, n));
  omp_set_num_threads(std::max(1, n));
}

namespace serial {

void cross_gram(const KernelParams& params, const Mat& X, const Mat& Z, Mat& out) {
  check_shapes(params, X, Z);
  out.resize(X.rows(), Z.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index m = 0; m < Z.rows(); ++m) out(i, m) = entry(params, X, i, Z, m);
  }
}

CrossGramGrad cross_gram_backward(const KernelParams& params, const Mat& X, const Mat& Z,
                                  const Mat& K, const Mat& adjoint) {
  check_shapes(params, X, Z);
  const Eigen::Index n = X.rows(), M = Z.rows(), D = X.cols();
  CrossGramGrad g;
  g.X = Mat::Zero(n, D);
  g.Z = Mat::Zero(M, D);
  g.log_lengthscales = Vec::Zero(D);
  const Vec inv_l2 = params.lengthscales.array().square().inverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index m = 0; m < M; ++m) {
      const double w = adjoint(i, m) * K(i, m);
      if (w == 0.0) continue;
      for (Eigen::Index j = 0; j < D; ++j) {
        const double diff = X(i, j) - Z(m, j);
        const double s = diff * inv_l2[j];
        g.X(i, j) -= w * s;
        g.Z(m, j) += w * s;
        g.log_lengthscales[j] += w * diff * s;
      }
      g.log_signal_variance += w;
    }
  }
  return g;
}

}  // namespace serial

namespace omp {

void cross_gram(const KernelParams& params, const Mat& X, const Mat& Z, Mat& out) {
  check_shapes(params, X, Z);
  out.resize(X.rows(), Z.rows());
  const Eigen::Index n = X.rows(), M = Z.rows();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (n >= kParallelGrain)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index m = 0; m < M; ++m) out(i, m) = entry(params, X, i, Z, m);
  }
}

CrossGramGrad cross_gram_backward(const KernelParams& params, const Mat& X, const Mat& Z,
                                  const Mat& K, const Mat& adjoint) {
  check_shapes(params, X, Z);
  const Eigen::Index n = X.rows(), M = Z.rows(), D = X.cols();
  CrossGramGrad g;
  g.X = Mat::Zero(n, D);
  g.Z = Mat::Zero(M, D);
  g.log_lengthscales = Vec::Zero(D);
  const Vec inv_l2 = params.lengthscales.array().square().inverse();
  // per-row partial sums, reduced serially afterwards
  Mat ls_rows = Mat::Zero(D, n);
  Vec sv_rows = Vec::Zero(n);

#pragma omp parallel for schedule(static) num_threads(max_threads()) if (n >= kParallelGrain)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index m = 0; m < M; ++m) {
      const double w = adjoint(i, m) * K(i, m);
      if (w == 0.0) continue;
      for (Eigen::Index j = 0; j < D; ++j) {
        const double diff = X(i, j) - Z(m, j);
        const double s = diff * inv_l2[j];
        g.X(i, j) -= w * s;
        ls_rows(j, i) += w * diff * s;
      }
      sv_rows[i] += w;
    }
  }

#pragma omp parallel for schedule(static) num_threads(max_threads()) if (M >= kParallelGrain)
  for (Eigen::Index m = 0; m < M; ++m) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = adjoint(i, m) * K(i, m);
      if (w == 0.0) continue;
      for (Eigen::Index j = 0; j < D; ++j) g.Z(m, j) += w * ((X(i, j) - Z(m, j)) * inv_l2[j]);
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    g.log_lengthscales += ls_rows.col(i);
    g.log_signal_variance += sv_rows[i];
  }
  return g;
}

}  // namespace omp

// The OpenMP versions run even on one thread so results never depend on the
// thread count.
void cross_gram(const KernelParams& params, const Mat& X, const Mat& Z, Mat& out) {
  omp::cross_gram(params, X, Z, out);
}

CrossGramGrad cross_gram_backward(const KernelParams& params, const Mat& X, const Mat& Z,
                                  const Mat& K, const Mat& adjoint) {
  return omp::cross_gram_backward(params, X, Z, K, adjoint);
}

}  // namespace ffvd::kernels
