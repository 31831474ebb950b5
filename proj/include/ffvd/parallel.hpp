#pragma once

// Data-parallel kernels behind the objective and the samplers. Each kernel has
// a straightforward serial reference (kept for tests and benchmarks) and an
// OpenMP version. The OpenMP versions parallelize over independent output rows
// or columns and never reduce across threads, so their results do not depend
// on the thread count.

#include "ffvd/kernel.hpp"

namespace ffvd::kernels {

/// Accumulated partials of a scalar F through K = k(X, Z).
struct CrossGramGrad {
  Mat X;                    ///< dF/dX, n x D
  Mat Z;                    ///< dF/dZ, M x D
  Vec log_lengthscales;     ///< dF/dlog l, D
  double log_signal_variance = 0.0;
};

namespace serial {
void cross_gram(const KernelParams& params, const Mat& X, const Mat& Z, Mat& out);
/// `adjoint` holds dF/dK (n x M); `K` is the forward result.
CrossGramGrad cross_gram_backward(const KernelParams& params, const Mat& X, const Mat& Z,
                                  const Mat& K, const Mat& adjoint);
}  // namespace serial

namespace omp {
void cross_gram(const KernelParams& params, const Mat& X, const Mat& Z, Mat& out);
CrossGramGrad cross_gram_backward(const KernelParams& params, const Mat& X, const Mat& Z,
                                  const Mat& K, const Mat& adjoint);
}  // namespace omp

/// Library entry points; always the OpenMP versions.
void cross_gram(const KernelParams& params, const Mat& X, const Mat& Z, Mat& out);
CrossGramGrad cross_gram_backward(const KernelParams& params, const Mat& X, const Mat& Z,
                                  const Mat& K, const Mat& adjoint);

/// Worker cap. Initialized from FFVD_THREADS when set, otherwise the OpenMP default.
int max_threads();
void set_max_threads(int n);

/// Minimum number of rows before a loop is worth forking.
inline constexpr int kParallelGrain = 64;

}  // namespace ffvd::kernels
