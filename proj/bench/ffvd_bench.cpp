// Serial versus OpenMP timings for the cross-gram kernels.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>

#include "ffvd/parallel.hpp"

using namespace ffvd;

namespace {

template <class F>
double seconds_per_call(F&& f, int reps) {
  f();
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) f();
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
  return dt.count() / reps;
}

Mat random_points(Eigen::Index n, Eigen::Index D, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Mat X(n, D);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);
  return X;
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  const int reps = quick ? 2 : 20;
  const int sizes[][2] = {{120, 20}, {500, 100}, {2000, 100}};
  const int n_sizes = quick ? 1 : 3;
  std::mt19937_64 rng(1);
  std::printf("threads %d\n", kernels::max_threads());
  std::printf("%6s %5s %14s %14s %14s %14s %10s\n", "n", "M", "fwd serial", "fwd omp",
              "bwd serial", "bwd omp", "max diff");
  for (int s = 0; s < n_sizes; ++s) {
    const int n = sizes[s][0], M = sizes[s][1], D = 5;
    const Mat X = random_points(n, D, rng), Z = random_points(M, D, rng);
    const KernelParams kp{1.5, Vec::Constant(D, 0.8)};
    const Mat adjoint = random_points(n, M, rng);
    Mat K_serial, K_omp;
    const double fs = seconds_per_call([&] { kernels::serial::cross_gram(kp, X, Z, K_serial); }, reps);
    const double fo = seconds_per_call([&] { kernels::omp::cross_gram(kp, X, Z, K_omp); }, reps);
    kernels::CrossGramGrad gs, go;
    const double bs = seconds_per_call(
        [&] { gs = kernels::serial::cross_gram_backward(kp, X, Z, K_serial, adjoint); }, reps);
    const double bo = seconds_per_call(
        [&] { go = kernels::omp::cross_gram_backward(kp, X, Z, K_omp, adjoint); }, reps);
    const double diff = std::max({(K_serial - K_omp).cwiseAbs().maxCoeff(),
                                  (gs.X - go.X).cwiseAbs().maxCoeff(),
                                  (gs.Z - go.Z).cwiseAbs().maxCoeff()});
    std::printf("%6d %5d %12.3es %12.3es %12.3es %12.3es %10.2e\n", n, M, fs, fo, bs, bo, diff);
    if (diff > 1e-9) {
      std::fprintf(stderr, "serial and OpenMP kernels disagree\n");
      return 1;
    }
  }
  return 0;
}
