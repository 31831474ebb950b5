#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ffvd/error.hpp"
#include "ffvd/objective.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ffvd;
using doctest::Approx;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Mat observe(Rng& rng, const GpssmModel& model, const Trajectory& traj) {
  const auto& p = model.params();
  Mat y(traj.T(), p.d_y);
  for (int t = 1; t <= traj.T(); ++t) {
    y.row(t - 1) = (p.C * traj.states.row(t).transpose() + p.d).transpose();
  }
  return y + test::random_matrix(rng, y.rows(), y.cols(), 0.3);
}

/// The same model with a vanishing signal variance, so that A and B vanish.
GpssmModel flat_kernel(const GpssmModel& model) {
  return test::with_params(model, [](ModelParams& p) {
    for (auto& k : p.kernels) k.signal_variance = 1e-200;
  });
}

double log_std_normal(const Mat& v) { return -0.5 * v.squaredNorm() - 0.5 * v.size() * kLog2Pi; }

/// Random-walk transitions plus the observation and x_0 terms.
double random_walk_target(const GpssmModel& model, const Trajectory& traj, const Mat& y) {
  const auto& p = model.params();
  double total = 0.0;
  for (int d = 0; d < p.d_x; ++d) {
    total += oracle::log_normal(traj.states(0, d), p.x0_mean[d], p.x0_var[d]);
    for (int t = 1; t <= traj.T(); ++t) {
      total += oracle::log_normal(traj.states(t, d), traj.states(t - 1, d), p.Q[d]);
    }
  }
  for (int t = 1; t <= traj.T(); ++t) {
    total += log_likelihood_obs(model, traj.states.row(t).transpose(), y.row(t - 1).transpose());
  }
  return total;
}

}  // namespace

TEST_CASE("joint target at a zero trajectory assembles from closed-form pieces") {
  Rng rng(1);
  const auto model = test::random_model(rng, {1, 0, 2, 3});
  const auto& p = model.params();
  const Trajectory traj{Mat::Zero(2, 1), Mat(1, 0)};
  const Mat y = p.d.transpose();
  const WhitenedInducing v{Mat::Zero(1, 3)};
  const double B0 = sparse_cond(model.kernel(0), model.cache(0), model.Z(), Vec::Zero(1)).B;
  double expected = -1.5 * kLog2Pi + oracle::log_normal(0.0, p.x0_mean[0], p.x0_var[0]) -
                    0.5 * std::log(2 * std::numbers::pi * p.Q[0]) - 0.5 * B0 / p.Q[0];
  for (int i = 0; i < 2; ++i) expected -= 0.5 * std::log(2 * std::numbers::pi * p.R[i]);
  CHECK(log_q_joint(model, traj, v, y) == Approx(expected).epsilon(1e-12));
}

TEST_CASE("joint target with a vanishing kernel is prior plus random walk") {
  Rng rng(2);
  const auto model = flat_kernel(test::random_model(rng, {2, 1, 1, 3}));
  const auto traj = test::random_trajectory(rng, 5, 2, 1);
  const Mat y = observe(rng, model, traj);
  const auto v = test::random_inducing(rng, model);
  CHECK(log_q_joint(model, traj, v, y) ==
        Approx(log_std_normal(v.v) + random_walk_target(model, traj, y)).epsilon(1e-12));
}

TEST_CASE("joint target matches a straight-line implementation") {
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const test::ModelShape shape = rep < 5 ? test::ModelShape{1, 0, 1, 2} : test::ModelShape{2, 1, 2, 3};
    const auto model = test::random_model(rng, shape);
    const auto traj = test::random_trajectory(rng, 3, shape.d_x, shape.d_a);
    const Mat y = observe(rng, model, traj);
    const auto v = test::random_inducing(rng, model);
    CHECK(log_q_joint(model, traj, v, y) ==
          Approx(oracle::log_q_joint(model, traj, v, y)).epsilon(1e-10));
  }
}

TEST_CASE("collapsed stats with a vanishing kernel are the prior") {
  Rng rng(4);
  const auto model = flat_kernel(test::random_model(rng, {2, 0, 1, 3}));
  const auto traj = test::random_trajectory(rng, 4, 2, 0);
  const auto s = collapsed_stats(model, traj);
  for (int d = 0; d < 2; ++d) {
    CHECK((s.H[d] - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.g[d].cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("collapsed stats for a scalar transition") {
  Rng rng(5);
  const auto model = test::random_model(rng, {1, 0, 1, 1});
  const auto traj = test::random_trajectory(rng, 1, 1, 0);
  const auto& p = model.params();
  const double L = std::sqrt(p.kernels[0].signal_variance + model.cache(0).jitter);
  const double a = oracle::se_kernel(p.kernels[0], traj.states.row(0).transpose(), p.Z.row(0).transpose()) / L;
  const double r = traj.states(1, 0) - traj.states(0, 0);
  const double Q = p.Q[0];
  const auto s = collapsed_stats(model, traj);
  CHECK(s.H[0](0, 0) == Approx(1.0 / (1.0 + a * a / Q)).epsilon(1e-12));
  CHECK(s.g[0][0] == Approx((a * r / Q) / (1.0 + a * a / Q)).epsilon(1e-12));
  CHECK(s.x_tilde[0][0] == Approx(a * r / Q).epsilon(1e-12));
}

TEST_CASE("collapsed stats are symmetric positive definite and consistent") {
  Rng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const auto model = test::random_model(rng, {2, 1, 1, 4});
    const auto traj = test::random_trajectory(rng, 6, 2, 1);
    const auto s = collapsed_stats(model, traj);
    for (int d = 0; d < 2; ++d) {
      CHECK((s.H[d] - s.H[d].transpose()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(Eigen::SelfAdjointEigenSolver<Mat>(s.H[d]).eigenvalues().minCoeff() > 0.0);
      CHECK((s.g[d] - s.H[d] * s.x_tilde[d]).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(s.log_det_H[d] <= 0.0);
      CHECK(s.log_det_H[d] == Approx(std::log(s.H[d].determinant())).epsilon(1e-9));
    }
  }
}

TEST_CASE("collapsed target with a vanishing kernel is the random walk") {
  Rng rng(7);
  const auto model = flat_kernel(test::random_model(rng, {1, 0, 1, 3}));
  const auto traj = test::random_trajectory(rng, 5, 1, 0);
  const Mat y = observe(rng, model, traj);
  const WhitenedInducing zero{Mat::Zero(1, 3)};
  CHECK(log_q_collapsed(model, traj, y) ==
        Approx(log_q_joint(model, traj, zero, y) - log_std_normal(zero.v)).epsilon(1e-12));
}

TEST_CASE("collapsed target equals the integral of the joint over v") {
  Rng rng(8);
  for (int rep = 0; rep < 5; ++rep) {
    const auto model = test::random_model(rng, {1, 0, 1, 1});
    const auto traj = test::random_trajectory(rng, 2, 1, 0);
    const Mat y = observe(rng, model, traj);
    const auto s = collapsed_stats(model, traj);
    const double width = 12.0 * std::sqrt(s.H[0](0, 0));
    const double log_int = oracle::log_integral(
        [&](const Vec& v) { return log_q_joint(model, traj, {v.transpose()}, y); }, s.g[0],
        Vec::Constant(1, width), 2001);
    CHECK(std::abs(log_q_collapsed(model, traj, y) - log_int) < 1e-4);
  }
}

TEST_CASE("joint minus the conditional is the collapsed target for every v") {
  Rng rng(9);
  for (int rep = 0; rep < 5; ++rep) {
    const auto model = test::random_model(rng, {1, 0, 1, 2});
    const auto traj = test::random_trajectory(rng, 3, 1, 0);
    const Mat y = observe(rng, model, traj);
    const auto s = collapsed_stats(model, traj);
    const double collapsed = log_q_collapsed(model, traj, y);
    double lo = 1e300, hi = -1e300;
    for (int k = 0; k < 10; ++k) {
      const auto v = test::random_inducing(rng, model, 1.5);
      const double diff = log_q_joint(model, traj, v, y) - log_conditional_inducing(s, v);
      lo = std::min(lo, diff);
      hi = std::max(hi, diff);
      CHECK(std::abs(diff - collapsed) < 1e-6);
    }
    CHECK(hi - lo <= 1e-6);
  }
}

TEST_CASE("conditional draws with a vanishing kernel follow the prior") {
  Rng rng(10);
  const auto model = flat_kernel(test::random_model(rng, {1, 0, 1, 2}));
  const auto traj = test::random_trajectory(rng, 3, 1, 0);
  Rng draw(11);
  const int n = 20000;
  Vec sum = Vec::Zero(2), sq = Vec::Zero(2);
  for (int i = 0; i < n; ++i) {
    const Vec v = sample_conditional_inducing(model, traj, draw).v.row(0).transpose();
    sum += v;
    sq += v.cwiseProduct(v);
  }
  const Vec mean = sum / n;
  const Vec var = sq / n - mean.cwiseProduct(mean);
  for (int m = 0; m < 2; ++m) {
    CHECK(std::abs(mean[m]) < 3.0 / std::sqrt(n));
    CHECK(std::abs(var[m] - 1.0) < 3.0 * std::sqrt(2.0 / n));
  }
}

TEST_CASE("conditional draws concentrate when the data dominate") {
  Rng rng(12);
  const auto base = test::random_model(rng, {1, 0, 1, 3});
  const auto model = test::with_params(base, [](ModelParams& p) { p.Q = Vec::Constant(1, 1e-6); });
  Trajectory traj{Mat(201, 1), Mat(200, 0)};
  for (int t = 0; t <= 200; ++t) traj.states(t, 0) = -1.5 + 3.0 * t / 200.0;
  const auto s = collapsed_stats(model, traj);
  const double bound = std::sqrt(Eigen::SelfAdjointEigenSolver<Mat>(s.H[0]).eigenvalues().maxCoeff());
  CHECK(bound < 1e-2);
  Rng draw(13);
  const int n = 2000;
  Vec sq = Vec::Zero(3);
  for (int i = 0; i < n; ++i) {
    const Vec dv = sample_conditional_inducing(s, draw).v.row(0).transpose() - s.g[0];
    sq += dv.cwiseProduct(dv);
  }
  for (int m = 0; m < 3; ++m) CHECK(std::sqrt(sq[m] / n) <= 1.1 * bound);
}

TEST_CASE("conditional draws match the closed-form moments") {
  Rng rng(14);
  const auto model = test::random_model(rng, {1, 0, 1, 3});
  const auto traj = test::random_trajectory(rng, 8, 1, 0);
  const auto s = collapsed_stats(model, traj);
  const Vec& g = s.g[0];
  const Mat& H = s.H[0];
  Rng draw(15);
  const int n = 100000;
  std::vector<Vec> xs(n);
  Vec mean = Vec::Zero(3);
  for (int i = 0; i < n; ++i) {
    xs[i] = sample_conditional_inducing(s, draw).v.row(0).transpose();
    mean += xs[i];
  }
  mean /= n;
  Mat cov = Mat::Zero(3, 3);
  for (const auto& x : xs) cov += (x - mean) * (x - mean).transpose();
  cov /= n - 1;
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(mean[i] - g[i]) < 3.0 * std::sqrt(H(i, i) / n));
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt((H(i, i) * H(j, j) + H(i, j) * H(i, j)) / n);
      CHECK(std::abs(cov(i, j) - H(i, j)) < 3.0 * se);
    }
  }
}

TEST_CASE("conditional draws are deterministic in the seed") {
  Rng rng(16);
  const auto model = test::random_model(rng, {2, 0, 1, 3});
  const auto traj = test::random_trajectory(rng, 4, 2, 0);
  Rng a(5), b(5);
  CHECK(sample_conditional_inducing(model, traj, a).v == sample_conditional_inducing(model, traj, b).v);
}

TEST_CASE("prior term contributes -v to the v gradient") {
  Rng rng(17);
  const auto model = flat_kernel(test::random_model(rng, {2, 0, 1, 4}));
  const auto traj = test::random_trajectory(rng, 3, 2, 0);
  const Mat y = observe(rng, model, traj);
  const auto v = test::random_inducing(rng, model);
  const auto g = grad(Objective::joint, model, traj, &v, y, kInducing);
  CHECK((g.v + v.v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("collapsed state gradient with a vanishing kernel matches the random-walk formula") {
  Rng rng(18);
  const auto model = flat_kernel(test::random_model(rng, {1, 0, 1, 3}));
  const auto& p = model.params();
  const int T = 5;
  const auto traj = test::random_trajectory(rng, T, 1, 0);
  const Mat y = observe(rng, model, traj);
  const auto g = grad(Objective::collapsed, model, traj, nullptr, y, kStates);
  const auto& x = traj.states;
  const double Q = p.Q[0], R = p.R[0], c = p.C(0, 0);
  for (int t = 0; t <= T; ++t) {
    double expected = 0.0;
    if (t == 0) expected -= (x(0, 0) - p.x0_mean[0]) / p.x0_var[0];
    if (t >= 1) {
      expected -= (x(t, 0) - x(t - 1, 0)) / Q;
      expected += c * (y(t - 1, 0) - c * x(t, 0) - p.d[0]) / R;
    }
    if (t < T) expected += (x(t + 1, 0) - x(t, 0)) / Q;
    CHECK(g.states(t, 0) == Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(19);
  const std::vector<test::ModelShape> shapes{{2, 0, 1, 3}, {2, 1, 2, 3}, {1, 0, 1, 2}};
  for (const auto& shape : shapes) {
    for (int rep = 0; rep < 2; ++rep) {
      const auto pt = test::random_point(rng, shape, 4);
      const auto model = GpssmModel(pt.params);
      const Mat y = observe(rng, model, pt.traj);
      for (const Objective o : {Objective::joint, Objective::collapsed}) {
        for (const auto f : test::all_fields()) {
          if (o == Objective::collapsed && f == test::Field::v) continue;
          const auto c = test::check_field(o, pt, y, f);
          INFO("objective " << (o == Objective::joint ? "joint" : "collapsed") << ", field "
                            << test::field_name(f) << ", index " << c.worst_index);
          CHECK(c.max_error <= 1e-4);
        }
      }
    }
  }
}

TEST_CASE("evaluate agrees with the value functions and omits unrequested groups") {
  Rng rng(20);
  const auto model = test::random_model(rng, {2, 1, 1, 3});
  const auto traj = test::random_trajectory(rng, 4, 2, 1);
  const Mat y = observe(rng, model, traj);
  const auto v = test::random_inducing(rng, model);
  const auto joint = evaluate(Objective::joint, model, traj, &v, y, kStates);
  CHECK(joint.value == log_q_joint(model, traj, v, y));
  CHECK(joint.grad.states.rows() == 5);
  CHECK(joint.grad.v.size() == 0);
  CHECK(joint.grad.Z.size() == 0);
  const auto collapsed = evaluate(Objective::collapsed, model, traj, nullptr, y, kAll);
  CHECK(collapsed.value == Approx(log_q_collapsed(model, traj, y)).epsilon(1e-14));
  CHECK(collapsed.grad.v.size() == 0);
  CHECK_THROWS_AS(evaluate(Objective::joint, model, traj, nullptr, y, kStates), UsageError);
}

TEST_CASE("train_loglik is the one-step predictive density") {
  Rng rng(21);
  const auto model = test::random_model(rng, {2, 0, 2, 3});
  const auto& p = model.params();
  const auto traj = test::random_trajectory(rng, 5, 2, 0);
  const Mat y = observe(rng, model, traj);
  const auto v = test::random_inducing(rng, model);
  double expected = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const auto pred = transition_predictive(model, traj.states.row(t - 1).transpose(), Vec(0), v);
    const Mat S = p.C * pred.var.asDiagonal() * p.C.transpose() + Mat(p.R.asDiagonal());
    expected += log_mvn_density(y.row(t - 1).transpose(), p.C * pred.mean + p.d, S);
  }
  CHECK(train_loglik(model, traj, v, y) == Approx(expected).epsilon(1e-12));
  CHECK(evaluate(Objective::joint, model, traj, &v, y, 0u).train_loglik == Approx(expected).epsilon(1e-12));

  const auto s = collapsed_stats(model, traj);
  WhitenedInducing mean_v{Mat(2, 3)};
  for (int d = 0; d < 2; ++d) mean_v.v.row(d) = s.g[d].transpose();
  CHECK(evaluate(Objective::collapsed, model, traj, nullptr, y, 0u).train_loglik ==
        Approx(train_loglik(model, traj, mean_v, y)).epsilon(1e-12));
}

TEST_CASE("hyper prior values") {
  Rng rng(22);
  const auto base = test::random_model(rng, {2, 0, 3, 2});
  const auto zero = test::with_params(base, [](ModelParams& p) {
    p.C.setZero();
    p.d.setZero();
    p.R.setOnes();
    p.Q.setOnes();
  });
  const int n = 3 * 2 + 3 + 3 + 2;
  CHECK(log_hyper_prior(zero) == Approx(-0.5 * n * kLog2Pi).epsilon(1e-14));
  const auto one = test::with_params(zero, [](ModelParams& p) { p.d[1] = 1.0; });
  CHECK(log_hyper_prior(one) == Approx(-0.5 * n * kLog2Pi - 0.5).epsilon(1e-14));

  for (int rep = 0; rep < 5; ++rep) {
    const auto model = test::random_model(rng, {2, 1, 2, 3});
    const auto& p = model.params();
    double expected = 0.0;
    for (Eigen::Index i = 0; i < p.C.size(); ++i) expected += oracle::log_normal(p.C.data()[i], 0, 1);
    for (int i = 0; i < 2; ++i) {
      expected += oracle::log_normal(p.d[i], 0, 1);
      expected += oracle::log_normal(0.5 * std::log(p.R[i]), 0, 1);
      expected += oracle::log_normal(std::log(p.Q[i]), 0, 1);
    }
    CHECK(log_hyper_prior(model) == Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("hyper prior gradient matches central differences") {
  Rng rng(23);
  const auto pt = test::random_point(rng, {2, 0, 2, 3}, 3);
  const GpssmModel model(pt.params);
  GradientBundle g;
  add_log_hyper_prior_grad(model, g);
  for (const auto f : {test::Field::C, test::Field::d, test::Field::log_R, test::Field::log_Q}) {
    const Vec numeric = test::central_difference(
        [&](const Vec& x) {
          auto moved = pt;
          test::set_field(moved, f, x);
          return log_hyper_prior(GpssmModel(moved.params));
        },
        test::get_field(pt, f));
    const Vec analytic = test::analytic_field(g, f);
    REQUIRE(analytic.size() == numeric.size());
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
      CHECK(test::gradient_error(analytic[i], numeric[i]) <= 1e-6);
    }
  }
}

TEST_CASE("trace penalty terms are never positive") {
  Rng rng(24);
  for (int rep = 0; rep < 20; ++rep) {
    const auto model = test::random_model(rng, {1, 0, 1, 3});
    const auto traj = test::random_trajectory(rng, 4, 1, 0, 2.0);
    const Mat y = observe(rng, model, traj);
    const auto v = test::random_inducing(rng, model);
    // The joint target without the penalty is an upper bound.
    double no_penalty = log_std_normal(v.v);
    const auto& p = model.params();
    no_penalty += oracle::log_normal(traj.states(0, 0), p.x0_mean[0], p.x0_var[0]);
    for (int t = 1; t <= 4; ++t) {
      const auto pred = transition_predictive(model, traj.states.row(t - 1).transpose(), Vec(0), v);
      no_penalty += oracle::log_normal(traj.states(t, 0), pred.mean[0], p.Q[0]);
      no_penalty += log_likelihood_obs(model, traj.states.row(t).transpose(), y.row(t - 1).transpose());
    }
    CHECK(log_q_joint(model, traj, v, y) <= no_penalty + 1e-12);
  }
}

TEST_CASE("non-finite inputs raise numerical errors with an index") {
  Rng rng(25);
  const auto model = test::random_model(rng, {1, 0, 1, 3});
  const auto traj = test::random_trajectory(rng, 4, 1, 0);
  Mat y = observe(rng, model, traj);
  y(2, 0) = std::numeric_limits<double>::infinity();
  const auto v = test::random_inducing(rng, model);
  try {
    log_q_joint(model, traj, v, y);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.index() == 3);
  }
  CHECK_THROWS_AS(log_q_collapsed(model, traj, y), NumericalError);
  CHECK_THROWS_AS(evaluate(Objective::joint, model, traj, &v, y, kAll), NumericalError);
}
