#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ffvd/data.hpp"
#include "ffvd/error.hpp"
#include "ffvd/io.hpp"
#include "ffvd/predict.hpp"
#include "support.hpp"

using namespace ffvd;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ffvd_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

/// Furnace-like file: one observation column and one control column.
fs::path furnace_like(int rows) {
  Rng rng(42);
  std::string text = "y0,a0\n";
  for (int t = 0; t < rows; ++t) {
    text += io::format_double(test::uniform(rng, -2, 2)) + "," +
            io::format_double(test::uniform(rng, 0, 1)) + "\n";
  }
  const auto path = scratch("furnace.csv");
  write_text(path, text);
  return path;
}

}  // namespace

TEST_CASE("synthetic data uses the documented settings") {
  const auto s = generate_synthetic(1);
  const auto& p = s.truth.model.params();
  CHECK(p.kernels[0].signal_variance == 2.0);
  CHECK(p.kernels[0].lengthscales[0] == 0.5);
  CHECK(p.Q[0] == 0.01);
  CHECK(p.R[0] == 0.01);
  CHECK(s.truth.model.num_inducing() == 20);
  CHECK(s.dataset.train_len == 120);
  CHECK(s.dataset.d_y() == 1);
  CHECK(s.dataset.d_a() == 0);
  CHECK(s.dataset.T() == 150);
  CHECK(s.truth.trajectory.T() == 150);
  CHECK(p.C(0, 0) == 1.0);
  CHECK(p.d[0] == 0.0);
}

TEST_CASE("synthetic inducing inputs are evenly spaced over [-2, 2]") {
  const auto s = generate_synthetic(2);
  const Mat& Z = s.truth.model.Z();
  CHECK(Z(0, 0) == -2.0);
  CHECK(Z(19, 0) == 2.0);
  for (int i = 1; i < 20; ++i) CHECK(Z(i, 0) - Z(i - 1, 0) == Approx(0.21053).epsilon(1e-5));
  CHECK(Z(1, 0) - Z(0, 0) == Approx(4.0 / 19.0).epsilon(1e-12));
}

TEST_CASE("synthetic data is seed-deterministic") {
  const auto a = generate_synthetic(7), b = generate_synthetic(7), c = generate_synthetic(8);
  CHECK(a.dataset.y == b.dataset.y);
  CHECK(a.truth.v.v == b.truth.v.v);
  CHECK(a.truth.trajectory.states == b.truth.trajectory.states);
  CHECK(a.dataset.y != c.dataset.y);
}

TEST_CASE("synthetic observations follow the latent states") {
  const auto s = generate_synthetic(3);
  const Mat resid = s.dataset.y - s.truth.trajectory.states.bottomRows(150);
  // R = 0.01: residuals are N(0, 0.01).
  CHECK(std::abs(resid.mean()) < 0.03);
  CHECK(std::sqrt(resid.squaredNorm() / 150) == Approx(0.1).epsilon(0.2));
  const Vec x = Vec::Constant(1, 0.3);
  CHECK(s.truth.transition_mean(x)[0] ==
        Approx(transition_predictive(s.truth.model, x, Vec(0), s.truth.v).mean[0]));
}

TEST_CASE("load_csv reads a furnace-format file") {
  const auto path = furnace_like(296);
  const auto data = load_csv(path, 1, 1, 150);
  CHECK(data.T() == 296);
  CHECK(data.train_len == 150);
  CHECK(data.test_len() == 146);
  CHECK(data.train_len + data.test_len() == data.T());
  CHECK(data.y_train().rows() == 150);
  CHECK(data.name == "furnace");
}

TEST_CASE("load_csv rejects a training length beyond the data") {
  const auto path = furnace_like(296);
  CHECK_NOTHROW(load_csv(path, 1, 1, 296));
  CHECK_THROWS_AS(load_csv(path, 1, 1, 297), DataError);
  CHECK_THROWS_AS(load_csv(path, 1, 1, 0), DataError);
}

TEST_CASE("load_csv names the row and column of a bad cell") {
  const auto path = scratch("nan.csv");
  write_text(path, "y0,a0\n1.0,2.0\n3.0,4.0\n5.0,nan\n");
  try {
    load_csv(path, 1, 1, 2);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("row 3") != std::string::npos);
    CHECK(what.find("column 1") != std::string::npos);
  }
  write_text(path, "y0,a0\n1.0,abc\n");
  CHECK_THROWS_AS(load_csv(path, 1, 1, 1), DataError);
  write_text(path, "y0,a0\n1.0\n");
  CHECK_THROWS_AS(load_csv(path, 1, 1, 1), DataError);
}

TEST_CASE("load_csv requires the named columns") {
  const auto path = scratch("cols.csv");
  write_text(path, "a0,y0\n1,2\n3,4\n");
  const auto data = load_csv(path, 1, 1, 2);
  CHECK(data.y(0, 0) == 2.0);
  CHECK(data.a(1, 0) == 3.0);
  CHECK_THROWS_AS(load_csv(path, 2, 1, 2), DataError);
  CHECK_THROWS_AS(load_csv(path, 1, 2, 2), DataError);
  CHECK_THROWS_AS(load_csv(scratch("missing.csv"), 1, 0, 1), DataError);
}

TEST_CASE("shifted controls move down one row") {
  const auto path = scratch("shift.csv");
  write_text(path, "y0,a0\n1,10\n2,20\n3,30\n");
  const auto plain = load_csv(path, 1, 1, 3);
  const auto shifted = load_csv(path, 1, 1, 3, true);
  CHECK(plain.a.col(0) == (Vec(3) << 10, 20, 30).finished());
  CHECK(shifted.a.col(0) == (Vec(3) << 10, 10, 20).finished());
  CHECK(shifted.y == plain.y);
}

TEST_CASE("write_csv and load_csv round-trip exactly") {
  Rng rng(5);
  Dataset data;
  data.y = test::random_matrix(rng, 25, 2);
  data.a = test::random_matrix(rng, 25, 1);
  data.train_len = 20;
  const auto path = scratch("roundtrip.csv");
  write_csv(data, path);
  const auto back = load_csv(path, 2, 1, 20);
  CHECK(back.y == data.y);
  CHECK(back.a == data.a);
}

TEST_CASE("standardize uses training-block statistics") {
  Rng rng(6);
  Dataset data;
  data.y = (test::random_matrix(rng, 80, 2) * 3.0).array() + 5.0;
  data.a = (test::random_matrix(rng, 80, 1) * 0.2).array() - 1.0;
  data.train_len = 60;
  const auto s = standardize(data);
  const Mat yt = s.y_train(), at = s.a_train();
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(yt.col(j).mean()) <= 1e-12);
    CHECK(std::sqrt((yt.col(j).array() - yt.col(j).mean()).square().mean()) == Approx(1.0).epsilon(1e-12));
  }
  CHECK(std::abs(at.col(0).mean()) <= 1e-12);
  CHECK(s.stats.applied);
  CHECK(s.stats.y_mean[0] == Approx(data.y_train().col(0).mean()));

  const auto twice = standardize(s);
  CHECK((twice.y - s.y).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((twice.stats.y_mean - s.stats.y_mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((twice.stats.y_std - s.stats.y_std).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("standardize rejects a constant training column") {
  Dataset data;
  data.y = Mat::Ones(10, 1);
  data.a = Mat(10, 0);
  data.train_len = 8;
  CHECK_THROWS_AS(standardize(data), DataError);
  Rng rng(7);
  data.y = test::random_matrix(rng, 10, 1);
  data.a = Mat::Constant(10, 1, 0.5);
  CHECK_THROWS_AS(standardize(data), DataError);
}

TEST_CASE("unstandardize_predictions inverts the affine map") {
  PredictiveSummary s{(Mat(2, 1) << 0.5, -1.0).finished(), (Mat(2, 1) << 1.0, 2.0).finished()};
  Standardization identity;
  identity.applied = true;
  identity.y_mean = Vec::Zero(1);
  identity.y_std = Vec::Ones(1);
  const auto same = unstandardize_predictions(s, identity);
  CHECK(same.mean == s.mean);
  CHECK(same.std == s.std);

  Standardization st = identity;
  st.y_mean[0] = 3.0;
  st.y_std[0] = 2.0;
  const auto out = unstandardize_predictions(s, st);
  CHECK(out.mean(0, 0) == 2.0 * 0.5 + 3.0);
  CHECK(out.mean(1, 0) == 2.0 * -1.0 + 3.0);
  CHECK(out.std(1, 0) == 4.0);
}

TEST_CASE("standardize then unstandardize round-trips") {
  Rng rng(8);
  Dataset data;
  data.y = (test::random_matrix(rng, 40, 2) * 7.0).array() + 2.0;
  data.a = Mat(40, 0);
  data.train_len = 30;
  const auto s = standardize(data);
  const auto back = unstandardize_predictions({s.y, Mat::Ones(40, 2)}, s.stats);
  CHECK((back.mean - data.y).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((back.std.row(0).transpose() - s.stats.y_std).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("dataset validation") {
  Dataset data;
  data.y = Mat::Zero(5, 1);
  data.a = Mat::Zero(4, 1);
  data.train_len = 3;
  CHECK_THROWS_AS(data.validate(), ShapeError);
  data.a = Mat::Zero(5, 1);
  CHECK_NOTHROW(data.validate());
  data.y(2, 0) = std::nan("");
  CHECK_THROWS_AS(data.validate(), DataError);
}
