#include "ffvd/checkpoint.hpp"

#include <map>
#include <sstream>
#include <string>

#include "ffvd/error.hpp"
#include "ffvd/io.hpp"

namespace ffvd {
namespace {

std::string join(const double* data, Eigen::Index n) {
  std::string out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += io::format_double(data[i]);
  }
  return out;
}

std::string row_major(const Mat& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = m;
  return join(r.data(), r.size());
}

class Fields {
 public:
  explicit Fields(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    long row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto colon = line.find(':');
      if (colon == std::string::npos) {
        throw DataError("checkpoint line " + std::to_string(row) + " is not 'key: value'");
      }
      const std::string key = line.substr(0, colon);
      if (!values_.emplace(key, line.substr(colon + 1)).second) {
        throw DataError("checkpoint has duplicate key '" + key + "'");
      }
    }
  }

  std::vector<double> numbers(const std::string& key, std::size_t expected) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw DataError("checkpoint is missing '" + key + "'");
    std::istringstream in(it->second);
    std::vector<double> out;
    std::string token;
    while (in >> token) out.push_back(io::parse_double(token, 0, static_cast<long>(out.size())));
    if (out.size() != expected) {
      throw DataError("checkpoint field '" + key + "' has " + std::to_string(out.size()) +
                      " values, expected " + std::to_string(expected));
    }
    return out;
  }

  int integer(const std::string& key) const {
    const double v = numbers(key, 1)[0];
    if (v != static_cast<int>(v)) throw DataError("checkpoint field '" + key + "' must be an integer");
    return static_cast<int>(v);
  }

  Vec vec(const std::string& key, Eigen::Index n) const {
    const auto v = numbers(key, static_cast<std::size_t>(n));
    return Eigen::Map<const Vec>(v.data(), n);
  }

  Mat mat(const std::string& key, Eigen::Index rows, Eigen::Index cols) const {
    const auto v = numbers(key, static_cast<std::size_t>(rows * cols));
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), rows, cols);
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace

std::string serialize_model(const GpssmModel& model) {
  const auto& p = model.params();
  std::ostringstream out;
  out << "format_version: " << kCheckpointFormatVersion << '\n'
      << "d_x: " << p.d_x << '\n'
      << "d_a: " << p.d_a << '\n'
      << "d_y: " << p.d_y << '\n'
      << "M: " << model.num_inducing() << '\n';
  for (int d = 0; d < p.d_x; ++d) {
    out << "kernel." << d << ".signal_variance: " << io::format_double(p.kernels[d].signal_variance)
        << '\n'
        << "kernel." << d << ".lengthscales: "
        << join(p.kernels[d].lengthscales.data(), p.kernels[d].lengthscales.size()) << '\n';
  }
  out << "Z: " << row_major(p.Z) << '\n'
      << "Q: " << join(p.Q.data(), p.Q.size()) << '\n'
      << "C: " << row_major(p.C) << '\n'
      << "d: " << join(p.d.data(), p.d.size()) << '\n'
      << "R: " << join(p.R.data(), p.R.size()) << '\n'
      << "x0_mean: " << join(p.x0_mean.data(), p.x0_mean.size()) << '\n'
      << "x0_var: " << join(p.x0_var.data(), p.x0_var.size()) << '\n';
  return out.str();
}

GpssmModel deserialize_model(const std::string& text) {
  const Fields f(text);
  const int version = f.integer("format_version");
  if (version != kCheckpointFormatVersion) {
    throw DataError("unsupported checkpoint format_version " + std::to_string(version));
  }
  ModelParams p;
  p.d_x = f.integer("d_x");
  p.d_a = f.integer("d_a");
  p.d_y = f.integer("d_y");
  const int M = f.integer("M");
  if (p.d_x < 1 || p.d_a < 0 || p.d_y < 1 || M < 1) throw DataError("checkpoint dimensions are invalid");
  const int D = p.d_x + p.d_a;
  for (int d = 0; d < p.d_x; ++d) {
    const std::string prefix = "kernel." + std::to_string(d) + ".";
    p.kernels.push_back({f.numbers(prefix + "signal_variance", 1)[0], f.vec(prefix + "lengthscales", D)});
  }
  p.Z = f.mat("Z", M, D);
  p.Q = f.vec("Q", p.d_x);
  p.C = f.mat("C", p.d_y, p.d_x);
  p.d = f.vec("d", p.d_y);
  p.R = f.vec("R", p.d_y);
  p.x0_mean = f.vec("x0_mean", p.d_x);
  p.x0_var = f.vec("x0_var", p.d_x);
  return GpssmModel(std::move(p));
}

void save_checkpoint(const GpssmModel& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_model(model));
}

GpssmModel load_checkpoint(const std::filesystem::path& path) {
  return deserialize_model(io::read_file(path));
}

}  // namespace ffvd
