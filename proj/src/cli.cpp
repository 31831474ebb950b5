#include "ffvd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "ffvd/checkpoint.hpp"
#include "ffvd/data.hpp"
#include "ffvd/error.hpp"
#include "ffvd/fit.hpp"
#include "ffvd/io.hpp"
#include "ffvd/normality.hpp"
#include "ffvd/parallel.hpp"
#include "ffvd/predict.hpp"

namespace ffvd::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr int kConfigFormatVersion = 1;

/// Everything needed to reproduce a fit.
struct RunConfig {
  std::string variant = "ffvd-c-m";
  std::string data;
  int train_len = -1;
  bool standardize = true;
  bool shift_controls = false;
  int d_x = 4;
  int num_inducing = 100;
  std::uint64_t seed = 0;
  long iters = 50000;
  long burn_in = -1;  ///< -1 resolves to iters / 2
  long n_samples = 100;
  double step_size = 0.01;
  double step_decay = 0.05;
  double friction = 1.0;
  double mass_states = 1.0;
  double mass_inducing = 1.0;
  double mass_hypers = 1.0;
  int n_particles = 32;
  bool optimize_hypers = true;
  bool sample_hypers = false;
  double lr0 = 0.01;
  double lr_decay = 0.05;
  int iters_per_epoch = 1000;

  long resolved_burn_in() const { return burn_in >= 0 ? burn_in : iters / 2; }
  long thin() const {
    const long kept = iters - resolved_burn_in();
    if (n_samples < 1 || kept < n_samples) {
      throw UsageError("need 1 <= n-samples <= iters - burn-in (n-samples = " +
                       std::to_string(n_samples) + ", post-burn-in iterations = " +
                       std::to_string(kept) + ")");
    }
    return kept / n_samples;
  }
};

json to_json(const RunConfig& c, const Dataset& data) {
  json j;
  j["format_version"] = kConfigFormatVersion;
  j["variant"] = c.variant;
  j["data"] = c.data;
  j["train_len"] = c.train_len;
  j["test_len"] = data.test_len();
  j["d_y"] = data.d_y();
  j["d_a"] = data.d_a();
  j["standardize"] = c.standardize;
  j["shift_controls"] = c.shift_controls;
  j["d_x"] = c.d_x;
  j["num_inducing"] = c.num_inducing;
  j["seed"] = c.seed;
  j["iters"] = c.iters;
  j["burn_in"] = c.resolved_burn_in();
  j["n_samples"] = c.n_samples;
  j["thin"] = c.thin();
  j["retained_draws"] = (c.iters - c.resolved_burn_in()) / c.thin();
  j["step_size"] = c.step_size;
  j["step_decay"] = c.step_decay;
  j["friction"] = c.friction;
  j["mass_states"] = c.mass_states;
  j["mass_inducing"] = c.mass_inducing;
  j["mass_hypers"] = c.mass_hypers;
  j["n_particles"] = c.n_particles;
  j["optimize_hypers"] = c.optimize_hypers;
  j["sample_hypers"] = c.sample_hypers;
  j["adam"] = {{"lr0", c.lr0},
               {"decay", c.lr_decay},
               {"iters_per_epoch", c.iters_per_epoch},
               {"schedule", "one step per sampler iteration"}};
  if (data.stats.applied) {
    const auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    j["standardization"] = {{"y_mean", vec(data.stats.y_mean)},
                            {"y_std", vec(data.stats.y_std)},
                            {"a_mean", vec(data.stats.a_mean)},
                            {"a_std", vec(data.stats.a_std)}};
  }
  return j;
}

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig from_json(const json& j) {
  if (j.value("format_version", kConfigFormatVersion) != kConfigFormatVersion) {
    throw DataError("unsupported config format_version");
  }
  RunConfig c;
  read_field(j, "variant", c.variant);
  read_field(j, "data", c.data);
  read_field(j, "train_len", c.train_len);
  read_field(j, "standardize", c.standardize);
  read_field(j, "shift_controls", c.shift_controls);
  read_field(j, "d_x", c.d_x);
  read_field(j, "num_inducing", c.num_inducing);
  read_field(j, "seed", c.seed);
  read_field(j, "iters", c.iters);
  read_field(j, "burn_in", c.burn_in);
  read_field(j, "n_samples", c.n_samples);
  read_field(j, "step_size", c.step_size);
  read_field(j, "step_decay", c.step_decay);
  read_field(j, "friction", c.friction);
  read_field(j, "mass_states", c.mass_states);
  read_field(j, "mass_inducing", c.mass_inducing);
  read_field(j, "mass_hypers", c.mass_hypers);
  read_field(j, "n_particles", c.n_particles);
  read_field(j, "optimize_hypers", c.optimize_hypers);
  read_field(j, "sample_hypers", c.sample_hypers);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    read_field(a, "lr0", c.lr0);
    read_field(a, "decay", c.lr_decay);
    read_field(a, "iters_per_epoch", c.iters_per_epoch);
  }
  return c;
}

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

/// Count y<i> and a<i> columns in the header of a dataset file.
std::pair<int, int> detect_columns(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  int d_y = 0, d_a = 0;
  for (const auto& cell : io::split_csv_line(header)) {
    if (cell.size() > 1 && cell[0] == 'y') ++d_y;
    if (cell.size() > 1 && cell[0] == 'a') ++d_a;
  }
  if (d_y == 0) throw DataError(path.string() + ": header has no y columns");
  return {d_y, d_a};
}

/// Load the dataset named by a run config, standardized when requested.
Dataset prepare_dataset(const RunConfig& c) {
  if (c.data.empty()) throw UsageError("--data is required");
  if (c.train_len < 1) throw UsageError("--train-len is required");
  const auto [d_y, d_a] = detect_columns(c.data);
  Dataset data = load_csv(c.data, d_y, d_a, c.train_len, c.shift_controls);
  if (c.train_len < 2) throw DataError("need at least two training observations");
  return c.standardize ? standardize(data) : data;
}

FitConfig to_fit_config(const RunConfig& c) {
  FitConfig f;
  f.variant = parse_variant(c.variant);
  f.sghmc.step_size = c.step_size;
  f.sghmc.step_decay = c.step_decay;
  f.sghmc.iters_per_epoch = c.iters_per_epoch;
  f.sghmc.friction = c.friction;
  f.sghmc.n_iters = c.iters;
  f.sghmc.burn_in = c.resolved_burn_in();
  f.sghmc.thin = c.thin();
  f.sghmc.mass_states = c.mass_states;
  f.sghmc.mass_inducing = c.mass_inducing;
  f.sghmc.mass_hypers = c.mass_hypers;
  f.sghmc.seed = c.seed;
  f.n_particles = c.n_particles;
  f.adam.lr0 = c.lr0;
  f.adam.decay = c.lr_decay;
  f.adam.iters_per_epoch = c.iters_per_epoch;
  f.optimize_hypers = c.optimize_hypers;
  f.sample_hypers = c.sample_hypers;
  f.init.d_x = c.d_x;
  f.init.num_inducing = c.num_inducing;
  f.init.seed = c.seed;
  return f;
}

/// Parse "a..b" or a single integer.
std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      const auto s = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return {s};
    }
    const std::string lo_s = text.substr(0, dots), hi_s = text.substr(dots + 2);
    const auto lo = std::stoull(lo_s, &used);
    if (used != lo_s.size()) throw std::invalid_argument(text);
    const auto hi = std::stoull(hi_s, &used);
    if (used != hi_s.size() || hi < lo) throw std::invalid_argument(text);
    std::vector<std::uint64_t> out;
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  } catch (const std::logic_error&) {
    throw UsageError("--seeds expects 'a..b' with a <= b, got '" + text + "'");
  }
}

fs::path seed_dir(const fs::path& base, std::uint64_t seed) {
  return base / ("seed_" + std::to_string(seed));
}

/// Run `job` for every seed on up to max_threads() workers; rethrows the first failure.
void for_each_seed(const std::vector<std::uint64_t>& seeds,
                   const std::function<void(std::uint64_t)>& job) {
  const int workers = std::max(1, std::min<int>(kernels::max_threads(), static_cast<int>(seeds.size())));
  if (workers == 1) {
    for (auto s : seeds) job(s);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < seeds.size(); i = next++) {
        try {
          job(seeds[i]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 0;
  std::string out;
  int train_len = 120;
  int test_len = 30;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.out.empty()) throw UsageError("--out is required");
  SyntheticSettings settings;
  settings.train_len = a.train_len;
  settings.test_len = a.test_len;
  const SyntheticData synth = generate_synthetic(a.seed, settings);
  const fs::path dir = a.out;
  ensure_dir(dir);
  write_csv(synth.dataset, dir / "data.csv");

  const Mat& X = synth.truth.trajectory.states;
  std::string states = "t,dim,value\n";
  for (Eigen::Index t = 0; t < X.rows(); ++t) {
    for (Eigen::Index d = 0; d < X.cols(); ++d) {
      states += std::to_string(t) + ',' + std::to_string(d) + ',' + io::format_double(X(t, d)) + '\n';
    }
  }
  io::write_file(dir / "truth_states.csv", states);

  const auto& m = synth.truth.model;
  const Mat u = unwhiten(m, synth.truth.v);
  const auto row = [](const Mat& r) {
    std::vector<double> v(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) v[i] = r.data()[i];
    return v;
  };
  json j;
  j["seed"] = a.seed;
  j["d_x"] = 1;
  j["d_a"] = 0;
  j["d_y"] = 1;
  j["signal_variance"] = settings.signal_variance;
  j["lengthscale"] = settings.lengthscale;
  j["process_variance"] = settings.process_variance;
  j["observation_variance"] = settings.observation_variance;
  j["num_inducing"] = settings.num_inducing;
  j["z_min"] = settings.z_min;
  j["z_max"] = settings.z_max;
  j["T"] = settings.train_len;
  j["train_len"] = settings.train_len;
  j["test_len"] = settings.test_len;
  j["inducing_inputs"] = row(m.Z());
  j["inducing_values"] = row(u);
  j["whitened_inducing"] = row(synth.truth.v.v);
  write_json(dir / "truth_config.json", j);
  out << "wrote " << (dir / "data.csv").string() << " (" << synth.dataset.T() << " rows, train_len "
      << settings.train_len << ")\n";
}

// ---------------------------------------------------------------------------

void fit_one(const RunConfig& c, const Dataset& data, const fs::path& dir, std::ostream* out,
             std::mutex& out_mutex) {
  const FitConfig fc = to_fit_config(c);
  const FitResult result = fit(data, fc);
  ensure_dir(dir);
  write_json(dir / "config.json", to_json(c, data));
  io::write_trace(result.trace, dir / "trace.csv");
  io::write_sample_states(result.store, dir / "samples_states.csv");
  io::write_sample_inducing(result.store, dir / "samples_inducing.csv");
  save_checkpoint(result.model, dir / "model.ckpt");
  if (out) {
    std::lock_guard lock(out_mutex);
    *out << c.variant << " seed " << c.seed << ": " << result.store.draws.size()
         << " draws, final train log-likelihood "
         << io::format_double(result.trace.empty() ? 0.0 : result.trace.back().train_loglik)
         << " -> " << dir.string() << "\n";
  }
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string run;
  int horizon = 30;
  std::uint64_t seed = 0;
  int rollouts = 1;
  std::string seeds;
};

void predict_one(const fs::path& dir, const PredictArgs& a, std::ostream& out) {
  const RunConfig c = from_json(read_json(dir / "config.json"));
  const Dataset data = prepare_dataset(c);
  const GpssmModel model = load_checkpoint(dir / "model.ckpt");
  const SampleStore store =
      io::read_samples(dir / "samples_states.csv", dir / "samples_inducing.csv");
  if (model.d_y() != data.d_y() || model.d_a() != data.d_a()) {
    throw DataError(dir.string() + ": checkpoint does not match the dataset");
  }
  Mat controls(a.horizon, data.d_a());
  if (data.d_a() > 0) {
    if (data.train_len + a.horizon > data.T()) {
      throw DataError("horizon " + std::to_string(a.horizon) + " needs controls beyond the end of the data");
    }
    controls = data.a.middleRows(data.train_len, a.horizon);
  }
  RolloutOptions options;
  options.seed = a.seed;
  options.rollouts_per_sample = a.rollouts;
  const PredictiveSummary summary =
      unstandardize_predictions(rollout_predict(model, store, controls, a.horizon, options), data.stats);
  io::write_predictions(summary, data.train_len, dir / "pred.csv");
  out << "wrote " << (dir / "pred.csv").string() << " (" << a.horizon << " steps)\n";
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string run;
  std::string pred;
  std::string truth;
  std::string seeds;
};

struct EvalResult {
  double rmse;
  double persistence_rmse;
  int horizon;
  std::string variant;
  std::optional<std::uint64_t> seed;
};

/// Raw-scale observations for the rows named by a prediction file.
EvalResult evaluate_predictions(const io::PredictionFile& pred, const Mat& y, int train_len) {
  const int steps = static_cast<int>(pred.mean.rows());
  if (pred.first_row < 1 || pred.first_row + steps > y.rows() || pred.mean.cols() != y.cols()) {
    throw DataError("predictions for rows [" + std::to_string(pred.first_row) + ", " +
                    std::to_string(pred.first_row + steps) + ") do not align with " +
                    std::to_string(y.rows()) + "x" + std::to_string(y.cols()) + " ground truth");
  }
  const Mat truth = y.middleRows(pred.first_row, steps);
  const Mat last = y.row(std::min<int>(train_len, pred.first_row) - 1).replicate(steps, 1);
  return {rmse(pred.mean, truth), rmse(last, truth), steps, "", std::nullopt};
}

EvalResult eval_run(const fs::path& dir) {
  const RunConfig c = from_json(read_json(dir / "config.json"));
  const auto [d_y, d_a] = detect_columns(c.data);
  const Dataset raw = load_csv(c.data, d_y, d_a, c.train_len, c.shift_controls);
  EvalResult r = evaluate_predictions(io::read_predictions(dir / "pred.csv"), raw.y, raw.train_len);
  r.variant = c.variant;
  r.seed = c.seed;
  return r;
}

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

json metrics_json(const EvalResult& r) {
  json j;
  j["rmse"] = r.rmse;
  j["persistence_rmse"] = r.persistence_rmse;
  j["horizon"] = r.horizon;
  j["variant"] = r.variant;
  if (r.seed) j["seed"] = *r.seed; else j["seed"] = nullptr;
  return j;
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (!a.seeds.empty()) {
    if (a.run.empty()) throw UsageError("--seeds needs --run");
    const auto seeds = parse_seed_range(a.seeds);
    std::vector<double> values;
    json per_seed = json::array();
    std::string variant;
    int horizon = 0;
    for (auto s : seeds) {
      const EvalResult r = eval_run(seed_dir(a.run, s));
      values.push_back(r.rmse);
      per_seed.push_back(metrics_json(r));
      variant = r.variant;
      horizon = r.horizon;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    json j;
    j["rmse"] = mean;
    j["rmse_std"] = sd;
    j["horizon"] = horizon;
    j["variant"] = variant;
    j["seeds"] = seeds;
    j["per_seed"] = per_seed;
    write_json(fs::path(a.run) / "metrics.json", j);
    out << fixed6(mean) << " ± " << fixed6(sd) << "\n";
    return;
  }

  EvalResult r;
  fs::path metrics_dir;
  if (!a.run.empty()) {
    r = eval_run(a.run);
    metrics_dir = a.run;
  } else {
    if (a.pred.empty() || a.truth.empty()) throw UsageError("eval needs --run, or --pred with --truth");
    const auto [d_y, d_a] = detect_columns(a.truth);
    const Dataset truth = load_csv(a.truth, d_y, d_a, 1);
    const auto pred = io::read_predictions(a.pred);
    r = evaluate_predictions(pred, truth.y, pred.first_row);
    metrics_dir = fs::path(a.pred).parent_path();
  }
  write_json(metrics_dir / "metrics.json", metrics_json(r));
  out << fixed6(r.rmse) << "\n";
}

// ---------------------------------------------------------------------------

struct NormArgs {
  std::string run;
  std::string states;
  std::string inducing;
  std::string out;
};

void cmd_normtest(const NormArgs& a, std::ostream& out) {
  fs::path states = a.states, inducing = a.inducing, dest = a.out;
  if (!a.run.empty()) {
    if (states.empty()) states = fs::path(a.run) / "samples_states.csv";
    if (inducing.empty()) inducing = fs::path(a.run) / "samples_inducing.csv";
    if (dest.empty()) dest = fs::path(a.run) / "normality.csv";
  }
  if (states.empty() || inducing.empty()) {
    throw UsageError("normtest needs --run, or --states with --inducing");
  }
  if (dest.empty()) dest = states.parent_path() / "normality.csv";
  const NormalityReport report = normality_sweep(io::read_samples(states, inducing));
  io::write_normality(report, dest);
  out << "state rejection fraction: " << fixed6(report.state_rejection_fraction) << "\n"
      << "inducing rejection fraction: " << fixed6(report.inducing_rejection_fraction) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Free-form variational inference for Gaussian-process state-space models", "ffvd"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate the one-dimensional synthetic dataset");
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--out", synth.out, "Output directory");
  s->add_option("--train-len", synth.train_len, "Training length")->check(CLI::PositiveNumber);
  s->add_option("--test-len", synth.test_len, "Held-out length")->check(CLI::NonNegativeNumber);

  RunConfig fitc;
  std::string fit_out, fit_config, fit_seeds;
  bool no_standardize = false, fix_hypers = false;
  auto* f = app.add_subcommand("fit", "Fit a model and write a run directory");
  auto* o_variant = f->add_option("--variant", fitc.variant, "ffvd-m, ffvd-c-m or ffvd-p");
  auto* o_data = f->add_option("--data", fitc.data, "Dataset CSV");
  auto* o_train = f->add_option("--train-len", fitc.train_len, "Number of training rows");
  auto* o_iters = f->add_option("--iters", fitc.iters, "Sampler iterations");
  auto* o_seed = f->add_option("--seed", fitc.seed, "Random seed");
  f->add_option("--out", fit_out, "Run directory")->required();
  auto* o_dx = f->add_option("--dx", fitc.d_x, "Latent dimension");
  auto* o_M = f->add_option("--M", fitc.num_inducing, "Number of inducing points");
  auto* o_ns = f->add_option("--n-samples", fitc.n_samples, "Retained posterior draws");
  auto* o_burn = f->add_option("--burn-in", fitc.burn_in, "Burn-in iterations (default iters/2)");
  auto* o_step = f->add_option("--step-size", fitc.step_size, "SGHMC step size");
  auto* o_sdec = f->add_option("--step-decay", fitc.step_decay, "SGHMC step-size decay per epoch");
  auto* o_fric = f->add_option("--friction", fitc.friction, "SGHMC friction");
  auto* o_mi = f->add_option("--mass-inducing", fitc.mass_inducing, "SGHMC mass of the inducing block");
  auto* o_np = f->add_option("--particles", fitc.n_particles, "Particles per PMCMC sweep");
  auto* o_lr = f->add_option("--lr", fitc.lr0, "Initial Adam learning rate");
  auto* o_shift = f->add_flag("--shift-controls", fitc.shift_controls,
                              "Controls in a row drive the following transition");
  auto* o_nostd = f->add_flag("--no-standardize", no_standardize, "Fit on the raw scale");
  auto* o_fix = f->add_flag("--fix-hypers", fix_hypers, "Keep hyperparameters at their initial values");
  f->add_option("--config", fit_config, "Start from a config.json; explicit flags override it");
  f->add_option("--seeds", fit_seeds, "Seed range a..b, one run per seed in <out>/seed_<s>");

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Free-simulate predictions from a run directory");
  p->add_option("--run", pred.run, "Run directory")->required();
  p->add_option("--horizon", pred.horizon, "Prediction steps");
  p->add_option("--seed", pred.seed, "Random seed");
  p->add_option("--rollouts", pred.rollouts, "Rollouts per posterior sample")->check(CLI::PositiveNumber);
  p->add_option("--seeds", pred.seeds, "Predict for every <run>/seed_<s> in the range a..b");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "RMSE of predictions against ground truth");
  e->add_option("--run", ev.run, "Run directory");
  e->add_option("--pred", ev.pred, "Prediction CSV");
  e->add_option("--truth", ev.truth, "Dataset CSV holding the true observations");
  e->add_option("--seeds", ev.seeds, "Average over <run>/seed_<s> for s in a..b");

  NormArgs norm;
  auto* n = app.add_subcommand("normtest", "Normality tests on posterior sample marginals");
  n->add_option("--run", norm.run, "Run directory");
  n->add_option("--states", norm.states, "samples_states.csv");
  n->add_option("--inducing", norm.inducing, "samples_inducing.csv");
  n->add_option("--out", norm.out, "Output CSV (default next to the samples)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }

  try {
    if (s->parsed()) {
      cmd_synth(synth, out);
    } else if (f->parsed()) {
      RunConfig c = fitc;
      if (!fit_config.empty()) {
        // Config values are the base; explicitly given flags override them.
        c = from_json(read_json(fit_config));
        const auto take = [](CLI::Option* opt, auto& dst, const auto& src) {
          if (opt->count() > 0) dst = src;
        };
        take(o_variant, c.variant, fitc.variant);
        take(o_data, c.data, fitc.data);
        take(o_train, c.train_len, fitc.train_len);
        take(o_iters, c.iters, fitc.iters);
        take(o_seed, c.seed, fitc.seed);
        take(o_dx, c.d_x, fitc.d_x);
        take(o_M, c.num_inducing, fitc.num_inducing);
        take(o_ns, c.n_samples, fitc.n_samples);
        take(o_burn, c.burn_in, fitc.burn_in);
        take(o_step, c.step_size, fitc.step_size);
        take(o_sdec, c.step_decay, fitc.step_decay);
        take(o_fric, c.friction, fitc.friction);
        take(o_mi, c.mass_inducing, fitc.mass_inducing);
        take(o_np, c.n_particles, fitc.n_particles);
        take(o_lr, c.lr0, fitc.lr0);
        take(o_shift, c.shift_controls, fitc.shift_controls);
        if (o_iters->count() > 0 && o_burn->count() == 0) c.burn_in = -1;
      }
      if (o_nostd->count() > 0) c.standardize = false;
      if (o_fix->count() > 0) c.optimize_hypers = false;
      if (!c.data.empty()) c.data = fs::absolute(c.data).lexically_normal().string();
      parse_variant(c.variant);
      c.thin();
      const Dataset data = prepare_dataset(c);
      std::mutex out_mutex;
      if (fit_seeds.empty()) {
        fit_one(c, data, fit_out, &out, out_mutex);
      } else {
        for_each_seed(parse_seed_range(fit_seeds), [&](std::uint64_t seed) {
          RunConfig cs = c;
          cs.seed = seed;
          fit_one(cs, data, seed_dir(fit_out, seed), &out, out_mutex);
        });
      }
    } else if (p->parsed()) {
      if (pred.horizon < 1) throw UsageError("--horizon must be >= 1");
      if (pred.seeds.empty()) {
        predict_one(pred.run, pred, out);
      } else {
        for (auto seed : parse_seed_range(pred.seeds)) predict_one(seed_dir(pred.run, seed), pred, out);
      }
    } else if (e->parsed()) {
      cmd_eval(ev, out);
    } else if (n->parsed()) {
      cmd_normtest(norm, out);
    }
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return static_cast<int>(ex.kind());
  } catch (const json::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return static_cast<int>(ErrorKind::data);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return static_cast<int>(ErrorKind::data);
  }
  return 0;
}

}  // namespace ffvd::cli
