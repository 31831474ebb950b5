#include "ffvd/fit.hpp"

#include <string>

#include "ffvd/error.hpp"
#include "ffvd/objective.hpp"

namespace ffvd {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::ffvd_m: return "ffvd-m";
    case Variant::ffvd_c_m: return "ffvd-c-m";
    case Variant::ffvd_p: return "ffvd-p";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "ffvd-m") return Variant::ffvd_m;
  if (name == "ffvd-c-m") return Variant::ffvd_c_m;
  if (name == "ffvd-p") return Variant::ffvd_p;
  throw UsageError("unknown variant '" + std::string(name) +
                   "' (expected one of: ffvd-m, ffvd-c-m, ffvd-p)");
}

namespace {

bool retained(long i, const SghmcConfig& c) {
  return i > c.burn_in && (i - c.burn_in) % c.thin == 0;
}

/// Length of the kernel and Z block at the front of the packed hyperparameters.
Eigen::Index kernel_block_size(const GpssmModel& m) {
  const Eigen::Index dx = m.d_x(), D = m.input_dim();
  return dx + dx * D + m.num_inducing() * D;
}

/// Flat SGHMC position: [states (column-major) | v (column-major) | kernel and Z block].
struct Layout {
  int T, d_x, M;
  bool with_v;
  Eigen::Index n_hyper;

  Eigen::Index n_states() const { return static_cast<Eigen::Index>(T + 1) * d_x; }
  Eigen::Index n_v() const { return with_v ? static_cast<Eigen::Index>(d_x) * M : 0; }
  Eigen::Index size() const { return n_states() + n_v() + n_hyper; }

  Vec pack(const Trajectory& traj, const WhitenedInducing* v, const Vec& hyper) const {
    Vec pos(size());
    pos.head(n_states()) = Eigen::Map<const Vec>(traj.states.data(), n_states());
    if (with_v) pos.segment(n_states(), n_v()) = Eigen::Map<const Vec>(v->v.data(), n_v());
    if (n_hyper > 0) pos.tail(n_hyper) = hyper;
    return pos;
  }
  Mat states(const Vec& pos) const {
    return Eigen::Map<const Mat>(pos.data(), T + 1, d_x);
  }
  WhitenedInducing v(const Vec& pos) const {
    return {Eigen::Map<const Mat>(pos.data() + n_states(), d_x, M)};
  }
  Vec hyper(const Vec& pos) const { return pos.tail(n_hyper); }
};

GpssmModel with_kernel_block(const GpssmModel& model, const Vec& block) {
  Vec packed = pack_hypers(model);
  packed.head(block.size()) = block;
  return unpack_hypers(model, packed);
}

/// Adam step on the hyperparameters not held in the sampler state.
GpssmModel hyper_update(const GpssmModel& model, GradientBundle grad, bool sample_hypers,
                        Adam& adam) {
  add_log_hyper_prior_grad(model, grad);
  if (sample_hypers) {
    grad.log_signal_variance.resize(0);
    grad.log_lengthscales.resize(0, 0);
    grad.Z.resize(0, 0);
  }
  return adam_hyper_step(model, grad, adam);
}

unsigned hyper_groups(const FitConfig& config) {
  unsigned g = 0;
  if (config.optimize_hypers) g |= kHypers;
  if (config.sample_hypers) g |= kKernel | kInducingInputs;
  return g;
}

FitResult run_sghmc(const GpssmModel& model0, const Trajectory& init, const WhitenedInducing& v0,
                    const Mat& y, const FitConfig& config) {
  const bool joint = config.variant == Variant::ffvd_m;
  const auto& sc = config.sghmc;
  const Layout layout{init.T(), model0.d_x(), model0.num_inducing(), joint,
                      config.sample_hypers ? kernel_block_size(model0) : 0};
  const Mat controls = init.controls;
  const unsigned groups = kStates | (joint ? kInducing : 0u) | hyper_groups(config);

  GpssmModel current = model0;
  Evaluation last;
  const LogDensity target = [&](const Vec& pos, Vec& g) {
    const GpssmModel m =
        config.sample_hypers ? with_kernel_block(current, layout.hyper(pos)) : current;
    const Trajectory traj{layout.states(pos), controls};
    const WhitenedInducing v = joint ? layout.v(pos) : WhitenedInducing{};
    Evaluation ev = evaluate(joint ? Objective::joint : Objective::collapsed, m, traj,
                             joint ? &v : nullptr, y, groups);
    Vec hyper_grad;
    if (config.sample_hypers) hyper_grad = pack_hyper_gradient(m, ev.grad).head(layout.n_hyper);
    const WhitenedInducing grad_v{ev.grad.v};
    g = layout.pack(Trajectory{ev.grad.states, controls}, &grad_v, hyper_grad);
    last = std::move(ev);
    return last.value;
  };

  Vec mass(layout.size());
  mass.head(layout.n_states()).setConstant(sc.mass_states);
  if (joint) mass.segment(layout.n_states(), layout.n_v()).setConstant(sc.mass_inducing);
  if (layout.n_hyper > 0) mass.tail(layout.n_hyper).setConstant(sc.mass_hypers);

  const Vec hyper0 = config.sample_hypers ? Vec(pack_hypers(model0).head(layout.n_hyper)) : Vec();
  Vec pos = layout.pack(init, joint ? &v0 : nullptr, hyper0);
  SghmcSampler sampler(sc, std::move(mass), sc.seed);
  Rng v_rng(derive_seed(sc.seed, {1}));
  Adam adam(config.adam);

  FitResult result{model0, {{}, std::string(variant_name(config.variant))}, {}};
  result.trace.reserve(static_cast<std::size_t>(sc.n_iters));
  sampler.initialize(target, pos);
  for (long i = 1; i <= sc.n_iters; ++i) {
    const double value = sampler.step(target, pos, i);
    result.trace.push_back({i, value, last.train_loglik});
    if (config.sample_hypers) current = with_kernel_block(current, layout.hyper(pos));
    if (retained(i, sc)) {
      Trajectory traj{layout.states(pos), controls};
      WhitenedInducing v = joint ? layout.v(pos) : sample_conditional_inducing(current, traj, v_rng);
      result.store.draws.push_back({std::move(traj), std::move(v), value, i});
    }
    if (config.optimize_hypers) current = hyper_update(current, last.grad, config.sample_hypers, adam);
    if (i == sc.burn_in) sampler.resample_momentum();
  }
  result.model = std::move(current);
  return result;
}

FitResult run_pmcmc(const GpssmModel& model0, const Trajectory& init, const WhitenedInducing& v0,
                    const Mat& y, const FitConfig& config) {
  const auto& sc = config.sghmc;
  if (config.sample_hypers) throw UsageError("ffvd-p does not support sampled hyperparameters");
  PmcmcConfig pc;
  pc.n_particles = config.n_particles;
  pc.n_sweeps = sc.n_iters;
  pc.seed = sc.seed;
  Rng rng(derive_seed(sc.seed, {2}));
  Adam adam(config.adam);

  GpssmModel current = model0;
  Trajectory traj = init;
  WhitenedInducing v = v0;
  FitResult result{model0, {{}, std::string(variant_name(config.variant))}, {}};
  result.trace.reserve(static_cast<std::size_t>(sc.n_iters));
  const unsigned groups = config.optimize_hypers ? unsigned{kHypers} : 0u;
  for (long i = 1; i <= sc.n_iters; ++i) {
    traj = pmcmc_sweep(current, v, traj, y, pc, rng);
    v = sample_conditional_inducing(current, traj, rng);
    const Evaluation ev = evaluate(Objective::joint, current, traj, &v, y, groups);
    result.trace.push_back({i, ev.value, ev.train_loglik});
    if (retained(i, sc)) result.store.draws.push_back({traj, v, ev.value, i});
    if (config.optimize_hypers) current = hyper_update(current, ev.grad, false, adam);
  }
  result.model = std::move(current);
  return result;
}

}  // namespace

FitResult fit_from(const GpssmModel& model, const Trajectory& init, const WhitenedInducing& v0,
                   const Mat& y, const FitConfig& config) {
  config.sghmc.validate();
  init.validate(model.d_x(), model.d_a());
  if (y.rows() != init.T() || y.cols() != model.d_y()) {
    throw ShapeError("observations must be T x d_y");
  }
  if (v0.v.rows() != model.d_x() || v0.v.cols() != model.num_inducing()) {
    throw ShapeError("initial inducing values must be d_x x M");
  }
  if (config.n_particles < 1) throw UsageError("need at least one particle");
  if (config.variant == Variant::ffvd_p) return run_pmcmc(model, init, v0, y, config);
  return run_sghmc(model, init, v0, y, config);
}

FitResult fit(const Dataset& data, const FitConfig& config) {
  data.validate();
  const Initialization init = init_from_data(data, config.init);
  return fit_from(init.model, init.trajectory, init.v, data.y_train(), config);
}

}  // namespace ffvd
