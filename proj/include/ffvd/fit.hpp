#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ffvd/adam.hpp"
#include "ffvd/data.hpp"
#include "ffvd/model.hpp"
#include "ffvd/pmcmc.hpp"
#include "ffvd/sghmc.hpp"

namespace ffvd {

enum class Variant { ffvd_m, ffvd_c_m, ffvd_p };

std::string_view variant_name(Variant v);
/// Throws UsageError listing the accepted names.
Variant parse_variant(std::string_view name);

struct Draw {
  Trajectory trajectory;
  WhitenedInducing v;
  double log_target = 0.0;
  long iteration = 0;
};

struct SampleStore {
  std::vector<Draw> draws;
  std::string variant;
};

struct TraceRow {
  long iter;
  double log_target;
  double train_loglik;
};

struct FitConfig {
  Variant variant = Variant::ffvd_c_m;
  SghmcConfig sghmc;
  int n_particles = 32;
  AdamConfig adam;
  bool optimize_hypers = true;
  /// Fold log kernel parameters and Z into the SGHMC state instead of
  /// optimizing them with Adam.
  bool sample_hypers = false;
  InitConfig init;
};

struct FitResult {
  GpssmModel model;
  SampleStore store;
  std::vector<TraceRow> trace;
};

/// Initialize from the training block of `data` and run the selected variant.
FitResult fit(const Dataset& data, const FitConfig& config);

/// Run the selected variant from an explicit starting point. `y` holds the
/// training observations and must match the trajectory length.
FitResult fit_from(const GpssmModel& model, const Trajectory& init, const WhitenedInducing& v0,
                   const Mat& y, const FitConfig& config);

}  // namespace ffvd
