#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ffvd/fit.hpp"
#include "ffvd/normality.hpp"
#include "ffvd/predict.hpp"

namespace ffvd::io {

/// Shortest round-trip decimal representation.
std::string format_double(double x);

/// iter,log_target,train_loglik
void write_trace(const std::vector<TraceRow>& trace, const std::filesystem::path& path);
std::vector<TraceRow> read_trace(const std::filesystem::path& path);

/// sample,t,dim,value
void write_sample_states(const SampleStore& store, const std::filesystem::path& path);
/// sample,dim,m,value
void write_sample_inducing(const SampleStore& store, const std::filesystem::path& path);
/// Rebuild a store from the two sample files. Controls are left empty.
SampleStore read_samples(const std::filesystem::path& states_path,
                         const std::filesystem::path& inducing_path);

/// t,dim,mean,std with t the dataset row index of the predicted step.
void write_predictions(const PredictiveSummary& summary, int first_row,
                       const std::filesystem::path& path);

struct PredictionFile {
  std::vector<int> rows;  ///< dataset row index per output row
  Mat mean;               ///< steps x d_y
  Mat std;
  int first_row = 0;
};
PredictionFile read_predictions(const std::filesystem::path& path);

/// quantity,t_or_m,dim,k2,p
void write_normality(const NormalityReport& report, const std::filesystem::path& path);

/// Split a CSV line on commas (no quoting).
std::vector<std::string> split_csv_line(const std::string& line);
double parse_double(const std::string& cell, long row, long col);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace ffvd::io
