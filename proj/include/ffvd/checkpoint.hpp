#pragma once

#include <filesystem>
#include <string>

#include "ffvd/model.hpp"

namespace ffvd {

inline constexpr int kCheckpointFormatVersion = 1;

/// Flat key-value text document, one `key: value` pair per line.
///
///   format_version: 1
///   d_x: <int>   d_a: <int>   d_y: <int>   M: <int>
///   kernel.<d>.signal_variance: <double>
///   kernel.<d>.lengthscales: <D doubles>
///   Z: <M*D doubles, row-major>
///   Q: <d_x doubles>
///   C: <d_y*d_x doubles, row-major>
///   d: <d_y doubles>
///   R: <d_y doubles>
///   x0_mean: <d_x doubles>
///   x0_var: <d_x doubles>
///
/// Values are space separated and printed in shortest round-trip form.
std::string serialize_model(const GpssmModel& model);
GpssmModel deserialize_model(const std::string& text);

void save_checkpoint(const GpssmModel& model, const std::filesystem::path& path);
GpssmModel load_checkpoint(const std::filesystem::path& path);

}  // namespace ffvd
