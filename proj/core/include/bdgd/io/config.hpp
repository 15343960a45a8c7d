#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bdgd/model/block.hpp"
#include "bdgd/tomo/geometry.hpp"
#include "bdgd/train/train.hpp"

namespace bdgd::io {

/// Everything a run needs. Serialized as `key = value` lines under
/// [geometry], [data], [model], [train], [inference], [tv] and [output].
struct RunConfig {
  // [geometry]
  tomo::ViewMode view = tomo::ViewMode::sparse;
  int angles = 30;
  double max_angle = 2.0943951023931957;  // 2 pi / 3, limited view only
  int image_size = 64;
  // [data]
  double noise_level = 0.01;
  std::size_t train_count = 200;
  std::size_t validation_count = 100;
  std::uint64_t data_seed = 1;
  std::uint64_t validation_seed = 2;
  // [model]
  model::BlockConfig block = model::BlockConfig::desk();
  // [train]
  train::TrainConfig train;
  // [inference]
  int samples = 100;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  // [tv]
  int tv_iterations = 500;
  double tv_lambda = 0.0;  // 0 selects lambda by grid search
  double grid_min = 1e-4;
  double grid_max = 1.0;
  int grid_points = 9;
  std::size_t grid_records = 5;  // leading validation records scored per lambda
  // [output]
  std::string output_dir = "out";

  tomo::Geometry geometry() const;
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError on syntax errors, unknown sections or keys, and bad values.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Inverse of parse_run_config: parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& config);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace bdgd::io
