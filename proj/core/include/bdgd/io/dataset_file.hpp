#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bdgd/phantoms/dataset.hpp"

namespace bdgd::io {

inline constexpr std::uint16_t kDatasetVersion = 1;

struct DatasetHeader {
  std::uint16_t version = kDatasetVersion;
  std::uint32_t count = 0;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::uint16_t num_angles = 0;
  std::uint16_t detector_count = 0;
};

/// "BDGDDATA", u16 version, u32 count, u16 H, u16 W, u16 angles, u16 detectors,
/// then per record ground truth, sinogram and x0 as f32 LE row-major.
std::string encode_dataset(const std::vector<phantoms::DatasetRecord>& records, const tomo::Geometry& geometry);
std::vector<phantoms::DatasetRecord> decode_dataset(std::string_view bytes, DatasetHeader* header = nullptr);
DatasetHeader read_dataset_header(std::string_view bytes);

std::string manifest_to_json(const phantoms::DatasetManifest& manifest);
phantoms::DatasetManifest manifest_from_json(std::string_view text);

/// Sidecar path: "<path>.manifest.json".
std::filesystem::path manifest_path(const std::filesystem::path& container);

/// Writes the container and its manifest.
void save_dataset(const std::filesystem::path& path, const phantoms::Dataset& dataset);
/// Reads both and checks that they agree.
phantoms::Dataset load_dataset(const std::filesystem::path& path);

}  // namespace bdgd::io
