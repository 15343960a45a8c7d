#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdgd/image.hpp"
#include "bdgd/phantoms/phantoms.hpp"
#include "bdgd/tomo/geometry.hpp"
#include "bdgd/tomo/radon.hpp"

namespace bdgd::phantoms {

/// Ground truth, its noisy sinogram, and the FBP of that sinogram.
struct DatasetRecord {
  Image ground_truth;
  tomo::Sinogram sinogram;
  Image x0;

  bool operator==(const DatasetRecord&) const = default;
};

/// Everything needed to regenerate a dataset bit for bit.
struct DatasetManifest {
  tomo::Geometry geometry;
  double noise_level = 0.01;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  EllipseDistribution ellipses;
  tomo::FbpFilter filter = tomo::FbpFilter::hann;
  std::string rng_algorithm;
};

struct Dataset {
  std::vector<DatasetRecord> records;
  DatasetManifest manifest;
};

/// Record i draws its phantom from stream (seed, 1, i) and its noise from
/// stream (seed, 2, i), so any record can be regenerated on its own.
DatasetRecord make_record(std::size_t index, const tomo::Geometry& geometry, double noise_level,
                          std::uint64_t seed, const EllipseDistribution& dist = {},
                          tomo::FbpFilter filter = tomo::FbpFilter::hann);

/// Record built around a given phantom (Shepp-Logan, abnormality tests).
DatasetRecord make_record_from(const Image& ground_truth, const tomo::Geometry& geometry,
                               double noise_level, Rng& noise_rng,
                               tomo::FbpFilter filter = tomo::FbpFilter::hann);

Dataset build_dataset(std::size_t n, const tomo::Geometry& geometry, double noise_level,
                      std::uint64_t seed, const EllipseDistribution& dist = {});

}  // namespace bdgd::phantoms
