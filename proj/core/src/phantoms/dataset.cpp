#include "bdgd/phantoms/dataset.hpp"

#include "bdgd/errors.hpp"

namespace bdgd::phantoms {

DatasetRecord make_record_from(const Image& ground_truth, const tomo::Geometry& geometry,
                               double noise_level, Rng& noise_rng, tomo::FbpFilter filter) {
  DatasetRecord rec;
  rec.ground_truth = ground_truth;
  rec.sinogram = tomo::add_noise(tomo::radon_forward(ground_truth, geometry), noise_level, noise_rng);
  rec.x0 = tomo::fbp(rec.sinogram, geometry, filter);
  return rec;
}

DatasetRecord make_record(std::size_t index, const tomo::Geometry& geometry, double noise_level,
                          std::uint64_t seed, const EllipseDistribution& dist, tomo::FbpFilter filter) {
  if (geometry.height != geometry.width)
    throw ConfigError("make_record: ellipse phantoms need a square image grid");
  Rng phantom_rng = Rng::derive(seed, {1, index});
  Rng noise_rng = Rng::derive(seed, {2, index});
  return make_record_from(random_ellipse_phantom(geometry.height, phantom_rng, dist), geometry,
                          noise_level, noise_rng, filter);
}

Dataset build_dataset(std::size_t n, const tomo::Geometry& geometry, double noise_level,
                      std::uint64_t seed, const EllipseDistribution& dist) {
  if (n < 1) throw ConfigError("build_dataset: n must be >= 1");
  geometry.validate();
  Dataset ds;
  ds.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.records.push_back(make_record(i, geometry, noise_level, seed, dist));
  ds.manifest.geometry = geometry;
  ds.manifest.noise_level = noise_level;
  ds.manifest.seed = seed;
  ds.manifest.count = n;
  ds.manifest.ellipses = dist;
  ds.manifest.filter = tomo::FbpFilter::hann;
  ds.manifest.rng_algorithm = std::string(Rng::kAlgorithm);
  return ds;
}

}  // namespace bdgd::phantoms
