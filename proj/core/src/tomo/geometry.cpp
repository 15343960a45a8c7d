#include "bdgd/tomo/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bdgd/errors.hpp"

namespace bdgd::tomo {

Sinogram::Sinogram(int angles, int detectors, float fill)
    : num_angles(angles), detector_count(detectors),
      values(static_cast<std::size_t>(angles) * detectors, fill) {}

void Geometry::validate() const {
  if (angles.empty()) throw ConfigError("geometry: no view angles");
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (!(angles[i] >= 0.0 && angles[i] < std::numbers::pi))
      throw ConfigError("geometry: angle " + std::to_string(angles[i]) + " outside [0, pi)");
    if (i > 0 && !(angles[i] > angles[i - 1]))
      throw ConfigError("geometry: angles must be strictly increasing");
  }
  if (height < 1 || width < 1) throw ConfigError("geometry: image size must be positive");
  if (detector_count < 1) throw ConfigError("geometry: detector_count must be positive");
  if (!(detector_spacing > 0.0) || !(pixel_size > 0.0))
    throw ConfigError("geometry: spacings must be positive");
  const double diagonal = std::hypot(double(height), double(width));
  if (detector_count * detector_spacing < diagonal - 1e-9)
    throw ConfigError("geometry: detector extent " + std::to_string(detector_count * detector_spacing) +
                      " px does not cover the image diagonal " + std::to_string(diagonal) + " px");
}

ViewMode parse_view_mode(const std::string& name) {
  if (name == "sparse") return ViewMode::sparse;
  if (name == "limited") return ViewMode::limited;
  throw ConfigError("unknown view mode '" + name + "' (expected sparse or limited)");
}

std::string to_string(ViewMode mode) { return mode == ViewMode::sparse ? "sparse" : "limited"; }

Geometry make_geometry(ViewMode mode, int num_angles, double max_angle, int image_size) {
  if (num_angles < 1) throw ConfigError("make_geometry: num_angles must be >= 1");
  if (image_size < 1) throw ConfigError("make_geometry: image_size must be >= 1");
  if (mode == ViewMode::sparse) max_angle = std::numbers::pi;
  if (!(max_angle > 0.0 && max_angle <= std::numbers::pi))
    throw ConfigError("make_geometry: max_angle must lie in (0, pi]");
  Geometry g;
  g.angles.resize(static_cast<std::size_t>(num_angles));
  for (int k = 0; k < num_angles; ++k) g.angles[k] = k * max_angle / num_angles;
  g.height = g.width = image_size;
  g.pixel_size = 2.0 / image_size;
  g.detector_spacing = 1.0;
  g.detector_count = static_cast<int>(std::ceil(std::hypot(double(image_size), double(image_size))));
  g.validate();
  return g;
}

void require_image(const Image& x, const Geometry& g, const char* op) {
  if (x.height != g.height || x.width != g.width)
    throw ShapeError(std::string(op) + ": image " + std::to_string(x.height) + "x" +
                     std::to_string(x.width) + " does not match geometry " + std::to_string(g.height) +
                     "x" + std::to_string(g.width));
}

void require_sinogram(const Sinogram& s, const Geometry& g, const char* op) {
  if (s.num_angles != g.num_angles() || s.detector_count != g.detector_count ||
      s.values.size() != static_cast<std::size_t>(s.num_angles) * s.detector_count)
    throw ShapeError(std::string(op) + ": sinogram " + std::to_string(s.num_angles) + "x" +
                     std::to_string(s.detector_count) + " does not match geometry " +
                     std::to_string(g.num_angles()) + "x" + std::to_string(g.detector_count));
}

}  // namespace bdgd::tomo
