#pragma once

#include <string>
#include <vector>

#include "bdgd/image.hpp"

namespace bdgd::tomo {

/// Parallel-beam acquisition. The image is centred on the rotation axis;
/// pixel (r, c) sits at x = (c - (W-1)/2) * pixel_size, y = ((H-1)/2 - r) * pixel_size.
/// Detector bin j sits at offset t = (j - (D-1)/2) * detector_spacing * pixel_size
/// along the direction (cos a, sin a).
struct Geometry {
  std::vector<double> angles;
  int detector_count = 0;
  double detector_spacing = 1.0;  // in pixels
  int height = 0;
  int width = 0;
  double pixel_size = 1.0;

  int num_angles() const { return static_cast<int>(angles.size()); }
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  bool operator==(const Geometry&) const = default;
};

/// Line-integral measurements, one row per view.
struct Sinogram {
  int num_angles = 0;
  int detector_count = 0;
  std::vector<float> values;

  Sinogram() = default;
  Sinogram(int angles, int detectors, float fill = 0.0f);

  float& at(int view, int bin) { return values[static_cast<std::size_t>(view) * detector_count + bin]; }
  float at(int view, int bin) const {
    return values[static_cast<std::size_t>(view) * detector_count + bin];
  }
  bool operator==(const Sinogram&) const = default;
};

enum class ViewMode { sparse, limited };

ViewMode parse_view_mode(const std::string& name);
std::string to_string(ViewMode mode);

/// Sparse mode spreads `num_angles` uniformly over [0, pi); limited mode over
/// [0, max_angle). The image covers the square [-1, 1]^2, so pixel_size is
/// 2 / image_size, and the detector spans the image diagonal at one bin per pixel.
Geometry make_geometry(ViewMode mode, int num_angles, double max_angle, int image_size);

void require_image(const Image& x, const Geometry& g, const char* op);
void require_sinogram(const Sinogram& s, const Geometry& g, const char* op);

}  // namespace bdgd::tomo
