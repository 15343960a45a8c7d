#pragma once

#include <string_view>
#include <vector>

#include "bdgd/image.hpp"
#include "bdgd/rng.hpp"

namespace bdgd::phantoms {

/// Filled ellipse on the [-1, 1]^2 field of view (x right, y up).
struct EllipseSpec {
  double center_x = 0.0;
  double center_y = 0.0;
  double semi_axis_a = 0.5;  // along the rotated x axis
  double semi_axis_b = 0.5;
  double rotation = 0.0;     // radians, counter-clockwise
  double intensity = 1.0;

  /// Analytic membership test for a point of the field of view.
  bool contains(double x, double y) const;
  /// Whether the ellipse reaches into the unit disk.
  bool meets_unit_disk() const;
};

/// Sampling ranges for random ellipse phantoms.
struct EllipseDistribution {
  int min_count = 1;
  int max_count = 8;
  double min_axis = 0.05;
  double max_axis = 0.5;
  double min_intensity = 0.1;
  double max_intensity = 1.0;

  bool operator==(const EllipseDistribution&) const = default;
};

/// Physical coordinates of the centre of pixel (row, col) of a size x size grid.
double pixel_x(int col, int size);
double pixel_y(int row, int size);

/// Additive superposition of the ellipses at pixel centres, clipped to [0, 1].
Image render_ellipses(const std::vector<EllipseSpec>& ellipses, int size);

std::vector<EllipseSpec> sample_ellipses(Rng& rng, const EllipseDistribution& dist = {});

/// 1-8 random ellipses; background is exactly 0. Requires size >= 16.
Image random_ellipse_phantom(int size, Rng& rng, const EllipseDistribution& dist = {});

/// The ten ellipses of the original Shepp-Logan head phantom.
std::vector<EllipseSpec> shepp_logan_ellipses();

/// Shepp-Logan phantom rescaled to [0, 1]. Requires size >= 32.
Image shepp_logan(int size);

/// x with `intensity` written wherever mask is set, clipped to [0, 1].
Image insert_abnormality(const Image& x, const Mask& mask, float intensity);

/// Renders `text` with a built-in 5x7 bitmap font (digits, upper-case letters,
/// space), horizontally centred and scaled to span most of the image width.
Mask text_mask(std::string_view text, int height, int width);

Mask checkerboard_mask(int height, int width);

}  // namespace bdgd::phantoms
