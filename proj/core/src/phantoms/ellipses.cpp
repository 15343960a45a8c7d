#include <algorithm>
#include <cmath>
#include <numbers>

#include "bdgd/errors.hpp"
#include "bdgd/phantoms/phantoms.hpp"

namespace bdgd::phantoms {

bool EllipseSpec::contains(double x, double y) const {
  const double dx = x - center_x, dy = y - center_y;
  const double c = std::cos(rotation), s = std::sin(rotation);
  const double u = (dx * c + dy * s) / semi_axis_a;
  const double v = (-dx * s + dy * c) / semi_axis_b;
  return u * u + v * v <= 1.0;
}

bool EllipseSpec::meets_unit_disk() const {
  // The ellipse lies inside the disk of radius max(a, b) about its centre, and
  // contains the disk of radius min(a, b); the latter gives a sufficient test.
  return std::hypot(center_x, center_y) - std::min(semi_axis_a, semi_axis_b) < 1.0;
}

double pixel_x(int col, int size) { return -1.0 + (col + 0.5) * 2.0 / size; }
double pixel_y(int row, int size) { return 1.0 - (row + 0.5) * 2.0 / size; }

namespace {

std::vector<double> accumulate(const std::vector<EllipseSpec>& ellipses, int size) {
  std::vector<double> acc(static_cast<std::size_t>(size) * size, 0.0);
  for (int r = 0; r < size; ++r) {
    const double y = pixel_y(r, size);
    for (int c = 0; c < size; ++c) {
      const double x = pixel_x(c, size);
      for (const auto& e : ellipses)
        if (e.contains(x, y)) acc[static_cast<std::size_t>(r) * size + c] += e.intensity;
    }
  }
  return acc;
}

}  // namespace

Image render_ellipses(const std::vector<EllipseSpec>& ellipses, int size) {
  if (size < 1) throw ConfigError("render_ellipses: size must be positive");
  const auto acc = accumulate(ellipses, size);
  Image out(size, size);
  for (std::size_t i = 0; i < acc.size(); ++i)
    out.values[i] = static_cast<float>(std::clamp(acc[i], 0.0, 1.0));
  return out;
}

std::vector<EllipseSpec> sample_ellipses(Rng& rng, const EllipseDistribution& dist) {
  const auto span = static_cast<std::uint64_t>(dist.max_count - dist.min_count + 1);
  const int count = dist.min_count + static_cast<int>(rng.below(span));
  std::vector<EllipseSpec> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    EllipseSpec e;
    e.center_x = rng.uniform(-1.0, 1.0);
    e.center_y = rng.uniform(-1.0, 1.0);
    e.semi_axis_a = rng.uniform(dist.min_axis, dist.max_axis);
    e.semi_axis_b = rng.uniform(dist.min_axis, dist.max_axis);
    e.rotation = rng.uniform(0.0, std::numbers::pi);
    e.intensity = rng.uniform(dist.min_intensity, dist.max_intensity);
    if (e.meets_unit_disk()) out.push_back(e);
  }
  return out;
}

Image random_ellipse_phantom(int size, Rng& rng, const EllipseDistribution& dist) {
  if (size < 16) throw ConfigError("random_ellipse_phantom: size must be >= 16");
  return render_ellipses(sample_ellipses(rng, dist), size);
}

std::vector<EllipseSpec> shepp_logan_ellipses() {
  constexpr double deg = std::numbers::pi / 180.0;
  // centre x, centre y, a (x), b (y), rotation, intensity
  return {
      {0.0, 0.0, 0.69, 0.92, 0.0, 2.0},
      {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98},
      {0.22, 0.0, 0.11, 0.31, -18.0 * deg, -0.02},
      {-0.22, 0.0, 0.16, 0.41, 18.0 * deg, -0.02},
      {0.0, 0.35, 0.21, 0.25, 0.0, 0.01},
      {0.0, 0.1, 0.046, 0.046, 0.0, 0.01},
      {0.0, -0.1, 0.046, 0.046, 0.0, 0.01},
      {-0.08, -0.605, 0.046, 0.023, 0.0, 0.01},
      {0.0, -0.605, 0.023, 0.023, 0.0, 0.01},
      {0.06, -0.605, 0.023, 0.046, 0.0, 0.01},
  };
}

Image shepp_logan(int size) {
  if (size < 32) throw ConfigError("shepp_logan: size must be >= 32");
  const auto acc = accumulate(shepp_logan_ellipses(), size);
  const double peak = *std::max_element(acc.begin(), acc.end());
  Image out(size, size);
  for (std::size_t i = 0; i < acc.size(); ++i)
    out.values[i] = static_cast<float>(std::clamp(acc[i] / peak, 0.0, 1.0));
  return out;
}

}  // namespace bdgd::phantoms
