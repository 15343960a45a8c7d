#include "bdgd/tomo/radon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <utility>

#include "bdgd/errors.hpp"

namespace bdgd::tomo {

namespace {

constexpr double kSampleStep = 0.5;  // along-ray sampling step, in pixels

// Walks every ray of `g`, reporting the bilinear taps of each sample point to
// `visitor`: begin(ray), tap(pixel_index, weight), end(ray). The taps are
// collected into one sparse matrix; the forward projector gathers through it
// and the back-projector scatters through it, an exact transpose pair.
template <typename Visitor>
void trace_rays(const Geometry& g, Visitor& visitor) {
  const int H = g.height, W = g.width;
  const double cx = 0.5 * (W - 1), cy = 0.5 * (H - 1);
  const double half_span = 0.5 * std::hypot(double(H), double(W)) + 2.0;
  const int samples = static_cast<int>(std::ceil(2.0 * half_span / kSampleStep));
  const double weight = kSampleStep * g.pixel_size;
  const double det_center = 0.5 * (g.detector_count - 1);

  for (int a = 0; a < g.num_angles(); ++a) {
    const double ca = std::cos(g.angles[a]), sa = std::sin(g.angles[a]);
    for (int j = 0; j < g.detector_count; ++j) {
      const int ray = a * g.detector_count + j;
      const double t = (j - det_center) * g.detector_spacing;  // pixels
      // Index-space position along the ray at parameter s (pixels):
      //   col(s) = cx + t ca - s sa,   row(s) = cy - t sa - s ca.
      const double col0 = cx + t * ca, row0 = cy - t * sa;
      // Keep samples whose bilinear footprint can touch the grid:
      // col in (-1, W), row in (-1, H).
      double s_lo = -half_span, s_hi = half_span;
      auto clip = [&](double origin, double slope, double lo, double hi) {
        if (std::abs(slope) < 1e-12) {
          if (origin <= lo || origin >= hi) s_lo = s_hi + 1.0;
          return;
        }
        double s1 = (origin - lo) / slope, s2 = (origin - hi) / slope;
        if (s1 > s2) std::swap(s1, s2);
        s_lo = std::max(s_lo, s1);
        s_hi = std::min(s_hi, s2);
      };
      clip(col0, sa, -1.0, double(W));
      clip(row0, ca, -1.0, double(H));
      visitor.begin(ray);
      if (s_lo < s_hi) {
        const int m_lo = std::max(0, static_cast<int>(std::floor((s_lo + half_span) / kSampleStep - 0.5)));
        const int m_hi = std::min(samples - 1, static_cast<int>(std::ceil((s_hi + half_span) / kSampleStep - 0.5)));
        for (int m = m_lo; m <= m_hi; ++m) {
          const double s = -half_span + (m + 0.5) * kSampleStep;
          const double col = col0 - s * sa, row = row0 - s * ca;
          const double rf = std::floor(row), cf = std::floor(col);
          const int r = static_cast<int>(rf), c = static_cast<int>(cf);
          const double fr = row - rf, fc = col - cf;
          if (r >= 0 && r < H) {
            if (c >= 0 && c < W) visitor.tap(r * W + c, weight * (1.0 - fr) * (1.0 - fc));
            if (c + 1 >= 0 && c + 1 < W) visitor.tap(r * W + c + 1, weight * (1.0 - fr) * fc);
          }
          if (r + 1 >= 0 && r + 1 < H) {
            if (c >= 0 && c < W) visitor.tap((r + 1) * W + c, weight * fr * (1.0 - fc));
            if (c + 1 >= 0 && c + 1 < W) visitor.tap((r + 1) * W + c + 1, weight * fr * fc);
          }
        }
      }
      visitor.end(ray);
    }
  }
}

/// Ray-major sparse matrix of the projector. Taps that hit the same pixel
/// along a ray are merged, and pixels are listed in increasing order.
struct SystemMatrix {
  std::vector<std::size_t> ray_start;
  std::vector<std::int32_t> pixel;
  std::vector<float> weight;
};

struct Builder {
  SystemMatrix* m;
  std::vector<double> dense;
  std::vector<unsigned char> seen;
  std::vector<std::int32_t> touched;
  void begin(int) {}
  void tap(int p, double w) {
    if (!seen[p]) {
      seen[p] = 1;
      touched.push_back(p);
    }
    dense[p] += w;
  }
  void end(int) {
    std::sort(touched.begin(), touched.end());
    for (auto p : touched) {
      m->pixel.push_back(p);
      m->weight.push_back(static_cast<float>(dense[p]));
      dense[p] = 0.0;
      seen[p] = 0;
    }
    touched.clear();
    m->ray_start.push_back(m->pixel.size());
  }
};

std::shared_ptr<const SystemMatrix> build_matrix(const Geometry& g) {
  auto m = std::make_shared<SystemMatrix>();
  m->ray_start.push_back(0);
  const auto n = static_cast<std::size_t>(g.height) * g.width;
  Builder b{m.get(), std::vector<double>(n, 0.0), std::vector<unsigned char>(n, 0), {}};
  trace_rays(g, b);
  return m;
}

/// The matrix for a geometry, built on first use. A handful of geometries
/// are kept; a run rarely uses more than one or two.
std::shared_ptr<const SystemMatrix> system_matrix(const Geometry& g) {
  static std::mutex mutex;
  static std::deque<std::pair<Geometry, std::shared_ptr<const SystemMatrix>>> cache;
  constexpr std::size_t kCapacity = 8;
  {
    std::lock_guard lock(mutex);
    for (const auto& [key, m] : cache)
      if (key == g) return m;
  }
  auto m = build_matrix(g);
  std::lock_guard lock(mutex);
  cache.emplace_front(g, m);
  if (cache.size() > kCapacity) cache.pop_back();
  return m;
}

}  // namespace

Sinogram radon_forward(const Image& x, const Geometry& g) {
  require_image(x, g, "radon_forward");
  const auto m = system_matrix(g);
  Sinogram s(g.num_angles(), g.detector_count);
  const float* img = x.values.data();
  for (std::size_t ray = 0; ray + 1 < m->ray_start.size(); ++ray) {
    double acc = 0.0;
    for (std::size_t i = m->ray_start[ray]; i < m->ray_start[ray + 1]; ++i)
      acc += double(m->weight[i]) * img[m->pixel[i]];
    s.values[ray] = static_cast<float>(acc);
  }
  return s;
}

Image back_project(const Sinogram& s, const Geometry& g) {
  require_sinogram(s, g, "back_project");
  const auto m = system_matrix(g);
  std::vector<double> acc(static_cast<std::size_t>(g.height) * g.width, 0.0);
  for (std::size_t ray = 0; ray + 1 < m->ray_start.size(); ++ray) {
    const double v = s.values[ray];
    if (v == 0.0) continue;
    for (std::size_t i = m->ray_start[ray]; i < m->ray_start[ray + 1]; ++i)
      acc[m->pixel[i]] += double(m->weight[i]) * v;
  }
  Image out(g.height, g.width);
  std::transform(acc.begin(), acc.end(), out.values.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

Image grad_data_fidelity(const Image& x, const Sinogram& y, const Geometry& g) {
  require_sinogram(y, g, "grad_data_fidelity");
  Sinogram residual = radon_forward(x, g);
  for (std::size_t i = 0; i < residual.values.size(); ++i) residual.values[i] -= y.values[i];
  return back_project(residual, g);
}

double noise_sigma(const Sinogram& s, double level) {
  if (s.values.empty()) return 0.0;
  double mean_abs = 0.0;
  for (float v : s.values) mean_abs += std::abs(v);
  mean_abs /= static_cast<double>(s.values.size());
  return level * mean_abs;
}

Sinogram add_noise(const Sinogram& s, double level, Rng& rng) {
  if (!(level >= 0.0)) throw ConfigError("add_noise: level must be non-negative");
  Sinogram out = s;
  if (level == 0.0) return out;
  const double sigma = noise_sigma(s, level);
  for (auto& v : out.values) v = static_cast<float>(v + sigma * rng.normal());
  return out;
}

Sinogram add_noise(const Sinogram& s, double level, std::uint64_t seed) {
  Rng rng(seed);
  return add_noise(s, level, rng);
}

}  // namespace bdgd::tomo
