#include "bdgd/baselines/tv.hpp"

#include <algorithm>
#include <cmath>

#include "bdgd/errors.hpp"
#include "bdgd/infer/infer.hpp"
#include "bdgd/rng.hpp"
#include "bdgd/tomo/radon.hpp"

namespace bdgd::baselines {

double power_method_opnorm(const NormalOperator& normal, std::size_t dimension, int iters) {
  if (iters < 1) throw ConfigError("power_method_opnorm: iters must be >= 1");
  if (dimension == 0) throw ConfigError("power_method_opnorm: empty operator");
  // A fixed pseudo-random start: the constant vector is annihilated by the
  // gradient part and can miss the top singular vector entirely.
  Rng start(0x9e3779b97f4a7c15ull);
  std::vector<double> v(dimension);
  for (auto& x : v) x = start.uniform(-1.0, 1.0);
  double rayleigh = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::vector<double> w = normal(v);
    if (w.size() != dimension) throw ShapeError("power_method_opnorm: operator changed the dimension");
    double vw = 0.0, ww = 0.0;
    for (std::size_t i = 0; i < dimension; ++i) {
      vw += v[i] * w[i];
      ww += w[i] * w[i];
    }
    rayleigh = vw;
    if (ww == 0.0) break;
    const double inv = 1.0 / std::sqrt(ww);
    for (std::size_t i = 0; i < dimension; ++i) v[i] = w[i] * inv;
  }
  return std::sqrt(std::max(0.0, rayleigh));
}

std::vector<float> image_gradient(const Image& x) {
  const int h = x.height, w = x.width;
  const std::size_t n = x.size();
  std::vector<float> g(2 * n, 0.0f);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (r + 1 < h) g[i] = x.at(r + 1, c) - x.at(r, c);
      if (c + 1 < w) g[n + i] = x.at(r, c + 1) - x.at(r, c);
    }
  return g;
}

namespace {

/// -div, the adjoint of image_gradient.
Image gradient_adjoint(const std::vector<float>& g, int h, int w) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  Image out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      float v = 0.0f;
      if (r + 1 < h) v -= g[i];
      if (r > 0) v += g[i - w];
      if (c + 1 < w) v -= g[n + i];
      if (c > 0) v += g[n + i - 1];
      out.values[i] = v;
    }
  return out;
}

}  // namespace

double total_variation(const Image& x) {
  const auto g = image_gradient(x);
  const std::size_t n = x.size();
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) tv += std::hypot(double(g[i]), double(g[n + i]));
  return tv;
}

double power_method_opnorm(const tomo::Geometry& geometry, int iters) {
  geometry.validate();
  const int h = geometry.height, w = geometry.width;
  auto normal = [&](const std::vector<double>& v) {
    Image x(h, w);
    for (std::size_t i = 0; i < v.size(); ++i) x.values[i] = static_cast<float>(v[i]);
    const Image ata = tomo::back_project(tomo::radon_forward(x, geometry), geometry);
    const Image gtg = gradient_adjoint(image_gradient(x), h, w);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = double(ata.values[i]) + gtg.values[i];
    return out;
  };
  return power_method_opnorm(normal, static_cast<std::size_t>(h) * w, iters);
}

void TVConfig::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("tv: lambda must be positive");
  if (iterations < 1) throw ConfigError("tv: iterations must be >= 1");
  if (!(tau > 0.0) || !(sigma > 0.0) || !(opnorm > 0.0))
    throw ConfigError("tv: step sizes and operator norm must be positive");
  if (tau * sigma * opnorm * opnorm > 1.0)
    throw ConfigError("tv: step sizes violate tau * sigma * L^2 <= 1");
}

TVConfig TVConfig::for_geometry(const tomo::Geometry& geometry, double lambda, int iterations) {
  TVConfig c;
  c.lambda = lambda;
  c.iterations = iterations;
  c.opnorm = power_method_opnorm(geometry, 50);
  c.tau = c.sigma = 0.99 / c.opnorm;
  return c;
}

double tv_objective(const Image& x, const tomo::Sinogram& y, const tomo::Geometry& geometry, double lambda) {
  const auto ax = tomo::radon_forward(x, geometry);
  double fit = 0.0;
  for (std::size_t i = 0; i < ax.values.size(); ++i) {
    const double d = double(ax.values[i]) - y.values[i];
    fit += d * d;
  }
  return 0.5 * fit + lambda * total_variation(x);
}

TVResult tv_reconstruct(const tomo::Sinogram& y, const tomo::Geometry& geometry, const TVConfig& config) {
  config.validate();
  tomo::require_sinogram(y, geometry, "tv_reconstruct");
  const int h = geometry.height, w = geometry.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const auto tau = static_cast<float>(config.tau), sigma = static_cast<float>(config.sigma);
  const auto lambda = static_cast<float>(config.lambda);

  Image x(h, w), x_bar(h, w);
  tomo::Sinogram p(geometry.num_angles(), geometry.detector_count);
  std::vector<float> q(2 * n, 0.0f);

  TVResult result;
  result.objective.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    // Dual of 0.5||. - y||^2: prox is (p + sigma (A x_bar - y)) / (1 + sigma).
    const auto ax = tomo::radon_forward(x_bar, geometry);
    for (std::size_t i = 0; i < p.values.size(); ++i)
      p.values[i] = (p.values[i] + sigma * (ax.values[i] - y.values[i])) / (1.0f + sigma);
    // Dual of lambda ||.||_{2,1}: pointwise projection onto the lambda-ball.
    const auto gx = image_gradient(x_bar);
    for (std::size_t i = 0; i < n; ++i) {
      const float a = q[i] + sigma * gx[i], b = q[n + i] + sigma * gx[n + i];
      const float scale = std::max(1.0f, std::sqrt(a * a + b * b) / lambda);
      q[i] = a / scale;
      q[n + i] = b / scale;
    }
    const Image atp = tomo::back_project(p, geometry);
    const Image gtq = gradient_adjoint(q, h, w);
    for (std::size_t i = 0; i < n; ++i) {
      const float prev = x.values[i];
      const float next = std::max(0.0f, prev - tau * (atp.values[i] + gtq.values[i]));
      x.values[i] = next;
      x_bar.values[i] = 2.0f * next - prev;
    }
    result.objective.push_back(tv_objective(x, y, geometry, config.lambda));
  }
  result.image = std::move(x);
  return result;
}

std::vector<double> logspace(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > 0.0) || n < 1) throw ConfigError("logspace: need positive bounds and n >= 1");
  if (n == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) out[i] = std::pow(10.0, a + (b - a) * i / (n - 1));
  return out;
}

GridResult grid_search_lambda(const std::vector<phantoms::DatasetRecord>& records, const std::vector<double>& grid,
                              const tomo::Geometry& geometry, const TVConfig& base) {
  if (grid.empty()) throw ConfigError("grid_search_lambda: empty grid");
  if (records.empty()) throw DataError("grid_search_lambda: no validation records");
  GridResult out;
  bool have_best = false;
  double best_psnr = 0.0;
  for (double lambda : grid) {
    TVConfig c = base;
    c.lambda = lambda;
    std::vector<double> scores;
    for (const auto& r : records)
      scores.push_back(infer::psnr(tv_reconstruct(r.sinogram, geometry, c).image, r.ground_truth));
    const auto ms = infer::mean_std(scores);
    out.table.push_back({lambda, ms.mean, ms.std});
    if (!have_best || ms.mean > best_psnr || (ms.mean == best_psnr && lambda < out.best_lambda)) {
      have_best = true;
      best_psnr = ms.mean;
      out.best_lambda = lambda;
    }
  }
  return out;
}

}  // namespace bdgd::baselines
