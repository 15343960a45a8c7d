#include <algorithm>
#include <cmath>
#include <sstream>

#include "bdgd/errors.hpp"
#include "bdgd/infer/infer.hpp"

namespace bdgd::infer {

model::Sampling posterior_sampling(model::BayesMode mode) {
  return mode == model::BayesMode::deterministic ? model::Sampling::mean : model::Sampling::weight_draw;
}

SampleStack mc_reconstruct(const tomo::Sinogram& y, const Image& x0, const model::Cascade& cascade, int T,
                           std::uint64_t seed, bool keep_per_block) {
  if (T < 1) throw ConfigError("mc_reconstruct: T must be >= 1");
  SampleStack stack;
  stack.samples.reserve(static_cast<std::size_t>(T));
  if (keep_per_block) stack.per_block.resize(cascade.depth());
  const auto sampling = posterior_sampling(cascade.config.mode);
  for (int t = 0; t < T; ++t) {
    Rng rng = Rng::derive(seed, {7, static_cast<std::uint64_t>(t)});
    auto iterates = model::cascade_forward(y, x0, cascade, rng, sampling);
    if (keep_per_block)
      for (std::size_t k = 1; k < iterates.size(); ++k) stack.per_block[k - 1].push_back(iterates[k]);
    stack.samples.push_back(std::move(iterates.back()));
  }
  return stack;
}

namespace {

void require_stack(std::span<const Image> stack, const char* op) {
  if (stack.empty()) throw ConfigError(std::string(op) + ": empty sample stack");
  for (const auto& im : stack)
    if (!im.same_shape(stack.front())) throw ShapeError(std::string(op) + ": samples differ in size");
}

}  // namespace

Image posterior_mean(std::span<const Image> stack) {
  require_stack(stack, "posterior_mean");
  std::vector<double> acc(stack.front().size(), 0.0);
  for (const auto& im : stack)
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += im.values[i];
  Image out(stack.front().height, stack.front().width);
  const double inv = 1.0 / static_cast<double>(stack.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out.values[i] = static_cast<float>(acc[i] * inv);
  return out;
}

Image posterior_pixel_variance(std::span<const Image> stack, double sigma2) {
  require_stack(stack, "posterior_pixel_variance");
  const std::size_t n = stack.front().size();
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  for (const auto& im : stack)
    for (std::size_t i = 0; i < n; ++i) {
      sum[i] += im.values[i];
      sum_sq[i] += double(im.values[i]) * im.values[i];
    }
  const double inv = 1.0 / static_cast<double>(stack.size());
  Image out(stack.front().height, stack.front().width);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = sum[i] * inv;
    // The spread term is a variance and cannot be negative; clamp round-off.
    const double spread = std::max(0.0, sum_sq[i] * inv - mean * mean);
    out.values[i] = static_cast<float>(sigma2 + spread);
  }
  return out;
}

PosteriorSummary summarize(const SampleStack& stack, float sigma2, bool keep_samples) {
  PosteriorSummary s;
  s.mean = posterior_mean(stack.samples);
  s.pixel_variance = posterior_pixel_variance(stack.samples, sigma2);
  s.T = static_cast<int>(stack.samples.size());
  s.sigma2_K = sigma2;
  if (keep_samples) s.samples = stack.samples;
  return s;
}

double psnr(const Image& x, const Image& ref, double peak) {
  if (!x.same_shape(ref)) throw ShapeError("psnr: image shapes differ");
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = double(x.values[i]) - ref.values[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const Image& x, const Image& ref) {
  const auto [lo, hi] = std::minmax_element(ref.values.begin(), ref.values.end());
  const double range = double(*hi) - *lo;
  return psnr(x, ref, range > 0.0 ? range : 1.0);
}

std::string format_psnr(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << value;
  return os.str();
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace bdgd::infer
