#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bdgd/image.hpp"
#include "bdgd/model/cascade.hpp"
#include "bdgd/phantoms/dataset.hpp"

namespace bdgd::infer {

/// T cascade samples; per_block[k-1][t] holds the k-th iterate of sample t
/// when intermediates were requested.
struct SampleStack {
  std::vector<Image> samples;
  std::vector<std::vector<Image>> per_block;
};

/// T independent passes through the cascade. Sample t draws all of its block
/// parameters from stream (seed, 7, t); the gradient is recomputed at every block.
SampleStack mc_reconstruct(const tomo::Sinogram& y, const Image& x0, const model::Cascade& cascade, int T,
                           std::uint64_t seed, bool keep_per_block = false);

/// Sampling used for posterior draws under the cascade's mode.
model::Sampling posterior_sampling(model::BayesMode mode);

/// Per-pixel arithmetic mean of the samples.
Image posterior_mean(std::span<const Image> stack);

/// sigma2 + (1/T) sum_t x_t^2 - mean^2 per pixel: the diagonal of the
/// predictive covariance estimate, with the 1/T normalization.
Image posterior_pixel_variance(std::span<const Image> stack, double sigma2);

struct PosteriorSummary {
  Image mean;
  Image pixel_variance;
  std::vector<Image> samples;  // empty unless kept
  int T = 0;
  float sigma2_K = 0.0f;
};

PosteriorSummary summarize(const SampleStack& stack, float sigma2, bool keep_samples);

/// Sentinel for identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE); kInfinitePsnr when MSE is 0.
double psnr(const Image& x, const Image& ref, double peak);
/// PSNR with peak = max(ref) - min(ref).
double psnr(const Image& x, const Image& ref);
std::string format_psnr(double value);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

struct MetricRow {
  std::size_t record = 0;
  int block = 0;  // 0 is the initial guess
  std::uint64_t seed = 0;
  double psnr = 0.0;
  double wall_seconds = 0.0;
};

struct Evaluation {
  std::vector<MetricRow> rows;
  /// Mean PSNR over records of the final-block posterior mean, one per seed.
  std::vector<double> per_seed_mean;
  MeanStd summary;
};

/// Posterior-mean PSNR against the ground truth for each record, each seed
/// and each block k = 0..K (block k uses the k-th iterates of the samples).
Evaluation evaluate(const model::Cascade& cascade, const std::vector<phantoms::DatasetRecord>& records,
                    int T, std::span<const std::uint64_t> seeds);

}  // namespace bdgd::infer
