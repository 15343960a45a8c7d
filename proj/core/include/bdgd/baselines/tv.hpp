#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "bdgd/image.hpp"
#include "bdgd/phantoms/dataset.hpp"
#include "bdgd/tomo/geometry.hpp"

namespace bdgd::baselines {

/// Applies K^T K to a vector.
using NormalOperator = std::function<std::vector<double>(const std::vector<double>&)>;

/// ||K|| by power iteration on K^T K from a fixed pseudo-random vector. The estimate is
/// the square root of the last Rayleigh quotient, which never decreases with iters.
double power_method_opnorm(const NormalOperator& normal, std::size_t dimension, int iters);

/// ||K|| for the stacked operator (A; grad) of the TV problem on this geometry.
double power_method_opnorm(const tomo::Geometry& geometry, int iters = 50);

/// Isotropic forward-difference gradient with Neumann boundary: [2][H*W] (rows, cols).
std::vector<float> image_gradient(const Image& x);
/// Isotropic total variation sum |grad x|.
double total_variation(const Image& x);

struct TVConfig {
  double lambda = 1e-2;
  int iterations = 500;
  double tau = 0.0;
  double sigma = 0.0;
  double opnorm = 0.0;  // L

  /// Requires lambda > 0, iterations >= 1 and tau * sigma * L^2 <= 1.
  void validate() const;

  /// tau = sigma = 0.99 / L with L from 50 power iterations.
  static TVConfig for_geometry(const tomo::Geometry& geometry, double lambda, int iterations = 500);
};

struct TVResult {
  Image image;
  std::vector<double> objective;  // 0.5 ||Ax - y||^2 + lambda TV(x) after each iteration
};

/// Chambolle-Pock for min_{x >= 0} 0.5 ||Ax - y||^2 + lambda TV(x), started at zero.
TVResult tv_reconstruct(const tomo::Sinogram& y, const tomo::Geometry& geometry, const TVConfig& config);

double tv_objective(const Image& x, const tomo::Sinogram& y, const tomo::Geometry& geometry, double lambda);

/// n points log-spaced over [lo, hi].
std::vector<double> logspace(double lo, double hi, int n);

struct GridRow {
  double lambda = 0.0;
  double mean_psnr = 0.0;
  double std_psnr = 0.0;
};

struct GridResult {
  double best_lambda = 0.0;
  std::vector<GridRow> table;  // in grid order
};

/// Mean PSNR of tv_reconstruct over the records for each lambda; ties go to the smaller lambda.
GridResult grid_search_lambda(const std::vector<phantoms::DatasetRecord>& records, const std::vector<double>& grid,
                              const tomo::Geometry& geometry, const TVConfig& base);

}  // namespace bdgd::baselines
