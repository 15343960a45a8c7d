#pragma once

#include <cstdint>

#include "bdgd/image.hpp"
#include "bdgd/rng.hpp"
#include "bdgd/tomo/geometry.hpp"

namespace bdgd::tomo {

/// Ray-driven discrete Radon transform: each ray is sampled every half pixel
/// and the image is bilinearly interpolated at the samples.
Sinogram radon_forward(const Image& x, const Geometry& g);

/// Exact transpose of radon_forward: the same interpolation weights scattered
/// back onto the pixel grid.
Image back_project(const Sinogram& s, const Geometry& g);

/// A^T (A x - y), the gradient of 0.5 * ||A x - y||^2.
Image grad_data_fidelity(const Image& x, const Sinogram& y, const Geometry& g);

enum class FbpFilter { ram_lak, hann };

/// Filtered back-projection: ramp filter per view (zero-padded FFT), then a
/// pixel-driven linear-interpolation back-projection scaled by pi / num_angles.
Image fbp(const Sinogram& s, const Geometry& g, FbpFilter filter = FbpFilter::hann);

/// Standard deviation of the noise added by add_noise at `level`.
double noise_sigma(const Sinogram& s, double level);

/// Adds i.i.d. Gaussian noise with std = level * mean(|s|).
Sinogram add_noise(const Sinogram& s, double level, Rng& rng);
Sinogram add_noise(const Sinogram& s, double level, std::uint64_t seed);

}  // namespace bdgd::tomo
