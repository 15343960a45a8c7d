#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "bdgd/errors.hpp"
#include "bdgd/tomo/radon.hpp"

namespace bdgd::tomo {

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftwf_free(p); }
};
struct PlanDestroy {
  void operator()(fftwf_plan_s* p) const { fftwf_destroy_plan(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;
using Plan = std::unique_ptr<fftwf_plan_s, PlanDestroy>;

template <typename T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftwf_malloc(sizeof(T) * n)));
}

// Pair of real <-> half-complex transforms of length n sharing one buffer set.
class RealFft {
 public:
  explicit RealFft(int n)
      : n_(n), real_(fftw_alloc<float>(n)), spectrum_(fftw_alloc<fftwf_complex>(n / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    forward_.reset(fftwf_plan_dft_r2c_1d(n, real_.get(), spectrum_.get(), FFTW_ESTIMATE));
    inverse_.reset(fftwf_plan_dft_c2r_1d(n, spectrum_.get(), real_.get(), FFTW_ESTIMATE));
  }

  int size() const { return n_; }
  float* real() { return real_.get(); }
  fftwf_complex* spectrum() { return spectrum_.get(); }
  void forward() { fftwf_execute(forward_.get()); }
  // Unnormalized, as FFTW: inverse(forward(x)) == n * x.
  void inverse() { fftwf_execute(inverse_.get()); }

 private:
  int n_;
  FftwBuffer<float> real_;
  FftwBuffer<fftwf_complex> spectrum_;
  Plan forward_;
  Plan inverse_;
};

int padded_length(int detectors) {
  int n = 1;
  while (n < 2 * detectors) n *= 2;
  return n;
}

// Frequency response of the band-limited discrete ramp kernel (spatial form,
// so the DC term is correct), optionally Hann-windowed.
std::vector<float> ramp_response(RealFft& fft, double tau, FbpFilter filter) {
  const int n = fft.size();
  float* h = fft.real();
  for (int i = 0; i < n; ++i) {
    const int k = i <= n / 2 ? i : i - n;
    double v = 0.0;
    if (k == 0)
      v = 1.0 / (4.0 * tau * tau);
    else if (k % 2 != 0)
      v = -1.0 / (std::numbers::pi * std::numbers::pi * double(k) * k * tau * tau);
    h[i] = static_cast<float>(v);
  }
  fft.forward();
  std::vector<float> response(static_cast<std::size_t>(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    double v = fft.spectrum()[k][0];
    if (filter == FbpFilter::hann) v *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * k / n));
    response[k] = static_cast<float>(v);
  }
  return response;
}

}  // namespace

Image fbp(const Sinogram& s, const Geometry& g, FbpFilter filter) {
  require_sinogram(s, g, "fbp");
  if (g.detector_count < 2) throw ConfigError("fbp: at least two detector bins are required");
  const int D = g.detector_count;
  const double tau = g.detector_spacing * g.pixel_size;
  RealFft fft(padded_length(D));
  const int n = fft.size();
  const std::vector<float> response = ramp_response(fft, tau, filter);

  // Filtered views: q = tau * (p conv h), via the zero-padded FFT.
  std::vector<float> filtered(static_cast<std::size_t>(g.num_angles()) * D);
  const float norm = static_cast<float>(tau / n);
  for (int a = 0; a < g.num_angles(); ++a) {
    float* buf = fft.real();
    std::fill(buf, buf + n, 0.0f);
    for (int j = 0; j < D; ++j) buf[j] = s.at(a, j);
    fft.forward();
    for (int k = 0; k <= n / 2; ++k) {
      fft.spectrum()[k][0] *= response[k];
      fft.spectrum()[k][1] *= response[k];
    }
    fft.inverse();
    for (int j = 0; j < D; ++j) filtered[static_cast<std::size_t>(a) * D + j] = buf[j] * norm;
  }

  // Pixel-driven back-projection with linear interpolation between bins.
  const int H = g.height, W = g.width;
  std::vector<double> acc(static_cast<std::size_t>(H) * W, 0.0);
  const double cx = 0.5 * (W - 1), cy = 0.5 * (H - 1), dc = 0.5 * (D - 1);
  for (int a = 0; a < g.num_angles(); ++a) {
    const double ca = std::cos(g.angles[a]), sa = std::sin(g.angles[a]);
    const float* q = filtered.data() + static_cast<std::size_t>(a) * D;
    for (int r = 0; r < H; ++r) {
      const double y = cy - r;
      for (int c = 0; c < W; ++c) {
        const double x = c - cx;
        const double u = (x * ca + y * sa) / g.detector_spacing + dc;
        const double uf = std::floor(u);
        const int j = static_cast<int>(uf);
        const double f = u - uf;
        double v = 0.0;
        if (j >= 0 && j < D) v += (1.0 - f) * q[j];
        if (j + 1 >= 0 && j + 1 < D) v += f * q[j + 1];
        acc[static_cast<std::size_t>(r) * W + c] += v;
      }
    }
  }
  Image out(H, W);
  const double factor = std::numbers::pi / g.num_angles();
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double v = acc[i] * factor;
    out.values[i] = std::isfinite(v) ? static_cast<float>(v) : 0.0f;
  }
  return out;
}

}  // namespace bdgd::tomo
