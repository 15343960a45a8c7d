#pragma once

#include <cstddef>
#include <vector>

namespace bdgd {

/// Row-major 2-D grid of attenuation values; row 0 is the top of the image.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  Image() = default;
  Image(int h, int w, float fill = 0.0f);
  Image(int h, int w, std::vector<float> v);

  std::size_t size() const { return values.size(); }
  float& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  float at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width;
  }

  bool operator==(const Image&) const = default;
};

/// Binary mask over an image grid.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<unsigned char> bits;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  bool test(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col] != 0; }
  void set(int row, int col, bool on = true) {
    bits[static_cast<std::size_t>(row) * width + col] = on ? 1 : 0;
  }
  std::size_t count() const;
};

}  // namespace bdgd
