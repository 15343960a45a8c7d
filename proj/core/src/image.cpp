#include "bdgd/image.hpp"

#include <algorithm>
#include <string>

#include "bdgd/errors.hpp"

namespace bdgd {

Image::Image(int h, int w, float fill)
    : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {
  if (h < 0 || w < 0) throw ShapeError("Image: negative extent");
}

Image::Image(int h, int w, std::vector<float> v) : height(h), width(w), values(std::move(v)) {
  if (values.size() != static_cast<std::size_t>(h) * w)
    throw ShapeError("Image: " + std::to_string(values.size()) + " values for " +
                     std::to_string(h) + "x" + std::to_string(w) + " grid");
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

}  // namespace bdgd
