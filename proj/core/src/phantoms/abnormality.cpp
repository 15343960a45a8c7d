#include <algorithm>
#include <array>
#include <cctype>
#include <string>

#include "bdgd/errors.hpp"
#include "bdgd/phantoms/phantoms.hpp"

namespace bdgd::phantoms {

namespace {

constexpr int kGlyphW = 5, kGlyphH = 7;

// Rows top to bottom, bit 4 = leftmost column.
struct Glyph {
  char ch;
  std::array<unsigned char, kGlyphH> rows;
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
};

const Glyph& glyph_for(char ch) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (const auto& g : kFont)
    if (g.ch == up) return g;
  throw ConfigError(std::string("text_mask: no glyph for character '") + ch + "'");
}

}  // namespace

Image insert_abnormality(const Image& x, const Mask& mask, float intensity) {
  if (mask.height != x.height || mask.width != x.width)
    throw ShapeError("insert_abnormality: mask " + std::to_string(mask.height) + "x" +
                     std::to_string(mask.width) + " does not match image " + std::to_string(x.height) +
                     "x" + std::to_string(x.width));
  Image out = x;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (mask.bits[i]) out.values[i] = intensity;
    out.values[i] = std::clamp(out.values[i], 0.0f, 1.0f);
  }
  return out;
}

Mask text_mask(std::string_view text, int height, int width) {
  Mask mask(height, width);
  if (text.empty()) return mask;
  // One blank column between glyphs.
  const int cols = static_cast<int>(text.size()) * (kGlyphW + 1) - 1;
  const int cell = std::max(1, std::min((width * 7 / 8) / cols, (height / 3) / kGlyphH));
  const int left = (width - cols * cell) / 2;
  const int top = (height - kGlyphH * cell) / 2;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const Glyph& g = glyph_for(text[i]);
    const int gx = left + static_cast<int>(i) * (kGlyphW + 1) * cell;
    for (int gr = 0; gr < kGlyphH; ++gr)
      for (int gc = 0; gc < kGlyphW; ++gc) {
        if (!((g.rows[gr] >> (kGlyphW - 1 - gc)) & 1)) continue;
        for (int dy = 0; dy < cell; ++dy)
          for (int dx = 0; dx < cell; ++dx) {
            const int r = top + gr * cell + dy, c = gx + gc * cell + dx;
            if (r >= 0 && r < height && c >= 0 && c < width) mask.set(r, c);
          }
      }
  }
  return mask;
}

Mask checkerboard_mask(int height, int width) {
  Mask mask(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) mask.set(r, c, (r + c) % 2 == 0);
  return mask;
}

}  // namespace bdgd::phantoms
