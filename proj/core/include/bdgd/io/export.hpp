#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bdgd/image.hpp"

namespace bdgd::io {

/// Binary 16-bit PGM (maxval 65535), mapping [lo, hi] linearly onto [0, 65535] with clamping.
std::string encode_pgm16(const Image& image, double lo, double hi);
/// Raw f32 little-endian row-major values, no header.
std::string encode_f32(const Image& image);
Image decode_f32(std::string_view bytes, int height, int width);

/// <stem>.pgm over the image's own [min, max] and the lossless <stem>.f32.
void export_image(const std::filesystem::path& stem, const Image& image);
/// <stem>.f32 raw, plus <stem>_normalized.f32 and <stem>.pgm scaled by the map's maximum.
void export_variance(const std::filesystem::path& stem, const Image& variance);

/// Delimited text table with a header row.
class Table {
 public:
  explicit Table(std::vector<std::string> header, char delimiter = '\t');

  void add(std::vector<std::string> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

  /// Parses text produced by str(); throws DataError on ragged rows.
  static Table parse(std::string_view text, char delimiter = '\t');
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& data() const { return rows_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  char delimiter_;
};

}  // namespace bdgd::io
