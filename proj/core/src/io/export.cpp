#include "bdgd/io/export.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bdgd/errors.hpp"
#include "bdgd/io/binary.hpp"

namespace bdgd::io {

std::string encode_pgm16(const Image& image, double lo, double hi) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (float v : image.values) {
    const double t = std::clamp((double(v) - lo) / span, 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(t * 65535.0));
    out.push_back(static_cast<char>(q >> 8));  // PGM samples are big-endian
    out.push_back(static_cast<char>(q & 0xff));
  }
  return out;
}

std::string encode_f32(const Image& image) {
  ByteWriter w;
  w.f32s(image.values);
  return w.take();
}

Image decode_f32(std::string_view bytes, int height, int width) {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  if (bytes.size() != 4 * n)
    throw DataError("f32 image: " + std::to_string(bytes.size()) + " bytes, expected " + std::to_string(4 * n));
  ByteReader r(bytes, "f32 image");
  return Image(height, width, r.f32s(n));
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const std::string& suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

void export_image(const std::filesystem::path& stem, const Image& image) {
  const auto [lo, hi] = std::minmax_element(image.values.begin(), image.values.end());
  write_file(with_suffix(stem, ".pgm"), encode_pgm16(image, *lo, *hi));
  write_file(with_suffix(stem, ".f32"), encode_f32(image));
}

void export_variance(const std::filesystem::path& stem, const Image& variance) {
  const float peak = *std::max_element(variance.values.begin(), variance.values.end());
  Image normalized = variance;
  if (peak > 0.0f)
    for (auto& v : normalized.values) v /= peak;
  write_file(with_suffix(stem, ".f32"), encode_f32(variance));
  write_file(with_suffix(stem, "_normalized.f32"), encode_f32(normalized));
  write_file(with_suffix(stem, ".pgm"), encode_pgm16(normalized, 0.0, 1.0));
}

Table::Table(std::vector<std::string> header, char delimiter) : header_(std::move(header)), delimiter_(delimiter) {
  if (header_.empty()) throw std::invalid_argument("Table: empty header");
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != header_.size())
    throw std::invalid_argument("Table: row has " + std::to_string(row.size()) + " fields, header has " +
                                std::to_string(header_.size()));
  rows_.push_back(std::move(row));
}

std::string Table::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += delimiter_;
      out += fields[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void Table::write(const std::filesystem::path& path) const { write_file(path, str()); }

Table Table::parse(std::string_view text, char delimiter) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto split = [delimiter](const std::string& s) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ls(s);
    while (std::getline(ls, field, delimiter)) out.push_back(field);
    if (!s.empty() && s.back() == delimiter) out.emplace_back();
    return out;
  };
  if (!std::getline(in, line)) throw DataError("table: empty input");
  Table t(split(line), delimiter);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header_.size()) throw DataError("table: ragged row '" + line + "'");
    t.rows_.push_back(std::move(row));
  }
  return t;
}

}  // namespace bdgd::io
