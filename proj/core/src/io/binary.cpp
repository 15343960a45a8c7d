#include "bdgd/io/binary.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "bdgd/errors.hpp"

namespace bdgd::io {

namespace {

template <typename T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace

void ByteWriter::u16(std::uint16_t v) { put_le(buf_, v); }
void ByteWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void ByteWriter::f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f32s(std::span<const float> values) {
  buf_.reserve(buf_.size() + 4 * values.size());
  for (float v : values) f32(v);
}

const char* ByteReader::take(std::size_t n) {
  if (n > data_.size() - pos_)
    throw DataError(what_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                    ", " + std::to_string(data_.size() - pos_) + " left)");
  const char* p = data_.data() + pos_;
  pos_ += n;
  return p;
}

std::uint8_t ByteReader::u8() { return static_cast<std::uint8_t>(*take(1)); }
std::uint16_t ByteReader::u16() { return get_le<std::uint16_t>(take(2)); }
std::uint32_t ByteReader::u32() { return get_le<std::uint32_t>(take(4)); }
std::uint64_t ByteReader::u64() { return get_le<std::uint64_t>(take(8)); }
float ByteReader::f32() { return std::bit_cast<float>(get_le<std::uint32_t>(take(4))); }

std::vector<float> ByteReader::f32s(std::size_t n) {
  if (n > remaining() / 4) take(4 * n);  // throws with a useful message
  std::vector<float> out(n);
  for (auto& v : out) v = f32();
  return out;
}

std::string_view ByteReader::bytes(std::size_t n) { return {take(n), n}; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw DataError("error reading " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("error writing " + path.string());
}

}  // namespace bdgd::io
