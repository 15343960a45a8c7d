#include "bdgd/io/dataset_file.hpp"

#include <json.hpp>
#include <limits>

#include "bdgd/errors.hpp"
#include "bdgd/io/binary.hpp"

namespace bdgd::io {

using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kMagic = "BDGDDATA";

std::uint16_t narrow16(int v, const char* what) {
  if (v < 0 || v > std::numeric_limits<std::uint16_t>::max())
    throw ConfigError(std::string("dataset: ") + what + " does not fit the container header");
  return static_cast<std::uint16_t>(v);
}

}  // namespace

std::string encode_dataset(const std::vector<phantoms::DatasetRecord>& records, const tomo::Geometry& g) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(records.size()));
  w.u16(narrow16(g.height, "height"));
  w.u16(narrow16(g.width, "width"));
  w.u16(narrow16(g.num_angles(), "angle count"));
  w.u16(narrow16(g.detector_count, "detector count"));
  for (const auto& r : records) {
    tomo::require_image(r.ground_truth, g, "encode_dataset");
    tomo::require_sinogram(r.sinogram, g, "encode_dataset");
    tomo::require_image(r.x0, g, "encode_dataset");
    w.f32s(r.ground_truth.values);
    w.f32s(r.sinogram.values);
    w.f32s(r.x0.values);
  }
  return w.take();
}

namespace {

DatasetHeader read_header(ByteReader& r) {
  if (r.bytes(kMagic.size()) != kMagic) throw DataError("dataset: bad magic (not a dataset container)");
  DatasetHeader h;
  h.version = r.u16();
  if (h.version != kDatasetVersion)
    throw DataError("dataset: unsupported version " + std::to_string(h.version) + " (this build reads version " +
                    std::to_string(kDatasetVersion) + ")");
  h.count = r.u32();
  h.height = r.u16();
  h.width = r.u16();
  h.num_angles = r.u16();
  h.detector_count = r.u16();
  return h;
}

}  // namespace

DatasetHeader read_dataset_header(std::string_view bytes) {
  ByteReader r(bytes, "dataset");
  return read_header(r);
}

std::vector<phantoms::DatasetRecord> decode_dataset(std::string_view bytes, DatasetHeader* header) {
  ByteReader r(bytes, "dataset");
  const DatasetHeader h = read_header(r);
  const std::size_t pixels = std::size_t(h.height) * h.width;
  const std::size_t bins = std::size_t(h.num_angles) * h.detector_count;
  if (r.remaining() != std::size_t(h.count) * 4 * (2 * pixels + bins))
    throw DataError("dataset: payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                    std::to_string(std::size_t(h.count) * 4 * (2 * pixels + bins)));
  std::vector<phantoms::DatasetRecord> out;
  out.reserve(h.count);
  for (std::uint32_t i = 0; i < h.count; ++i) {
    phantoms::DatasetRecord rec;
    rec.ground_truth = Image(h.height, h.width, r.f32s(pixels));
    rec.sinogram = tomo::Sinogram(h.num_angles, h.detector_count);
    rec.sinogram.values = r.f32s(bins);
    rec.x0 = Image(h.height, h.width, r.f32s(pixels));
    out.push_back(std::move(rec));
  }
  if (header) *header = h;
  return out;
}

std::string manifest_to_json(const phantoms::DatasetManifest& m) {
  const auto& g = m.geometry;
  json j;
  j["format"] = "BDGDDATA";
  j["version"] = kDatasetVersion;
  j["count"] = m.count;
  j["seed"] = m.seed;
  j["noise_level"] = m.noise_level;
  j["noise_model"] = "gaussian, std = noise_level * mean(|sinogram|)";
  j["fbp_filter"] = m.filter == tomo::FbpFilter::hann ? "hann" : "ram_lak";
  j["rng"] = m.rng_algorithm;
  j["geometry"] = {{"height", g.height},           {"width", g.width},
                   {"pixel_size", g.pixel_size},   {"detector_count", g.detector_count},
                   {"detector_spacing", g.detector_spacing}, {"angles", g.angles}};
  const auto& e = m.ellipses;
  j["ellipses"] = {{"min_count", e.min_count},         {"max_count", e.max_count},
                   {"min_axis", e.min_axis},           {"max_axis", e.max_axis},
                   {"min_intensity", e.min_intensity}, {"max_intensity", e.max_intensity}};
  return j.dump(2) + "\n";
}

phantoms::DatasetManifest manifest_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    phantoms::DatasetManifest m;
    if (j.at("format") != "BDGDDATA") throw DataError("manifest: not a dataset manifest");
    m.count = j.at("count").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.noise_level = j.at("noise_level").get<double>();
    const auto filter = j.at("fbp_filter").get<std::string>();
    if (filter != "hann" && filter != "ram_lak") throw DataError("manifest: unknown fbp_filter '" + filter + "'");
    m.filter = filter == "hann" ? tomo::FbpFilter::hann : tomo::FbpFilter::ram_lak;
    m.rng_algorithm = j.at("rng").get<std::string>();
    const auto& g = j.at("geometry");
    m.geometry.height = g.at("height").get<int>();
    m.geometry.width = g.at("width").get<int>();
    m.geometry.pixel_size = g.at("pixel_size").get<double>();
    m.geometry.detector_count = g.at("detector_count").get<int>();
    m.geometry.detector_spacing = g.at("detector_spacing").get<double>();
    m.geometry.angles = g.at("angles").get<std::vector<double>>();
    const auto& e = j.at("ellipses");
    m.ellipses.min_count = e.at("min_count").get<int>();
    m.ellipses.max_count = e.at("max_count").get<int>();
    m.ellipses.min_axis = e.at("min_axis").get<double>();
    m.ellipses.max_axis = e.at("max_axis").get<double>();
    m.ellipses.min_intensity = e.at("min_intensity").get<double>();
    m.ellipses.max_intensity = e.at("max_intensity").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
}

std::filesystem::path manifest_path(const std::filesystem::path& container) {
  return std::filesystem::path(container.string() + ".manifest.json");
}

void save_dataset(const std::filesystem::path& path, const phantoms::Dataset& dataset) {
  write_file(path, encode_dataset(dataset.records, dataset.manifest.geometry));
  write_file(manifest_path(path), manifest_to_json(dataset.manifest));
}

phantoms::Dataset load_dataset(const std::filesystem::path& path) {
  phantoms::Dataset ds;
  DatasetHeader h;
  try {
    ds.records = decode_dataset(read_file(path), &h);
    ds.manifest = manifest_from_json(read_file(manifest_path(path)));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const auto& g = ds.manifest.geometry;
  if (g.height != h.height || g.width != h.width || g.num_angles() != h.num_angles ||
      g.detector_count != h.detector_count || ds.manifest.count != h.count)
    throw DataError(path.string() + ": container header disagrees with its manifest");
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": manifest geometry invalid: " + e.what());
  }
  return ds;
}

}  // namespace bdgd::io
