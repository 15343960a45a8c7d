#include "bdgd/io/checkpoint.hpp"

#include <cstring>

#include "bdgd/errors.hpp"
#include "bdgd/io/binary.hpp"

namespace bdgd::io {

namespace {

constexpr std::string_view kMagic = "BDGDCKPT";

void require_described(const model::Cascade& c, const RunConfig& run) {
  if (!(run.geometry() == c.geometry))
    throw ConfigError("checkpoint: config snapshot does not describe the cascade geometry");
  if (!(run.block == c.config))
    throw ConfigError("checkpoint: config snapshot does not describe the block config");
}

RunConfig parse_snapshot(const std::string& snapshot) {
  try {
    return parse_run_config(snapshot);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: bad config snapshot: ") + e.what());
  }
}

}  // namespace

model::Cascade cascade_shell(const RunConfig& config) {
  model::Cascade c;
  c.geometry = config.geometry();
  c.config = config.block;
  c.config_snapshot = format_run_config(config);
  return c;
}

std::string encode_checkpoint(const model::Cascade& cascade) {
  if (cascade.config_snapshot.empty()) throw ConfigError("checkpoint: cascade has no config snapshot");
  require_described(cascade, parse_run_config(cascade.config_snapshot));

  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cascade.config_snapshot.size()));
  w.bytes(cascade.config_snapshot);
  w.u32(static_cast<std::uint32_t>(cascade.depth()));
  for (const auto& block : cascade.blocks) {
    const auto named = block.named();
    w.u16(static_cast<std::uint16_t>(named.size()));
    for (const auto& [name, t] : named) {
      w.u16(static_cast<std::uint16_t>(name.size()));
      w.bytes(name);
      w.u8(static_cast<std::uint8_t>(t.rank()));
      for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
      w.f32s(t.data());
    }
  }
  return w.take();
}

model::Cascade decode_checkpoint(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.bytes(kMagic.size()) != kMagic) throw DataError("checkpoint: bad magic (not a checkpoint file)");
  const auto version = r.u16();
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version) + " (this build reads version " +
                    std::to_string(kCheckpointVersion) + ")");
  const std::string snapshot(r.bytes(r.u32()));
  const RunConfig run = parse_snapshot(snapshot);
  model::Cascade cascade = cascade_shell(run);
  cascade.config_snapshot = snapshot;

  const auto blocks = r.u32();
  for (std::uint32_t b = 0; b < blocks; ++b) {
    // A freshly initialized block fixes the expected names and shapes.
    Rng scratch(0);
    model::BlockParams block = model::init_block(run.block, scratch);
    const auto expected = block.named();
    const auto count = r.u16();
    if (count != expected.size())
      throw DataError("checkpoint: block " + std::to_string(b + 1) + " has " + std::to_string(count) +
                      " tensors, expected " + std::to_string(expected.size()));
    for (const auto& [want_name, tensor] : expected) {
      const std::string name(r.bytes(r.u16()));
      if (name != want_name)
        throw DataError("checkpoint: block " + std::to_string(b + 1) + ": expected tensor '" + want_name +
                        "', found '" + name + "'");
      ndgrad::Shape shape(r.u8());
      for (auto& d : shape) d = r.u32();
      if (shape != tensor.shape())
        throw DataError("checkpoint: tensor '" + name + "' has shape " + ndgrad::to_string(shape) + ", expected " +
                        ndgrad::to_string(tensor.shape()));
      const auto values = r.f32s(static_cast<std::size_t>(tensor.numel()));
      auto dst = ndgrad::Tensor(tensor).mutable_data();
      std::memcpy(dst.data(), values.data(), values.size() * sizeof(float));
    }
    cascade.blocks.push_back(std::move(block));
  }
  if (!r.at_end()) throw DataError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
  return cascade;
}

void save_checkpoint(const std::filesystem::path& path, const model::Cascade& cascade) {
  write_file(path, encode_checkpoint(cascade));
}

model::Cascade load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

bool identical(const model::Cascade& a, const model::Cascade& b) {
  if (!(a.geometry == b.geometry) || !(a.config == b.config) || a.config_snapshot != b.config_snapshot ||
      a.depth() != b.depth())
    return false;
  for (std::size_t k = 0; k < a.depth(); ++k) {
    const auto na = a.blocks[k].named(), nb = b.blocks[k].named();
    if (na.size() != nb.size()) return false;
    for (std::size_t i = 0; i < na.size(); ++i) {
      if (na[i].first != nb[i].first || na[i].second.shape() != nb[i].second.shape()) return false;
      const auto da = na[i].second.data(), db = nb[i].second.data();
      if (std::memcmp(da.data(), db.data(), da.size() * sizeof(float)) != 0) return false;
    }
  }
  return true;
}

}  // namespace bdgd::io
