#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "bdgd/io/config.hpp"
#include "bdgd/model/cascade.hpp"

namespace bdgd::io {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Empty cascade whose geometry, block config and snapshot come from `config`.
model::Cascade cascade_shell(const RunConfig& config);

/// "BDGDCKPT", u16 version, u32 snapshot length + UTF-8 run config, u32 block
/// count, then per block a u16 tensor count and the named tensors
/// (u16 name length, name, u8 rank, u32 dims, f32 payload), all little-endian.
/// The snapshot must be a run config describing the cascade's geometry and
/// block config; it is what makes the file loadable on its own.
std::string encode_checkpoint(const model::Cascade& cascade);
model::Cascade decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const model::Cascade& cascade);
model::Cascade load_checkpoint(const std::filesystem::path& path);

/// Bitwise equality of every parameter, plus geometry, config and snapshot.
bool identical(const model::Cascade& a, const model::Cascade& b);

}  // namespace bdgd::io
