#pragma once

#include <cstdint>
#include <filesystem>

#include "porflow/picnn/picnn.hpp"

// On-disk checkpoint set: one `ckpt_{k:04}.bin` per timestep plus
// `manifest.json`.
//
// Binary container (little-endian):
//   8  bytes  magic "PFCKPT\0\0"
//   u32       format version
//   u32       step k
//   u64       network spec hash
//   u32       tensor count
//   per tensor: u64 element count, then float32 values
//   u64       FNV-1a 64 checksum of every preceding byte
//
// The manifest lists the network spec and its hash, scaling parameters,
// control bounds, tensor names and shapes in payload order, and per-step
// training outcomes. It carries no timestamps so reruns are byte-identical.

namespace porflow::picnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoints(const CheckpointSet& set, const std::filesystem::path& dir);

// With `expected` set, a manifest written for a different network raises
// SpecHashMismatch.
CheckpointSet load_checkpoints(const std::filesystem::path& dir,
                               const nn::NetworkSpec* expected = nullptr);

std::string checkpoint_file_name(int step);

}  // namespace porflow::picnn
