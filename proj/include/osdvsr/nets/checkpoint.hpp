// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "osdvsr/nets/layers.hpp"

namespace osdvsr::nets {

/// Checkpoint archive, all integers little-endian:
///
///   "OSDCKPT1"                       8-byte magic
///   u32 schema_version               currently 1
///   u32 n, n bytes                   run config snapshot (key = value text)
///   u32 tensor_count
///   per tensor:
///     u32 n, n bytes                 name
///     u32 n, n bytes                 group
///     u32 rank, rank x u32           shape
///     numel x f32                    values, row-major
///   u32 group_count
///   per group (sorted by name):
///     u32 n, n bytes                 group name
///     u64                            FNV-1a of the group's f32 payloads in
///                                    tensor order
///   u64                              FNV-1a of every preceding byte
inline constexpr std::uint32_t kCheckpointSchema = 1;

struct StoredTensor {
  std::string name;
  std::string group;
  std::vector<int> shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint32_t schema = kCheckpointSchema;
  std::string config_text;
  std::vector<StoredTensor> tensors;
  std::map<std::string, std::uint64_t> group_hashes;
  std::uint64_t content_hash = 0;
};

/// Serializes to bytes; the returned checkpoint's content_hash is the trailer.
std::vector<std::byte> serialize_checkpoint(const std::string& config_text, const ParameterList& params,
                                            std::uint64_t* content_hash = nullptr);
Checkpoint parse_checkpoint(const std::vector<std::byte>& bytes);

/// Returns the content hash.
std::uint64_t write_checkpoint(const std::filesystem::path& path, const std::string& config_text,
                               const ParameterList& params);
/// Verifies magic, schema, group hashes and trailer; throws IoError.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies stored values into the live parameters, matched by name. Every
/// live parameter must be present with the same shape.
void load_parameters(const Checkpoint& ckpt, const ParameterList& params);

/// Exact (double-precision) fingerprint per group, for audits.
std::map<std::string, std::uint64_t> group_hashes(const ParameterList& params);
std::uint64_t parameters_hash(const ParameterList& params);

}  // namespace osdvsr::nets
