#pragma once

// Binary record files shared by model checkpoints and dataset exports.
//
// Layout (all integers little-endian):
//   magic      8 bytes  "RKGNFILE"
//   tag        u32 length + bytes, "<kind>/<version>" e.g. "model/1"
//   meta       u32 length + bytes, kind-specific header
//   records    u32 count, then per record:
//                u32 name length + name bytes
//                u32 rank, rank x u64 extents
//                numel x f64 (IEEE-754 binary64) payload
//
// Model meta: u32 n_widths, n x u64 widths, u8 hidden activation,
//             f64 leaky slope, u8 output activation, u8 frozen flag.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rankgan/nn.hpp"

namespace rankgan {

inline constexpr std::string_view kModelKind = "model";
inline constexpr std::string_view kDatasetKind = "dataset";
inline constexpr std::uint32_t kFormatVersion = 1;

struct Record {
  std::string name;
  Tensor value;
};

struct RecordFile {
  std::string kind;
  std::uint32_t version = kFormatVersion;
  std::vector<std::uint8_t> meta;
  std::vector<Record> records;
};

std::vector<std::uint8_t> encode_records(const RecordFile& file);
// `source` names the origin (usually the path) in error messages. Throws
// CheckpointError on bad magic, truncation, trailing bytes, kind or version
// mismatch.
RecordFile decode_records(std::span<const std::uint8_t> bytes, std::string_view expected_kind,
                          std::string_view source);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
// Writes via a temporary sibling then renames. Throws IoError.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_model(const Mlp& model);
Mlp decode_model(std::span<const std::uint8_t> bytes, std::string_view source);
void save_model(const std::filesystem::path& path, const Mlp& model);
Mlp load_model(const std::filesystem::path& path);

// Loads, re-encodes, and compares bytes. Throws CheckpointError on mismatch.
void verify_checkpoint(const std::filesystem::path& path);

// Hex SHA-256 over parameter names, shapes and payloads.
std::string params_digest(const ModelParams& params);

}  // namespace rankgan
