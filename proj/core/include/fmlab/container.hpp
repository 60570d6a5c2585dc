#pragma once

// One binary container format backs every artifact file (.fmds datasets,
// .fmck checkpoints, .fmep endpoint sets, .fmsc score tables):
//
//   magic "FMLB" | u32 version | 4-char kind | u64 header_len | JSON header
//   | u64 payload_count | payload (little-endian f64) | u64 FNV-1a digest
//
// The digest covers every preceding byte; load verifies version, kind and
// digest and fails loudly on any mismatch. Round-trips are bit-identical.

#include <cstdint>
#include <string>
#include <vector>

#include "vendor_json.hpp"

namespace fmlab {

inline constexpr uint32_t kContainerVersion = 1;

struct Container {
  std::string kind;  // 4 chars
  nlohmann::json header;
  std::vector<double> payload;
};

// Writes atomically (temp file + rename). Throws std::runtime_error on I/O
// failure.
void write_container(const std::string& path, const Container& c);

// Throws std::runtime_error on missing file, bad magic, version mismatch,
// kind mismatch (when expected_kind nonempty) or digest mismatch.
Container read_container(const std::string& path,
                         const std::string& expected_kind = "");

// Digest of the container as it would be written (content address).
uint64_t container_digest(const Container& c);

}  // namespace fmlab
