#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fiqopt/types.hpp"

// Embedding and score file formats.
//
// FEMB binary layout (all integers little-endian):
//   bytes 0..3   magic "FEMB"
//   u32          version, currently 1
//   u64          record count N
//   u32          dimension D (0 only when N == 0)
//   N records:   u16 image_id length, image_id bytes,
//                u16 identity_id length, identity_id bytes,
//                D float32 components
//
// CSV embedding alternative: header "image_id,identity_id,v0,...,v{D-1}",
// one record per row. Quality scores: header "image_id,score". Floats are
// parsed as binary32 and written with the shortest round-trip form
// (std::to_chars), so a load/save cycle is bit-exact.

namespace fiqopt {

// Loads embeddings from FEMB or CSV, sniffing the FEMB magic.
std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path);

void write_embeddings_binary(const std::filesystem::path& path, std::span<const EmbeddingRecord> records);
void write_embeddings_csv(const std::filesystem::path& path, std::span<const EmbeddingRecord> records);

QualityTable load_quality_scores(const std::filesystem::path& path);
void write_quality_scores(const std::filesystem::path& path, const QualityTable& table);
void write_quality_scores(std::ostream& out, const QualityTable& table);

// Shortest text that parses back to exactly the same value.
std::string format_float32(float v);
std::string format_double(double v);

// FNV-1a digest of a file's raw bytes, as "fnv1a:<16 hex digits>".
std::string digest_file(const std::filesystem::path& path);

}  // namespace fiqopt
