#ifndef RBR_IO_HPP_
#define RBR_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbr/core.hpp"
#include "rbr/decoders.hpp"
#include "rbr/multi_image.hpp"
#include "rbr/retrieval.hpp"
#include "rbr/slic.hpp"

// Binary formats share a 5-byte header (4 ASCII magic bytes, 1 version byte)
// followed by little-endian fields. Decoders reject unknown magic or version
// before touching the payload, report the byte offset of any truncation, and
// refuse trailing bytes. Byte-level layouts live in docs/formats.md.

namespace rbr {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kFormatVersion = 1;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// RBRF: u32 dim, grid_h, grid_w, patch, image_h, image_w; f32 channel-major.
Bytes encode_feature_grid(const FeatureGrid& grid);
FeatureGrid decode_feature_grid(std::span<const std::uint8_t> bytes);
void save_feature_grid(const std::filesystem::path& path, const FeatureGrid& grid);
FeatureGrid load_feature_grid(const std::filesystem::path& path);

// RBLM: u32 height, width, num_classes; u16 labels row-major.
Bytes encode_label_map(const LabelMap& map);
LabelMap decode_label_map(std::span<const std::uint8_t> bytes);
void save_label_map(const std::filesystem::path& path, const LabelMap& map);
LabelMap load_label_map(const std::filesystem::path& path);

// RBRV: u32 count, dim; records of u32 image_id, u32 region_id, dim x f32.
Bytes encode_region_vectors(std::span<const RegionVector> vectors);
std::vector<RegionVector> decode_region_vectors(std::span<const std::uint8_t> bytes);
void save_region_vectors(const std::filesystem::path& path,
                         std::span<const RegionVector> vectors);
std::vector<RegionVector> load_region_vectors(const std::filesystem::path& path);

// RBPM: u32 height, width; f32 xyz interleaved; validity bitmap, LSB first.
Bytes encode_point_map(const PointMap& map);
PointMap decode_point_map(std::span<const std::uint8_t> bytes);
void save_point_map(const std::filesystem::path& path, const PointMap& map);
PointMap load_point_map(const std::filesystem::path& path);

// RBDC: decoder settings then named parameter tensors stored as f32.
Bytes encode_decoder(const Decoder& decoder);
std::unique_ptr<Decoder> decode_decoder(std::span<const std::uint8_t> bytes);
void save_decoder(const std::filesystem::path& path, const Decoder& decoder);
std::unique_ptr<Decoder> load_decoder(const std::filesystem::path& path);

// RBIX: u32 rows, dim; u8 normalized; u32 image ids, u32 region ids, f32 rows.
Bytes encode_index(const RetrievalIndex& index);
RetrievalIndex decode_index(std::span<const std::uint8_t> bytes);
void save_index(const std::filesystem::path& path, const RetrievalIndex& index);
RetrievalIndex load_index(const std::filesystem::path& path);

// RBTB: u32 tokens, dim, truncated, missing_geometry; f32 tokens; u8 mask;
// u32 (image_id, region_id, frame_index) per token.
Bytes encode_token_batch(const TokenBatch& batch);
TokenBatch decode_token_batch(std::span<const std::uint8_t> bytes);
void save_token_batch(const std::filesystem::path& path, const TokenBatch& batch);
TokenBatch load_token_batch(const std::filesystem::path& path);

// ---- mask sets (JSON) -------------------------------------------------------

/// {"height", "width", "masks": [{"id", "source", "rle"}]} with row-major,
/// background-first runs. Mask ids are the positions in the set.
std::string encode_mask_set(const MaskSet& set);

/// Accepts an optional top-level "rle_order": "row-major" | "column-major".
/// Bad run sums raise kFormat naming the offending mask id.
MaskSet decode_mask_set(std::string_view json_text);
void save_mask_set(const std::filesystem::path& path, const MaskSet& set);
MaskSet load_mask_set(const std::filesystem::path& path);

/// Re-encode background-first runs between row-major and column-major order.
std::vector<std::uint32_t> rle_row_to_column_major(ImageDims dims,
                                                   std::span<const std::uint32_t> runs);
std::vector<std::uint32_t> rle_column_to_row_major(ImageDims dims,
                                                   std::span<const std::uint32_t> runs);

// ---- images -----------------------------------------------------------------

/// Binary PPM (P6, maxval 255) with optional '#' comments in the header.
RgbImage decode_ppm(std::span<const std::uint8_t> bytes);
Bytes encode_ppm(const RgbImage& image);
RgbImage load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const RgbImage& image);

}  // namespace rbr

#endif  // RBR_IO_HPP_
