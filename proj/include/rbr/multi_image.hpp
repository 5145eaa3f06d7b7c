#ifndef RBR_MULTI_IMAGE_HPP_
#define RBR_MULTI_IMAGE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rbr/core.hpp"
#include "rbr/decoders.hpp"

namespace rbr {

/// Per-pixel world coordinates in meters. xyz is interleaved (x, y, z),
/// row-major; valid holds one 0/1 byte per pixel.
struct PointMap {
  ImageDims dims;
  std::vector<float> xyz;
  std::vector<std::uint8_t> valid;

  void validate() const;
  std::size_t valid_count() const;
};

/// Axis-aligned box over the valid points of a scene.
struct SceneBounds {
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{0.0, 0.0, 0.0};
};

/// Bounds over every valid point of every map; nullopt when none is valid.
std::optional<SceneBounds> scene_bounds(std::span<const PointMap> maps);

/// Sinusoid of the mask centroid, normalised as ((row + 0.5) / h,
/// (col + 0.5) / w) so a full-image mask sits at (0.5, 0.5).
std::vector<float> embed_2d(const RegionMask& mask, ImageDims dims, std::size_t emb_dim);

struct Embedding3d {
  std::vector<float> values;
  /// False when no valid point lies under the mask; values are then zero.
  bool has_geometry = false;
  /// Mean of the valid points in meters (meaningful only with geometry).
  std::array<double, 3> centroid{0.0, 0.0, 0.0};
};

/// Mean valid point under the mask, mapped to [0, 1]^3 by `bounds` (a zero
/// extent maps to 0.5), then a 3D sinusoid. emb_dim must be divisible by 6.
Embedding3d embed_3d(const RegionMask& mask, const PointMap& points,
                     const SceneBounds& bounds, std::size_t emb_dim);

/// Same, with the bounds taken from this point map alone.
Embedding3d embed_3d(const RegionMask& mask, const PointMap& points, std::size_t emb_dim);

struct TokenProvenance {
  std::uint32_t image_id = 0;
  std::uint32_t region_id = 0;
  std::uint32_t frame_index = 0;

  bool operator==(const TokenProvenance&) const = default;
};

inline constexpr std::uint32_t kPaddingId = 0xFFFFFFFFu;

/// T tokens of width `dim`, row-major. Padded tokens are all zero, carry
/// attention_mask 0 and kPaddingId provenance.
struct TokenBatch {
  std::size_t dim = 0;
  std::vector<float> tokens;
  std::vector<std::uint8_t> attention_mask;
  std::vector<TokenProvenance> provenance;
  /// Regions dropped to fit the token budget.
  std::size_t truncated = 0;
  /// Tokens whose 3D embedding fell back to zero.
  std::size_t missing_geometry = 0;

  std::size_t size() const { return attention_mask.size(); }
  std::size_t real_count() const;
  const float* token(std::size_t i) const { return tokens.data() + i * dim; }
  void validate() const;
  bool operator==(const TokenBatch&) const = default;
};

/// Decoder input with untargeted tokens; callers fill in the targets.
Sequence to_sequence(const TokenBatch& batch);

// ---- multi-view scenes ------------------------------------------------------

enum class EmbeddingMerge { kConcat, kAdd };

struct SceneTokenConfig {
  EmbeddingMerge merge = EmbeddingMerge::kConcat;
  bool use_2d = true;
  bool use_3d = true;
};

struct SceneToken {
  RegionVector vector;
  std::vector<float> emb_2d;
  std::optional<Embedding3d> emb_3d;
};

/// Region vectors of one image plus their embeddings. region_id indexes
/// `set.masks`. Pass emb_dim 0 to skip an embedding; `points` may be null.
std::vector<SceneToken> make_scene_tokens(std::span<const RegionVector> vectors,
                                          const MaskSet& set, std::size_t dim_2d,
                                          const PointMap* points,
                                          const SceneBounds* bounds, std::size_t dim_3d);

/// One token per region, ordered by (image_id, region_id). Concat appends
/// the enabled embeddings; add requires each to match the vector width.
/// Throws kDimsMismatch on ragged inputs.
TokenBatch assemble_scene_tokens(std::span<const SceneToken> tokens,
                                 const SceneTokenConfig& config);

// ---- video ----------------------------------------------------------------

/// n evenly spaced indices round(i (total - 1) / (n - 1)), halves rounded up.
/// Short videos repeat frames. Throws kInvalidArgument when total is 0.
std::vector<std::uint32_t> sample_frames(std::uint32_t total_frames, std::uint32_t n = 8);

struct FrameRegions {
  std::uint32_t frame_index = 0;
  std::vector<RegionVector> vectors;
  /// Truncation priority; empty means every region counts the same.
  std::vector<std::size_t> pixel_counts;
};

inline constexpr std::size_t kVideoTokenBudget = 400;

/// Tokens in (frame, region) order, zero-padded to `pad_to`. Over budget,
/// frame f keeps floor(pad_to n_f / N) regions (leftover slots go to the
/// largest fractional shares, earlier frames first), choosing its largest
/// regions and preserving their order.
TokenBatch assemble_video_tokens(std::span<const FrameRegions> frames,
                                 std::size_t pad_to = kVideoTokenBudget);

}  // namespace rbr

#endif  // RBR_MULTI_IMAGE_HPP_
