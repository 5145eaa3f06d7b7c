#ifndef RBR_POOLING_HPP_
#define RBR_POOLING_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "rbr/core.hpp"

namespace rbr {

enum class Resample { kUpsampleFeatures, kDownsampleMasks };
enum class Reducer { kAverage, kMax };
enum class Interpolation { kBilinear, kNearest };

std::string_view resample_name(Resample r);
std::string_view reducer_name(Reducer r);

struct PoolConfig {
  Resample resample = Resample::kUpsampleFeatures;
  Reducer reducer = Reducer::kAverage;
  Interpolation interpolation = Interpolation::kBilinear;
  /// Adds a fixed sinusoidal patch-grid embedding before resampling.
  bool add_grid_posemb = false;
  unsigned threads = 1;
};

/// Per-pixel features, channel-major: data[(c * h + y) * w + x].
struct DenseGrid {
  std::uint32_t dim = 0;
  ImageDims dims;
  std::vector<float> data;

  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * dims.height + y) * dims.width + x];
  }
};

/// Source sample for one output coordinate along one axis:
/// value = (1 - weight) * v[lo] + weight * v[hi].
struct AxisTap {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  double weight = 0.0;
};

/// Half-pixel-centre taps mapping `out_size` samples onto `in_size` cells.
std::vector<AxisTap> axis_taps(std::uint32_t in_size, std::uint32_t out_size,
                               Interpolation interpolation);

/// Resamples every channel of the patch grid to the image size.
DenseGrid upsample_features(const FeatureGrid& grid,
                            Interpolation interpolation = Interpolation::kBilinear);

/// Patch-grid occupancy: a cell is set when at least half of the image pixels
/// it covers are foreground. May be entirely empty for small masks.
struct CellMask {
  std::uint32_t grid_h = 0;
  std::uint32_t grid_w = 0;
  std::vector<std::uint8_t> cells;

  std::size_t count() const;
  bool empty() const { return count() == 0; }
};

CellMask downsample_mask(const RegionMask& mask, std::uint32_t grid_h,
                         std::uint32_t grid_w);

/// Reduces the dense features under the mask. Average accumulates in double in
/// row-major order and rounds once to float.
RegionVector pool_region(const DenseGrid& dense, const RegionMask& mask,
                         Reducer reducer);

/// Same result as upsample_features + pool_region, evaluating only the pixels
/// under the mask.
RegionVector pool_region_upsampled(const FeatureGrid& grid,
                                   const RegionMask& mask, Reducer reducer,
                                   Interpolation interpolation = Interpolation::kBilinear);

/// Reduces patch features over the set cells; nullopt for an empty cell mask.
std::optional<RegionVector> pool_cells(const FeatureGrid& grid,
                                       const CellMask& cells, Reducer reducer);

/// Copy of the grid with a sinusoidal (row, col) embedding of each patch
/// centre added to the first 4 * floor(d / 4) channels.
FeatureGrid with_grid_posemb(const FeatureGrid& grid);

struct EncodedImage {
  /// One vector per surviving mask, in input order; region_id is the index of
  /// the mask in the input set.
  std::vector<RegionVector> vectors;
  /// Indices of masks that vanished under kDownsampleMasks.
  std::vector<std::size_t> vanished;
};

EncodedImage encode_image(const FeatureGrid& grid, const MaskSet& set,
                          const PoolConfig& config, std::uint32_t image_id = 0);

}  // namespace rbr

#endif  // RBR_POOLING_HPP_
