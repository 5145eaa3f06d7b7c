#ifndef RBR_SLIC_HPP_
#define RBR_SLIC_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "rbr/core.hpp"

namespace rbr {

struct SlicConfig {
  std::uint32_t num_components = 50;
  double compactness = 8.0;
  std::uint32_t max_iters = 10;
  /// Components below this size are merged into a neighbour. Defaults to
  /// S^2 / 4 with S = sqrt(h * w / num_components).
  std::optional<std::uint32_t> min_component_px;

  void validate() const;
};

/// 8-bit RGB, interleaved, row-major.
struct RgbImage {
  ImageDims dims;
  std::vector<std::uint8_t> pixels;

  void validate() const;
};

/// CIELAB, interleaved (L, a, b) per pixel.
struct LabImage {
  ImageDims dims;
  std::vector<double> values;
};

/// sRGB (D65) to CIELAB.
LabImage rgb_to_lab(const RgbImage& image);

struct SeedGrid {
  std::uint32_t rows = 1;
  std::uint32_t cols = 1;
};

/// Seed lattice with rows * cols <= k. Picks the lattice minimising
/// |ln(rows*cols / k)| + 0.5 |ln(cell aspect)|; ties prefer more columns.
SeedGrid slic_seed_grid(ImageDims dims, std::uint32_t num_components);

struct SlicTrace {
  /// Sum of squared SLIC distances after each assignment step.
  std::vector<double> iteration_costs;
  std::uint32_t seeds = 0;
  /// Components merged away during connectivity enforcement.
  std::uint32_t merged_components = 0;
};

/// Local k-means superpixels. The result is a partition of the image into
/// 4-connected masks (source kSlic), ordered by their first raster pixel.
MaskSet slic_segment(const RgbImage& image, const SlicConfig& config,
                     SlicTrace* trace = nullptr);

}  // namespace rbr

#endif  // RBR_SLIC_HPP_
