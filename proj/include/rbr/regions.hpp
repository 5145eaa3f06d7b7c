#ifndef RBR_REGIONS_HPP_
#define RBR_REGIONS_HPP_

#include <cstddef>

#include "rbr/core.hpp"

namespace rbr {

inline constexpr std::size_t kDefaultMinUncovered = 300;

struct CoverageStats {
  double covered_fraction = 0.0;
  std::size_t region_count = 0;
  double mean_region_px = 0.0;
};

/// True when the masks are pairwise disjoint and cover every pixel.
bool is_partition(const MaskSet& set);

/// Fills SAM coverage gaps with superpixels: every superpixel is clipped to
/// the pixels no SAM mask covers and kept (source kSlic) when at least
/// `min_uncovered` pixels survive. Input SAM masks are returned unchanged and
/// first, followed by the additions in superpixel order.
///
/// Throws kDimsMismatch for mismatched dims and kNonPartitionSlic when the
/// superpixels do not partition the image.
MaskSet augment_with_slic(const MaskSet& sam, const MaskSet& slic,
                          std::size_t min_uncovered = kDefaultMinUncovered);

CoverageStats coverage_stats(const MaskSet& set);

}  // namespace rbr

#endif  // RBR_REGIONS_HPP_
