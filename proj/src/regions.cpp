#include "rbr/regions.hpp"

#include <string>

namespace rbr {

bool is_partition(const MaskSet& set) {
  set.validate();
  std::size_t total = 0;
  for (const RegionMask& m : set.masks) total += m.pixel_count();
  if (total != set.dims.pixels()) return false;
  // With the sizes summing to h*w, full coverage implies disjointness.
  return total_size(union_of(set.masks)) == set.dims.pixels();
}

MaskSet augment_with_slic(const MaskSet& sam, const MaskSet& slic,
                          std::size_t min_uncovered) {
  sam.validate();
  slic.validate();
  if (!(sam.dims == slic.dims)) {
    throw Error(ErrorCode::kDimsMismatch, "sam and slic mask sets differ in dims");
  }
  if (!is_partition(slic)) {
    throw Error(ErrorCode::kNonPartitionSlic,
                "superpixels must cover every pixel exactly once");
  }
  const IntervalList uncovered =
      complement_of(union_of(sam.masks), sam.dims.pixels());
  MaskSet out = sam;
  if (uncovered.empty()) return out;
  for (const RegionMask& superpixel : slic.masks) {
    IntervalList clipped = intersect(superpixel.intervals(), uncovered);
    const std::size_t size = total_size(clipped);
    if (size == 0 || size < min_uncovered) continue;
    out.masks.push_back(RegionMask::from_intervals(sam.dims, std::move(clipped),
                                                   MaskSource::kSlic));
  }
  return out;
}

CoverageStats coverage_stats(const MaskSet& set) {
  set.validate();
  CoverageStats stats;
  stats.region_count = set.masks.size();
  stats.covered_fraction = static_cast<double>(total_size(union_of(set.masks))) /
                           static_cast<double>(set.dims.pixels());
  if (!set.masks.empty()) {
    double sum = 0.0;
    for (const RegionMask& m : set.masks) sum += static_cast<double>(m.pixel_count());
    stats.mean_region_px = sum / static_cast<double>(set.masks.size());
  }
  return stats;
}

}  // namespace rbr
