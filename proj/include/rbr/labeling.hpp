#ifndef RBR_LABELING_HPP_
#define RBR_LABELING_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "rbr/core.hpp"

namespace rbr {

inline constexpr double kDefaultLabelThreshold = 0.5;

struct RegionLabel {
  std::uint32_t region_id = 0;
  std::uint16_t label = 0;
  /// Pixel count of the region (loss weight).
  std::size_t weight = 0;
};

/// Per-class pixel counts inside the mask, ignore pixels skipped.
std::vector<std::size_t> class_counts(const RegionMask& mask, const LabelMap& gt);

/// Majority label of the non-ignore pixels when its share reaches
/// `threshold` (ties go to the lowest class index). nullopt means the region is
/// excluded from training, including the all-ignore case.
std::optional<RegionLabel> derive_region_label(const RegionMask& mask,
                                               const LabelMap& gt,
                                               double threshold = kDefaultLabelThreshold,
                                               std::uint32_t region_id = 0);

/// Fraction of non-ignore pixels per class; nullopt when every pixel is
/// ignore.
std::optional<std::vector<double>> oracle_region_probs(const RegionMask& mask,
                                                       const LabelMap& gt);

/// derive_region_label over a whole set; excluded regions are omitted.
std::vector<RegionLabel> label_regions(const MaskSet& set, const LabelMap& gt,
                                       double threshold = kDefaultLabelThreshold);

}  // namespace rbr

#endif  // RBR_LABELING_HPP_
