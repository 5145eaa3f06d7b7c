#include "rbr/labeling.hpp"

#include <string>

namespace rbr {

namespace {

void check_same_dims(const RegionMask& mask, const LabelMap& gt) {
  if (!(mask.dims() == gt.dims)) {
    throw Error(ErrorCode::kDimsMismatch, "mask and label map dims differ");
  }
  if (gt.labels.size() != gt.dims.pixels()) {
    throw Error(ErrorCode::kFormat, "label map size does not match dims");
  }
}

}  // namespace

std::vector<std::size_t> class_counts(const RegionMask& mask, const LabelMap& gt) {
  check_same_dims(mask, gt);
  std::vector<std::size_t> counts(gt.num_classes, 0);
  const std::size_t w = gt.dims.width;
  mask.for_each_pixel([&](std::size_t y, std::size_t x) {
    const std::uint16_t label = gt.labels[y * w + x];
    if (label == kIgnoreLabel) return;
    if (label >= gt.num_classes) {
      throw Error(ErrorCode::kFormat, "label " + std::to_string(label) +
                                          " exceeds num_classes");
    }
    ++counts[label];
  });
  return counts;
}

std::optional<RegionLabel> derive_region_label(const RegionMask& mask,
                                               const LabelMap& gt,
                                               double threshold,
                                               std::uint32_t region_id) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must lie in (0, 1]");
  }
  const auto counts = class_counts(mask, gt);
  std::size_t total = 0;
  std::size_t best = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    total += counts[c];
    if (counts[c] > counts[best]) best = c;
  }
  if (total == 0) return std::nullopt;
  if (static_cast<double>(counts[best]) < threshold * static_cast<double>(total)) {
    return std::nullopt;
  }
  return RegionLabel{region_id, static_cast<std::uint16_t>(best), mask.pixel_count()};
}

std::optional<std::vector<double>> oracle_region_probs(const RegionMask& mask,
                                                       const LabelMap& gt) {
  const auto counts = class_counts(mask, gt);
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  if (total == 0) return std::nullopt;
  std::vector<double> probs(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    probs[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
  }
  return probs;
}

std::vector<RegionLabel> label_regions(const MaskSet& set, const LabelMap& gt,
                                       double threshold) {
  set.validate();
  std::vector<RegionLabel> out;
  for (std::size_t i = 0; i < set.masks.size(); ++i) {
    if (auto label = derive_region_label(set.masks[i], gt, threshold,
                                         static_cast<std::uint32_t>(i))) {
      out.push_back(*label);
    }
  }
  return out;
}

}  // namespace rbr
