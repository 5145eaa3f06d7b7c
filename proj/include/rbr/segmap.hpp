#ifndef RBR_SEGMAP_HPP_
#define RBR_SEGMAP_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "rbr/core.hpp"

namespace rbr {

/// Label of a pixel that no region covers. Always scored as wrong.
inline constexpr std::int32_t kVoidPixel = -1;

struct PixelPrediction {
  ImageDims dims;
  std::uint16_t num_classes = 0;
  std::vector<std::int32_t> labels;
  /// pixels x num_classes averaged distributions; empty unless requested.
  std::vector<double> probs;

  bool is_void(std::size_t pixel) const { return labels[pixel] == kVoidPixel; }
};

/// Each pixel takes the unweighted mean of the distributions of the regions
/// containing it; argmax ties go to the lowest class. An empty distribution
/// marks a region without a prediction, which then counts as not covering
/// its pixels.
PixelPrediction predict_pixels(const MaskSet& set,
                               std::span<const std::vector<double>> region_probs,
                               std::uint16_t num_classes, bool keep_probs = false);

/// Wraps a predicted label map; kIgnoreLabel entries become void pixels.
PixelPrediction prediction_from_label_map(const LabelMap& map);

struct ClassIou {
  std::uint16_t class_id = 0;
  /// Unset when the class appears in neither ground truth nor prediction.
  std::optional<double> iou;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
};

struct IouReport {
  std::vector<ClassIou> per_class;
  /// Mean over classes present in ground truth or prediction; unset when no
  /// pixel was evaluated.
  std::optional<double> miou;
  std::size_t evaluated_pixels = 0;
  std::size_t void_pixels = 0;
  /// Row = ground-truth class, column = predicted class, last column = void.
  std::vector<std::size_t> confusion;

  nlohmann::json to_json() const;
};

/// Accumulates (gt, prediction) pixel pairs over any number of images.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::uint16_t num_classes);

  void add(const PixelPrediction& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);
  IouReport report() const;

  std::uint16_t num_classes() const { return num_classes_; }
  std::size_t at(std::size_t gt, std::size_t pred_or_void) const {
    return counts_[gt * (num_classes_ + 1u) + pred_or_void];
  }

 private:
  std::uint16_t num_classes_;
  std::vector<std::size_t> counts_;
};

IouReport miou(const PixelPrediction& pred, const LabelMap& gt);

/// Regions take the ground-truth label fractions inside them, then go through
/// predict_pixels and miou.
IouReport oracle_eval(const MaskSet& set, const LabelMap& gt);

/// The per-region distributions oracle_eval uses (empty for all-ignore
/// regions).
std::vector<std::vector<double>> oracle_distributions(const MaskSet& set,
                                                      const LabelMap& gt);

}  // namespace rbr

#endif  // RBR_SEGMAP_HPP_
