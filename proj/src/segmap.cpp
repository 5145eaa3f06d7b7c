#include "rbr/segmap.hpp"

#include <string>

#include "rbr/labeling.hpp"

namespace rbr {

PixelPrediction predict_pixels(const MaskSet& set,
                               std::span<const std::vector<double>> region_probs,
                               std::uint16_t num_classes, bool keep_probs) {
  set.validate();
  if (region_probs.size() != set.masks.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::to_string(region_probs.size()) + " distributions for " +
                    std::to_string(set.masks.size()) + " regions");
  }
  if (num_classes == 0) {
    throw Error(ErrorCode::kInvalidArgument, "num_classes must be positive");
  }
  const std::size_t n = set.dims.pixels();
  const std::size_t c_count = num_classes;
  std::vector<double> sums(n * c_count, 0.0);
  std::vector<std::uint32_t> cover(n, 0);
  for (std::size_t r = 0; r < set.masks.size(); ++r) {
    const auto& probs = region_probs[r];
    if (probs.empty()) continue;
    if (probs.size() != c_count) {
      throw Error(ErrorCode::kInvalidArgument,
                  "region " + std::to_string(r) + " has " +
                      std::to_string(probs.size()) + " class probabilities, expected " +
                      std::to_string(c_count));
    }
    for (const Interval& iv : set.masks[r].intervals()) {
      for (std::size_t p = iv.begin; p < iv.end; ++p) {
        double* dst = &sums[p * c_count];
        for (std::size_t c = 0; c < c_count; ++c) dst[c] += probs[c];
        ++cover[p];
      }
    }
  }
  PixelPrediction out{set.dims, num_classes, std::vector<std::int32_t>(n, kVoidPixel), {}};
  if (keep_probs) out.probs.assign(n * c_count, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    if (cover[p] == 0) continue;
    const double k = cover[p];
    double* avg = &sums[p * c_count];
    std::size_t best = 0;
    for (std::size_t c = 0; c < c_count; ++c) {
      avg[c] /= k;
      if (avg[c] > avg[best]) best = c;
    }
    out.labels[p] = static_cast<std::int32_t>(best);
    if (keep_probs) {
      std::copy(avg, avg + c_count, out.probs.begin() + static_cast<std::ptrdiff_t>(p * c_count));
    }
  }
  return out;
}

PixelPrediction prediction_from_label_map(const LabelMap& map) {
  map.validate();
  PixelPrediction out{map.dims, map.num_classes,
                      std::vector<std::int32_t>(map.labels.size()), {}};
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    out.labels[i] = map.labels[i] == kIgnoreLabel ? kVoidPixel : map.labels[i];
  }
  return out;
}

ConfusionMatrix::ConfusionMatrix(std::uint16_t num_classes)
    : num_classes_(num_classes),
      counts_(static_cast<std::size_t>(num_classes) * (num_classes + 1u), 0) {}

void ConfusionMatrix::add(const PixelPrediction& pred, const LabelMap& gt) {
  if (!(pred.dims == gt.dims) || pred.labels.size() != gt.labels.size()) {
    throw Error(ErrorCode::kDimsMismatch, "prediction and ground truth dims differ");
  }
  if (gt.num_classes != num_classes_) {
    throw Error(ErrorCode::kInvalidArgument,
                "ground truth has " + std::to_string(gt.num_classes) +
                    " classes, matrix has " + std::to_string(num_classes_));
  }
  const std::size_t void_col = num_classes_;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const std::uint16_t truth = gt.labels[i];
    if (truth == kIgnoreLabel) continue;
    if (truth >= num_classes_) {
      throw Error(ErrorCode::kFormat, "ground-truth label " + std::to_string(truth) +
                                          " at pixel " + std::to_string(i) +
                                          " exceeds num_classes");
    }
    const std::int32_t p = pred.labels[i];
    std::size_t col;
    if (p == kVoidPixel) {
      col = void_col;
    } else if (p >= 0 && static_cast<std::size_t>(p) < num_classes_) {
      col = static_cast<std::size_t>(p);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "predicted label " + std::to_string(p) +
                                                   " at pixel " + std::to_string(i) +
                                                   " is out of range");
    }
    ++counts_[truth * (num_classes_ + 1u) + col];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) {
    throw Error(ErrorCode::kInvalidArgument, "cannot merge confusion matrices of different sizes");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

IouReport ConfusionMatrix::report() const {
  IouReport report;
  report.confusion = counts_;
  const std::size_t cols = num_classes_ + 1u;
  std::vector<std::size_t> gt_total(num_classes_, 0);
  std::vector<std::size_t> pred_total(num_classes_, 0);
  for (std::size_t g = 0; g < num_classes_; ++g) {
    for (std::size_t p = 0; p < cols; ++p) {
      const std::size_t n = counts_[g * cols + p];
      gt_total[g] += n;
      report.evaluated_pixels += n;
      if (p < num_classes_) {
        pred_total[p] += n;
      } else {
        report.void_pixels += n;
      }
    }
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes_; ++c) {
    ClassIou entry;
    entry.class_id = static_cast<std::uint16_t>(c);
    entry.true_positive = counts_[c * cols + c];
    entry.false_negative = gt_total[c] - entry.true_positive;
    entry.false_positive = pred_total[c] - entry.true_positive;
    const std::size_t denom =
        entry.true_positive + entry.false_positive + entry.false_negative;
    if (denom > 0) {
      entry.iou = static_cast<double>(entry.true_positive) / static_cast<double>(denom);
      sum += *entry.iou;
      ++present;
    }
    report.per_class.push_back(entry);
  }
  if (present > 0) report.miou = sum / static_cast<double>(present);
  return report;
}

nlohmann::json IouReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["miou"] = miou ? nlohmann::json(*miou) : nlohmann::json(nullptr);
  j["evaluated_pixels"] = evaluated_pixels;
  j["void_pixels"] = void_pixels;
  nlohmann::json classes = nlohmann::json::array();
  for (const ClassIou& c : per_class) {
    classes.push_back({{"class", c.class_id},
                       {"iou", c.iou ? nlohmann::json(*c.iou) : nlohmann::json(nullptr)},
                       {"true_positive", c.true_positive},
                       {"false_positive", c.false_positive},
                       {"false_negative", c.false_negative}});
  }
  j["per_class"] = std::move(classes);
  j["confusion"] = confusion;
  return j;
}

IouReport miou(const PixelPrediction& pred, const LabelMap& gt) {
  ConfusionMatrix matrix(gt.num_classes);
  matrix.add(pred, gt);
  return matrix.report();
}

std::vector<std::vector<double>> oracle_distributions(const MaskSet& set,
                                                      const LabelMap& gt) {
  set.validate();
  std::vector<std::vector<double>> probs;
  probs.reserve(set.masks.size());
  for (const RegionMask& mask : set.masks) {
    auto p = oracle_region_probs(mask, gt);
    probs.push_back(p ? std::move(*p) : std::vector<double>{});
  }
  return probs;
}

IouReport oracle_eval(const MaskSet& set, const LabelMap& gt) {
  if (!(set.dims == gt.dims)) {
    throw Error(ErrorCode::kDimsMismatch, "mask set and label map dims differ");
  }
  const auto probs = oracle_distributions(set, gt);
  return miou(predict_pixels(set, probs, gt.num_classes), gt);
}

}  // namespace rbr
