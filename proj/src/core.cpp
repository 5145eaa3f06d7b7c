#include "rbr/core.hpp"

#include <cmath>
#include <string>

namespace rbr {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kDimsMismatch: return "DimsMismatch";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kNonPartitionSlic: return "NonPartitionSlic";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kMagicMismatch: return "MagicMismatch";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kDimensionOverflow: return "DimensionOverflow";
  }
  return "Unknown";
}

void check_dims(const ImageDims& dims) {
  if (dims.height < 1 || dims.width < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "image dims must be >= 1, got " + std::to_string(dims.height) +
                    "x" + std::to_string(dims.width));
  }
}

std::string_view mask_source_name(MaskSource source) {
  switch (source) {
    case MaskSource::kSam: return "sam";
    case MaskSource::kSlic: return "slic";
    case MaskSource::kSynthetic: return "synthetic";
    case MaskSource::kOther: return "other";
  }
  return "other";
}

MaskSource parse_mask_source(std::string_view name) {
  if (name == "sam") return MaskSource::kSam;
  if (name == "slic") return MaskSource::kSlic;
  if (name == "synthetic") return MaskSource::kSynthetic;
  if (name == "other") return MaskSource::kOther;
  throw Error(ErrorCode::kFormat, "unknown mask source '" + std::string(name) + "'");
}

// ---- RegionMask -------------------------------------------------------------

RegionMask RegionMask::from_runs(ImageDims dims,
                                 std::span<const std::uint32_t> runs,
                                 MaskSource source) {
  check_dims(dims);
  std::size_t sum = 0;
  IntervalList intervals;
  bool foreground = false;
  for (std::uint32_t run : runs) {
    if (foreground && run > 0) {
      if (!intervals.empty() && intervals.back().end == sum) {
        intervals.back().end = sum + run;
      } else {
        intervals.push_back({sum, sum + run});
      }
    }
    sum += run;
    foreground = !foreground;
  }
  if (sum != dims.pixels()) {
    throw Error(ErrorCode::kFormat, "runs sum to " + std::to_string(sum) +
                                        ", expected " +
                                        std::to_string(dims.pixels()));
  }
  return from_intervals(dims, std::move(intervals), source);
}

RegionMask RegionMask::from_intervals(ImageDims dims, IntervalList intervals,
                                      MaskSource source) {
  check_dims(dims);
  RegionMask mask;
  mask.dims_ = dims;
  mask.source_ = source;
  IntervalList merged;
  merged.reserve(intervals.size());
  std::size_t last_end = 0;
  for (const Interval& iv : intervals) {
    if (iv.end < iv.begin || iv.end > dims.pixels() ||
        (!merged.empty() && iv.begin < last_end)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "intervals must be sorted, disjoint and inside the image");
    }
    if (iv.size() == 0) continue;
    if (!merged.empty() && merged.back().end == iv.begin) {
      merged.back().end = iv.end;
    } else {
      merged.push_back(iv);
    }
    last_end = iv.end;
  }
  if (merged.empty()) {
    throw Error(ErrorCode::kEmptyMask, "mask has no foreground pixels");
  }
  mask.intervals_ = std::move(merged);
  mask.finalize();
  return mask;
}

void RegionMask::finalize() {
  runs_.clear();
  runs_.reserve(intervals_.size() * 2 + 1);
  std::size_t pos = 0;
  pixel_count_ = 0;
  for (const Interval& iv : intervals_) {
    runs_.push_back(static_cast<std::uint32_t>(iv.begin - pos));
    runs_.push_back(static_cast<std::uint32_t>(iv.size()));
    pixel_count_ += iv.size();
    pos = iv.end;
  }
  if (pos < dims_.pixels()) {
    runs_.push_back(static_cast<std::uint32_t>(dims_.pixels() - pos));
  }

  const std::size_t w = dims_.width;
  bbox_.min_row = static_cast<std::uint32_t>(intervals_.front().begin / w);
  bbox_.max_row = static_cast<std::uint32_t>((intervals_.back().end - 1) / w);
  std::size_t min_col = w - 1;
  std::size_t max_col = 0;
  double row_sum = 0.0;
  double col_sum = 0.0;
  for_each_row_segment([&](std::size_t row, std::size_t c0, std::size_t c1) {
    min_col = std::min(min_col, c0);
    max_col = std::max(max_col, c1 - 1);
    const double n = static_cast<double>(c1 - c0);
    row_sum += static_cast<double>(row) * n;
    // sum of c0..c1-1
    col_sum += (static_cast<double>(c0) + static_cast<double>(c1 - 1)) * n / 2.0;
  });
  bbox_.min_col = static_cast<std::uint32_t>(min_col);
  bbox_.max_col = static_cast<std::uint32_t>(max_col);
  const double count = static_cast<double>(pixel_count_);
  centroid_ = {row_sum / count, col_sum / count};
}

RegionMask RegionMask::with_source(MaskSource source) const {
  RegionMask copy = *this;
  copy.source_ = source;
  return copy;
}

bool RegionMask::contains(std::size_t linear_index) const {
  auto it = std::upper_bound(
      intervals_.begin(), intervals_.end(), linear_index,
      [](std::size_t value, const Interval& iv) { return value < iv.begin; });
  if (it == intervals_.begin()) return false;
  --it;
  return linear_index < it->end;
}

Bitmap RegionMask::to_bitmap() const {
  Bitmap out{dims_, std::vector<std::uint8_t>(dims_.pixels(), 0)};
  for (const Interval& iv : intervals_) {
    std::fill(out.bits.begin() + static_cast<std::ptrdiff_t>(iv.begin),
              out.bits.begin() + static_cast<std::ptrdiff_t>(iv.end), 1);
  }
  return out;
}

// ---- containers -------------------------------------------------------------

void MaskSet::validate() const {
  check_dims(dims);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!(masks[i].dims() == dims)) {
      throw Error(ErrorCode::kDimsMismatch,
                  "mask " + std::to_string(i) + " has dims " +
                      std::to_string(masks[i].dims().height) + "x" +
                      std::to_string(masks[i].dims().width) + ", set has " +
                      std::to_string(dims.height) + "x" +
                      std::to_string(dims.width));
    }
  }
}

void FeatureGrid::validate() const {
  check_dims(image_dims);
  if (dim == 0 || grid_h == 0 || grid_w == 0) {
    throw Error(ErrorCode::kInvalidArgument, "feature grid has a zero extent");
  }
  const std::size_t expected = static_cast<std::size_t>(dim) * grid_h * grid_w;
  if (data.size() != expected) {
    throw Error(ErrorCode::kFormat, "feature grid holds " +
                                        std::to_string(data.size()) +
                                        " values, expected " +
                                        std::to_string(expected));
  }
  if (patch > 0 && image_dims.height % patch == 0 &&
      image_dims.width % patch == 0 &&
      (grid_h != image_dims.height / patch ||
       grid_w != image_dims.width / patch)) {
    throw Error(ErrorCode::kFormat,
                "grid dims disagree with image dims / patch size");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(ErrorCode::kFormat,
                  "non-finite feature value at flat index " + std::to_string(i));
    }
  }
}

FeatureGrid FeatureGrid::zeros(std::uint32_t dim, std::uint32_t grid_h,
                               std::uint32_t grid_w, std::uint32_t patch,
                               ImageDims image_dims) {
  FeatureGrid grid{dim, grid_h, grid_w, patch, image_dims, {}};
  grid.data.assign(static_cast<std::size_t>(dim) * grid_h * grid_w, 0.0f);
  return grid;
}

void LabelMap::validate() const {
  check_dims(dims);
  if (labels.size() != dims.pixels()) {
    throw Error(ErrorCode::kFormat, "label map size does not match dims");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kIgnoreLabel && labels[i] >= num_classes) {
      throw Error(ErrorCode::kFormat,
                  "label " + std::to_string(labels[i]) + " at pixel " +
                      std::to_string(i) + " exceeds num_classes " +
                      std::to_string(num_classes));
    }
  }
}

// ---- operations -------------------------------------------------------------

RegionMask rle_encode(const Bitmap& bitmap, MaskSource source) {
  check_dims(bitmap.dims);
  if (bitmap.bits.size() != bitmap.dims.pixels()) {
    throw Error(ErrorCode::kInvalidArgument, "bitmap size does not match dims");
  }
  IntervalList intervals;
  const std::size_t n = bitmap.bits.size();
  std::size_t i = 0;
  while (i < n) {
    if (!bitmap.bits[i]) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < n && bitmap.bits[i]) ++i;
    intervals.push_back({start, i});
  }
  return RegionMask::from_intervals(bitmap.dims, std::move(intervals), source);
}

Bitmap rle_decode(const RegionMask& mask) { return mask.to_bitmap(); }

IntervalList union_of(std::span<const RegionMask> masks) {
  IntervalList all;
  for (const RegionMask& m : masks) {
    all.insert(all.end(), m.intervals().begin(), m.intervals().end());
  }
  std::sort(all.begin(), all.end(), [](const Interval& a, const Interval& b) {
    return a.begin < b.begin;
  });
  IntervalList merged;
  for (const Interval& iv : all) {
    if (!merged.empty() && iv.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, iv.end);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

IntervalList complement_of(const IntervalList& sorted, std::size_t total) {
  IntervalList out;
  std::size_t pos = 0;
  for (const Interval& iv : sorted) {
    if (iv.begin > pos) out.push_back({pos, iv.begin});
    pos = std::max(pos, iv.end);
  }
  if (pos < total) out.push_back({pos, total});
  return out;
}

IntervalList intersect(const IntervalList& a, const IntervalList& b) {
  IntervalList out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const std::size_t lo = std::max(a[i].begin, b[j].begin);
    const std::size_t hi = std::min(a[i].end, b[j].end);
    if (lo < hi) out.push_back({lo, hi});
    if (a[i].end < b[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

std::size_t total_size(const IntervalList& list) {
  std::size_t n = 0;
  for (const Interval& iv : list) n += iv.size();
  return n;
}

std::optional<RegionMask> mask_union_complement(const MaskSet& set) {
  set.validate();
  IntervalList uncovered =
      complement_of(union_of(set.masks), set.dims.pixels());
  if (uncovered.empty()) return std::nullopt;
  return RegionMask::from_intervals(set.dims, std::move(uncovered),
                                    MaskSource::kOther);
}

std::size_t overlap_count(const RegionMask& a, const RegionMask& b) {
  if (!(a.dims() == b.dims())) {
    throw Error(ErrorCode::kDimsMismatch, "overlap_count on masks of different dims");
  }
  return total_size(intersect(a.intervals(), b.intervals()));
}

Centroid centroid(const RegionMask& mask) { return mask.centroid(); }

}  // namespace rbr
