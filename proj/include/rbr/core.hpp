#ifndef RBR_CORE_HPP_
#define RBR_CORE_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rbr/error.hpp"

namespace rbr {

struct ImageDims {
  std::uint32_t height = 0;
  std::uint32_t width = 0;

  std::size_t pixels() const {
    return static_cast<std::size_t>(height) * width;
  }
  bool operator==(const ImageDims&) const = default;
};

/// Throws kInvalidArgument unless both sides are >= 1.
void check_dims(const ImageDims& dims);

enum class MaskSource : std::uint8_t { kSam, kSlic, kSynthetic, kOther };

std::string_view mask_source_name(MaskSource source);
MaskSource parse_mask_source(std::string_view name);

/// Half-open range [begin, end) of row-major linear pixel indices.
struct Interval {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Interval&) const = default;
};

using IntervalList = std::vector<Interval>;

/// Inclusive tight bounding box of the foreground.
struct BBox {
  std::uint32_t min_row = 0;
  std::uint32_t min_col = 0;
  std::uint32_t max_row = 0;
  std::uint32_t max_col = 0;
  bool operator==(const BBox&) const = default;
};

struct Centroid {
  double row = 0.0;
  double col = 0.0;
};

/// Dense row-major boolean grid (0 / 1 bytes).
struct Bitmap {
  ImageDims dims;
  std::vector<std::uint8_t> bits;

  bool operator==(const Bitmap&) const = default;
};

/// Non-empty binary mask stored as row-major run lengths, background first.
///
/// runs() always alternates background/foreground counts starting with a
/// (possibly zero) background run; no other run is zero. Pixel count,
/// bounding box and centroid are cached at construction.
class RegionMask {
 public:
  /// Accepts any run list summing to h*w; zero-length interior runs are
  /// merged away. Throws kFormat on a bad sum, kEmptyMask when no pixel is set.
  static RegionMask from_runs(ImageDims dims, std::span<const std::uint32_t> runs,
                              MaskSource source = MaskSource::kOther);

  /// Intervals must be sorted and non-overlapping; adjacent ones are merged.
  static RegionMask from_intervals(ImageDims dims, IntervalList intervals,
                                   MaskSource source = MaskSource::kOther);

  const ImageDims& dims() const { return dims_; }
  const std::vector<std::uint32_t>& runs() const { return runs_; }
  const IntervalList& intervals() const { return intervals_; }
  std::size_t pixel_count() const { return pixel_count_; }
  const BBox& bbox() const { return bbox_; }
  const Centroid& centroid() const { return centroid_; }
  MaskSource source() const { return source_; }

  RegionMask with_source(MaskSource source) const;

  bool contains(std::size_t linear_index) const;
  Bitmap to_bitmap() const;

  /// Calls fn(row, col) for every foreground pixel in row-major order.
  template <typename Fn>
  void for_each_pixel(Fn&& fn) const {
    const std::size_t w = dims_.width;
    for (const Interval& iv : intervals_) {
      std::size_t row = iv.begin / w;
      std::size_t col = iv.begin % w;
      for (std::size_t i = iv.begin; i < iv.end; ++i) {
        fn(row, col);
        if (++col == w) {
          col = 0;
          ++row;
        }
      }
    }
  }

  /// Calls fn(row, col_begin, col_end) for each maximal row segment.
  template <typename Fn>
  void for_each_row_segment(Fn&& fn) const {
    const std::size_t w = dims_.width;
    for (const Interval& iv : intervals_) {
      std::size_t pos = iv.begin;
      while (pos < iv.end) {
        const std::size_t row = pos / w;
        const std::size_t row_end = std::min(iv.end, (row + 1) * w);
        fn(row, pos - row * w, row_end - row * w);
        pos = row_end;
      }
    }
  }

  bool operator==(const RegionMask& other) const {
    return dims_ == other.dims_ && runs_ == other.runs_ &&
           source_ == other.source_;
  }

 private:
  RegionMask() = default;
  void finalize();

  ImageDims dims_;
  std::vector<std::uint32_t> runs_;
  IntervalList intervals_;
  std::size_t pixel_count_ = 0;
  BBox bbox_;
  Centroid centroid_;
  MaskSource source_ = MaskSource::kOther;
};

/// Independent, possibly overlapping masks over one image.
struct MaskSet {
  ImageDims dims;
  std::vector<RegionMask> masks;

  /// Throws kDimsMismatch if any mask disagrees with dims.
  void validate() const;
  std::size_t size() const { return masks.size(); }
};

/// Patch-feature tensor, channel-major: data[(c * grid_h + y) * grid_w + x].
struct FeatureGrid {
  std::uint32_t dim = 0;
  std::uint32_t grid_h = 0;
  std::uint32_t grid_w = 0;
  std::uint32_t patch = 0;
  ImageDims image_dims;
  std::vector<float> data;

  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * grid_h + y) * grid_w + x];
  }
  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * grid_h + y) * grid_w + x];
  }

  /// Shape, size and finiteness checks; throws kFormat / kInvalidArgument.
  void validate() const;

  static FeatureGrid zeros(std::uint32_t dim, std::uint32_t grid_h,
                           std::uint32_t grid_w, std::uint32_t patch,
                           ImageDims image_dims);
};

inline constexpr std::uint16_t kIgnoreLabel =
    std::numeric_limits<std::uint16_t>::max();

struct LabelMap {
  ImageDims dims;
  std::vector<std::uint16_t> labels;
  std::uint16_t num_classes = 0;

  std::uint16_t at(std::size_t row, std::size_t col) const {
    return labels[row * dims.width + col];
  }
  void validate() const;
};

struct RegionVector {
  std::uint32_t image_id = 0;
  std::uint32_t region_id = 0;
  std::vector<float> values;

  bool operator==(const RegionVector&) const = default;
};

// ---- operations -----------------------------------------------------------

/// Throws kEmptyMask for an all-background bitmap.
RegionMask rle_encode(const Bitmap& bitmap,
                      MaskSource source = MaskSource::kOther);
Bitmap rle_decode(const RegionMask& mask);

/// Pixels covered by no mask; nullopt when the masks cover everything.
std::optional<RegionMask> mask_union_complement(const MaskSet& set);

std::size_t overlap_count(const RegionMask& a, const RegionMask& b);

Centroid centroid(const RegionMask& mask);

// Interval algebra shared by the region modules.
IntervalList union_of(std::span<const RegionMask> masks);
IntervalList complement_of(const IntervalList& sorted, std::size_t total);
IntervalList intersect(const IntervalList& a, const IntervalList& b);
std::size_t total_size(const IntervalList& list);

}  // namespace rbr

#endif  // RBR_CORE_HPP_
