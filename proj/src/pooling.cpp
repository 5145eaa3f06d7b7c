#include "rbr/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rbr/parallel.hpp"
#include "rbr/posemb.hpp"

namespace rbr {

std::string_view resample_name(Resample r) {
  return r == Resample::kUpsampleFeatures ? "upsample_features" : "downsample_masks";
}

std::string_view reducer_name(Reducer r) {
  return r == Reducer::kAverage ? "average" : "max";
}

std::vector<AxisTap> axis_taps(std::uint32_t in_size, std::uint32_t out_size,
                               Interpolation interpolation) {
  std::vector<AxisTap> taps(out_size);
  const double in = in_size;
  const double out = out_size;
  for (std::uint32_t i = 0; i < out_size; ++i) {
    AxisTap& t = taps[i];
    if (interpolation == Interpolation::kNearest) {
      const auto idx = static_cast<std::uint32_t>(std::floor((i + 0.5) * in / out));
      t.lo = t.hi = std::min(idx, in_size - 1);
      continue;
    }
    // Divide (not multiply by in/out) so patch centres land exactly on
    // integer source coordinates.
    double s = ((i + 0.5) * in) / out - 0.5;
    s = std::clamp(s, 0.0, in - 1.0);
    t.lo = static_cast<std::uint32_t>(std::floor(s));
    t.hi = std::min(t.lo + 1, in_size - 1);
    t.weight = s - t.lo;
  }
  return taps;
}

namespace {

inline float interpolate(const float* channel, std::uint32_t grid_w,
                         const AxisTap& ty, const AxisTap& tx) {
  const double v00 = channel[ty.lo * grid_w + tx.lo];
  const double v01 = channel[ty.lo * grid_w + tx.hi];
  const double v10 = channel[ty.hi * grid_w + tx.lo];
  const double v11 = channel[ty.hi * grid_w + tx.hi];
  const double top = (1.0 - tx.weight) * v00 + tx.weight * v01;
  const double bottom = (1.0 - tx.weight) * v10 + tx.weight * v11;
  return static_cast<float>((1.0 - ty.weight) * top + ty.weight * bottom);
}

void check_mask_dims(const ImageDims& dims, const RegionMask& mask) {
  if (!(dims == mask.dims())) {
    throw Error(ErrorCode::kDimsMismatch,
                "mask is " + std::to_string(mask.dims().height) + "x" +
                    std::to_string(mask.dims().width) + ", features are " +
                    std::to_string(dims.height) + "x" + std::to_string(dims.width));
  }
}

// Shared reduction over a per-pixel value source, so the materialised and
// lazy paths produce bit-identical vectors.
template <typename ValueAt>
std::vector<float> reduce_mask(std::uint32_t dim, const RegionMask& mask,
                               Reducer reducer, ValueAt&& value_at) {
  std::vector<float> out(dim);
  const double count = static_cast<double>(mask.pixel_count());
  for (std::uint32_t c = 0; c < dim; ++c) {
    if (reducer == Reducer::kAverage) {
      double sum = 0.0;
      mask.for_each_row_segment([&](std::size_t y, std::size_t x0, std::size_t x1) {
        for (std::size_t x = x0; x < x1; ++x) sum += value_at(c, y, x);
      });
      out[c] = static_cast<float>(sum / count);
    } else {
      float best = -std::numeric_limits<float>::infinity();
      mask.for_each_row_segment([&](std::size_t y, std::size_t x0, std::size_t x1) {
        for (std::size_t x = x0; x < x1; ++x) best = std::max(best, value_at(c, y, x));
      });
      out[c] = best;
    }
  }
  return out;
}

}  // namespace

DenseGrid upsample_features(const FeatureGrid& grid, Interpolation interpolation) {
  grid.validate();
  const ImageDims dims = grid.image_dims;
  const auto ty = axis_taps(grid.grid_h, dims.height, interpolation);
  const auto tx = axis_taps(grid.grid_w, dims.width, interpolation);
  DenseGrid dense{grid.dim, dims, std::vector<float>(grid.dim * dims.pixels())};
  const std::size_t plane = static_cast<std::size_t>(grid.grid_h) * grid.grid_w;
  for (std::uint32_t c = 0; c < grid.dim; ++c) {
    const float* channel = grid.data.data() + c * plane;
    float* dst = dense.data.data() + c * dims.pixels();
    for (std::uint32_t y = 0; y < dims.height; ++y) {
      for (std::uint32_t x = 0; x < dims.width; ++x) {
        dst[y * dims.width + x] = interpolate(channel, grid.grid_w, ty[y], tx[x]);
      }
    }
  }
  return dense;
}

std::size_t CellMask::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1));
}

CellMask downsample_mask(const RegionMask& mask, std::uint32_t grid_h,
                         std::uint32_t grid_w) {
  const ImageDims dims = mask.dims();
  if (grid_h == 0 || grid_w == 0 || grid_h > dims.height || grid_w > dims.width) {
    throw Error(ErrorCode::kInvalidArgument, "cell grid must fit inside the image");
  }
  // Cell i covers pixel rows [floor(i h / gh), floor((i + 1) h / gh)).
  auto cell_of = [](std::uint32_t size, std::uint32_t cells) {
    std::vector<std::uint32_t> map(size);
    for (std::uint32_t c = 0; c < cells; ++c) {
      const std::size_t begin = static_cast<std::size_t>(c) * size / cells;
      const std::size_t end = static_cast<std::size_t>(c + 1) * size / cells;
      for (std::size_t p = begin; p < end; ++p) map[p] = c;
    }
    return map;
  };
  const auto row_cell = cell_of(dims.height, grid_h);
  const auto col_cell = cell_of(dims.width, grid_w);
  std::vector<std::size_t> fg(static_cast<std::size_t>(grid_h) * grid_w, 0);
  std::vector<std::size_t> area(fg.size(), 0);
  for (std::uint32_t y = 0; y < dims.height; ++y) {
    for (std::uint32_t x = 0; x < dims.width; ++x) {
      ++area[row_cell[y] * grid_w + col_cell[x]];
    }
  }
  mask.for_each_pixel([&](std::size_t y, std::size_t x) {
    ++fg[row_cell[y] * grid_w + col_cell[x]];
  });
  CellMask out{grid_h, grid_w, std::vector<std::uint8_t>(fg.size(), 0)};
  for (std::size_t i = 0; i < fg.size(); ++i) {
    out.cells[i] = 2 * fg[i] >= area[i] && fg[i] > 0 ? 1 : 0;
  }
  return out;
}

RegionVector pool_region(const DenseGrid& dense, const RegionMask& mask,
                         Reducer reducer) {
  check_mask_dims(dense.dims, mask);
  RegionVector out;
  out.values = reduce_mask(dense.dim, mask, reducer,
                           [&](std::size_t c, std::size_t y, std::size_t x) {
                             return dense.at(c, y, x);
                           });
  return out;
}

RegionVector pool_region_upsampled(const FeatureGrid& grid, const RegionMask& mask,
                                   Reducer reducer, Interpolation interpolation) {
  check_mask_dims(grid.image_dims, mask);
  const ImageDims dims = grid.image_dims;
  // Only pixels under the mask are evaluated; the dense grid is never built.
  const auto ty = axis_taps(grid.grid_h, dims.height, interpolation);
  const auto tx = axis_taps(grid.grid_w, dims.width, interpolation);
  const std::size_t plane = static_cast<std::size_t>(grid.grid_h) * grid.grid_w;
  RegionVector out;
  out.values = reduce_mask(grid.dim, mask, reducer,
                           [&](std::size_t c, std::size_t y, std::size_t x) {
                             return interpolate(grid.data.data() + c * plane,
                                                grid.grid_w, ty[y], tx[x]);
                           });
  return out;
}

std::optional<RegionVector> pool_cells(const FeatureGrid& grid,
                                       const CellMask& cells, Reducer reducer) {
  if (cells.grid_h != grid.grid_h || cells.grid_w != grid.grid_w) {
    throw Error(ErrorCode::kDimsMismatch, "cell mask does not match the feature grid");
  }
  const std::size_t n = cells.count();
  if (n == 0) return std::nullopt;
  const std::size_t plane = static_cast<std::size_t>(grid.grid_h) * grid.grid_w;
  RegionVector out;
  out.values.resize(grid.dim);
  for (std::uint32_t c = 0; c < grid.dim; ++c) {
    const float* channel = grid.data.data() + c * plane;
    double sum = 0.0;
    float best = -std::numeric_limits<float>::infinity();
    for (std::size_t i = 0; i < plane; ++i) {
      if (!cells.cells[i]) continue;
      sum += channel[i];
      best = std::max(best, channel[i]);
    }
    out.values[c] = reducer == Reducer::kAverage
                        ? static_cast<float>(sum / static_cast<double>(n))
                        : best;
  }
  return out;
}

FeatureGrid with_grid_posemb(const FeatureGrid& grid) {
  FeatureGrid out = grid;
  const std::size_t emb_dim = (grid.dim / 4) * 4;
  if (emb_dim == 0) return out;
  for (std::uint32_t y = 0; y < grid.grid_h; ++y) {
    for (std::uint32_t x = 0; x < grid.grid_w; ++x) {
      const auto emb = sinusoid_2d((y + 0.5) / grid.grid_h,
                                   (x + 0.5) / grid.grid_w, emb_dim);
      for (std::size_t c = 0; c < emb_dim; ++c) out.at(c, y, x) += emb[c];
    }
  }
  return out;
}

EncodedImage encode_image(const FeatureGrid& grid, const MaskSet& set,
                          const PoolConfig& config, std::uint32_t image_id) {
  grid.validate();
  set.validate();
  if (!(grid.image_dims == set.dims)) {
    throw Error(ErrorCode::kDimsMismatch,
                "feature grid image dims differ from mask set dims");
  }
  const FeatureGrid source = config.add_grid_posemb ? with_grid_posemb(grid) : grid;
  std::vector<std::optional<RegionVector>> slots(set.masks.size());
  parallel_for(set.masks.size(), config.threads, [&](std::size_t i) {
    const RegionMask& mask = set.masks[i];
    if (config.resample == Resample::kUpsampleFeatures) {
      slots[i] = pool_region_upsampled(source, mask, config.reducer,
                                       config.interpolation);
    } else {
      slots[i] = pool_cells(source, downsample_mask(mask, source.grid_h, source.grid_w),
                            config.reducer);
    }
  });
  EncodedImage out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) {
      out.vanished.push_back(i);
      continue;
    }
    slots[i]->image_id = image_id;
    slots[i]->region_id = static_cast<std::uint32_t>(i);
    out.vectors.push_back(std::move(*slots[i]));
  }
  return out;
}

}  // namespace rbr
