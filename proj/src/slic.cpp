#include "rbr/slic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

namespace rbr {

void SlicConfig::validate() const {
  if (num_components < 1) {
    throw Error(ErrorCode::kConfig, "num_components must be >= 1");
  }
  if (!(compactness > 0.0) || !std::isfinite(compactness)) {
    throw Error(ErrorCode::kConfig, "compactness must be positive");
  }
  if (max_iters < 1) throw Error(ErrorCode::kConfig, "max_iters must be >= 1");
}

void RgbImage::validate() const {
  check_dims(dims);
  if (pixels.size() != 3 * dims.pixels()) {
    throw Error(ErrorCode::kFormat, "rgb buffer holds " +
                                        std::to_string(pixels.size()) +
                                        " bytes, expected " +
                                        std::to_string(3 * dims.pixels()));
  }
}

namespace {

const std::array<double, 256>& srgb_to_linear_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) {
      const double c = i / 255.0;
      t[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    }
    return t;
  }();
  return table;
}

double lab_f(double t) {
  constexpr double kEpsilon = 216.0 / 24389.0;
  constexpr double kKappa = 24389.0 / 27.0;
  return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

}  // namespace

LabImage rgb_to_lab(const RgbImage& image) {
  image.validate();
  // D65 reference white.
  constexpr double kXn = 0.95047;
  constexpr double kYn = 1.0;
  constexpr double kZn = 1.08883;
  const auto& lin = srgb_to_linear_table();
  LabImage out{image.dims, std::vector<double>(3 * image.dims.pixels())};
  // Direct-mapped colour cache: natural images repeat colours heavily and the
  // conversion (three cube roots) dominates otherwise.
  constexpr std::size_t kCacheBits = 16;
  struct Slot {
    std::uint32_t key = 0xFFFFFFFFu;
    double lab[3];
  };
  std::vector<Slot> cache(std::size_t{1} << kCacheBits);
  for (std::size_t i = 0; i < image.dims.pixels(); ++i) {
    const std::uint8_t* px = &image.pixels[3 * i];
    const std::uint32_t key = (std::uint32_t{px[0]} << 16) | (std::uint32_t{px[1]} << 8) | px[2];
    Slot& slot = cache[((key * 2654435761u) >> (32 - kCacheBits)) & ((1u << kCacheBits) - 1)];
    if (slot.key != key) {
      const double r = lin[px[0]];
      const double g = lin[px[1]];
      const double b = lin[px[2]];
      const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
      const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
      const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
      const double fx = lab_f(x / kXn);
      const double fy = lab_f(y / kYn);
      const double fz = lab_f(z / kZn);
      slot.key = key;
      slot.lab[0] = 116.0 * fy - 16.0;
      slot.lab[1] = 500.0 * (fx - fy);
      slot.lab[2] = 200.0 * (fy - fz);
    }
    out.values[3 * i] = slot.lab[0];
    out.values[3 * i + 1] = slot.lab[1];
    out.values[3 * i + 2] = slot.lab[2];
  }
  return out;
}

SeedGrid slic_seed_grid(ImageDims dims, std::uint32_t num_components) {
  check_dims(dims);
  const double k = num_components;
  SeedGrid best;
  double best_cost = std::numeric_limits<double>::infinity();
  const std::uint32_t max_rows = std::min(dims.height, num_components);
  for (std::uint32_t rows = 1; rows <= max_rows; ++rows) {
    const std::uint32_t cols_cap = std::min(dims.width, num_components / rows);
    for (std::uint32_t cols = 1; cols <= cols_cap; ++cols) {
      const double cell_h = static_cast<double>(dims.height) / rows;
      const double cell_w = static_cast<double>(dims.width) / cols;
      const double cost = std::abs(std::log(rows * static_cast<double>(cols) / k)) +
                          0.5 * std::abs(std::log(cell_h / cell_w));
      // Strict improvement with a small margin keeps float noise from
      // flipping exact ties; among ties the later (more columns) wins.
      if (cost < best_cost - 1e-12 ||
          (std::abs(cost - best_cost) <= 1e-12 && cols > best.cols)) {
        best_cost = cost;
        best = {rows, cols};
      }
    }
  }
  return best;
}

namespace {

struct Center {
  double l, a, b, y, x;
};

class Segmenter {
 public:
  Segmenter(const RgbImage& image, const SlicConfig& config)
      : dims_(image.dims),
        h_(image.dims.height),
        w_(image.dims.width),
        lab_(rgb_to_lab(image)),
        config_(config) {
    const std::size_t n = dims_.pixels();
    plane_l_.resize(n);
    plane_a_.resize(n);
    plane_b_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      plane_l_[i] = lab_.values[3 * i];
      plane_a_[i] = lab_.values[3 * i + 1];
      plane_b_[i] = lab_.values[3 * i + 2];
    }
    col_coord_.resize(w_);
    for (std::size_t x = 0; x < w_; ++x) col_coord_[x] = static_cast<double>(x);
    step_ = std::sqrt(static_cast<double>(dims_.pixels()) / config.num_components);
    spatial_weight_ = (config.compactness / step_) * (config.compactness / step_);
  }

  MaskSet run(SlicTrace* trace) {
    init_centers();
    assign_and_iterate(trace);
    const std::uint32_t min_px = config_.min_component_px.value_or(
        std::max<std::uint32_t>(1, static_cast<std::uint32_t>(step_ * step_ / 4.0)));
    std::uint32_t merged = 0;
    MaskSet out = enforce_connectivity(min_px, &merged);
    if (trace != nullptr) {
      trace->seeds = static_cast<std::uint32_t>(centers_.size());
      trace->merged_components = merged;
    }
    return out;
  }

 private:
  const double* lab(std::size_t idx) const { return &lab_.values[3 * idx]; }

  double gradient(std::size_t y, std::size_t x) const {
    const std::size_t xl = x > 0 ? x - 1 : x;
    const std::size_t xr = x + 1 < w_ ? x + 1 : x;
    const std::size_t yu = y > 0 ? y - 1 : y;
    const std::size_t yd = y + 1 < h_ ? y + 1 : y;
    double g = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double dx = lab(y * w_ + xr)[c] - lab(y * w_ + xl)[c];
      const double dy = lab(yd * w_ + x)[c] - lab(yu * w_ + x)[c];
      g += dx * dx + dy * dy;
    }
    return g;
  }

  void init_centers() {
    const SeedGrid grid = slic_seed_grid(dims_, config_.num_components);
    centers_.clear();
    for (std::uint32_t i = 0; i < grid.rows; ++i) {
      for (std::uint32_t j = 0; j < grid.cols; ++j) {
        double cy = (i + 0.5) * h_ / grid.rows - 0.5;
        double cx = (j + 0.5) * w_ / grid.cols - 0.5;
        const std::size_t ry = std::min<std::size_t>(h_ - 1, static_cast<std::size_t>(std::floor(cy + 0.5)));
        const std::size_t rx = std::min<std::size_t>(w_ - 1, static_cast<std::size_t>(std::floor(cx + 0.5)));
        // Move to the lowest-gradient pixel of the 3x3 neighbourhood, but only
        // on strict improvement so flat images keep the lattice positions.
        double best = gradient(ry, rx);
        std::size_t by = ry;
        std::size_t bx = rx;
        bool moved = false;
        for (std::size_t yy = ry > 0 ? ry - 1 : 0; yy <= std::min<std::size_t>(h_ - 1, ry + 1); ++yy) {
          for (std::size_t xx = rx > 0 ? rx - 1 : 0; xx <= std::min<std::size_t>(w_ - 1, rx + 1); ++xx) {
            const double g = gradient(yy, xx);
            if (g < best) {
              best = g;
              by = yy;
              bx = xx;
              moved = true;
            }
          }
        }
        if (moved) {
          cy = static_cast<double>(by);
          cx = static_cast<double>(bx);
        }
        const double* c = lab(by * w_ + bx);
        centers_.push_back({c[0], c[1], c[2], cy, cx});
      }
    }
  }

  double distance2(std::size_t idx, std::size_t y, std::size_t x,
                   const Center& c) const {
    const double* p = lab(idx);
    const double dl = p[0] - c.l;
    const double da = p[1] - c.a;
    const double db = p[2] - c.b;
    const double dy = static_cast<double>(y) - c.y;
    const double dx = static_cast<double>(x) - c.x;
    return dl * dl + da * da + db * db + (dy * dy + dx * dx) * spatial_weight_;
  }

  void assign_and_iterate(SlicTrace* trace) {
    const std::size_t n = dims_.pixels();
    labels_.assign(n, -1);
    std::vector<double> dist(n);
    std::vector<std::int32_t> previous;
    for (std::uint32_t iter = 0; iter < config_.max_iters; ++iter) {
      previous = labels_;
      // Keeping each pixel's current centre as a candidate makes the cost
      // sequence non-increasing even when centres drift out of a window.
      for (std::size_t y = 0, i = 0; y < h_; ++y) {
        for (std::size_t x = 0; x < w_; ++x, ++i) {
          dist[i] = labels_[i] >= 0
                        ? distance2(i, y, x, centers_[static_cast<std::size_t>(labels_[i])])
                        : std::numeric_limits<double>::infinity();
        }
      }
      for (std::size_t k = 0; k < centers_.size(); ++k) {
        const Center& c = centers_[k];
        const auto y0 = static_cast<std::ptrdiff_t>(std::ceil(c.y - step_));
        const auto y1 = static_cast<std::ptrdiff_t>(std::floor(c.y + step_));
        const auto x0 = static_cast<std::ptrdiff_t>(std::ceil(c.x - step_));
        const auto x1 = static_cast<std::ptrdiff_t>(std::floor(c.x + step_));
        const std::size_t ya = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, y0));
        const std::size_t yb = static_cast<std::size_t>(std::min<std::ptrdiff_t>(h_ - 1, y1));
        const std::size_t xa = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, x0));
        const std::size_t xb = static_cast<std::size_t>(std::min<std::ptrdiff_t>(w_ - 1, x1));
        if (y1 < 0 || x1 < 0) continue;
        const auto label = static_cast<std::int32_t>(k);
        const double cl = c.l, ca = c.a, cb = c.b, cx = c.x, sw = spatial_weight_;
        for (std::size_t y = ya; y <= yb; ++y) {
          const double dy = static_cast<double>(y) - c.y;
          const double row_term = dy * dy;
          const std::size_t row = y * w_;
          const double* pl = plane_l_.data() + row;
          const double* pa = plane_a_.data() + row;
          const double* pb = plane_b_.data() + row;
          double* drow = dist.data() + row;
          std::int32_t* lrow = labels_.data() + row;
          // Branch-free body so the compiler can vectorise the row.
          for (std::size_t x = xa; x <= xb; ++x) {
            const double dl = pl[x] - cl;
            const double da = pa[x] - ca;
            const double db = pb[x] - cb;
            const double dx = col_coord_[x] - cx;
            const double d = dl * dl + da * da + db * db + (row_term + dx * dx) * sw;
            const bool take = (d < drow[x]) | ((d == drow[x]) & (label < lrow[x]));
            drow[x] = take ? d : drow[x];
            lrow[x] = take ? label : lrow[x];
          }
        }
      }
      // Pixels outside every window (only possible on the first pass with
      // degenerate lattices) go to the globally nearest centre.
      for (std::size_t i = 0; i < n; ++i) {
        if (labels_[i] >= 0) continue;
        for (std::size_t k = 0; k < centers_.size(); ++k) {
          const double d = distance2(i, i / w_, i % w_, centers_[k]);
          if (d < dist[i]) {
            dist[i] = d;
            labels_[i] = static_cast<std::int32_t>(k);
          }
        }
      }
      double cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) cost += dist[i];
      if (trace != nullptr) trace->iteration_costs.push_back(cost);
      if (iter > 0 && previous == labels_) break;
      update_centers();
    }
  }

  void update_centers() {
    std::vector<std::array<double, 5>> sums(centers_.size(), {0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(centers_.size(), 0);
    for (std::size_t y = 0, i = 0; y < h_; ++y) {
      for (std::size_t x = 0; x < w_; ++x, ++i) {
        const auto k = static_cast<std::size_t>(labels_[i]);
        const double* p = lab(i);
        auto& s = sums[k];
        s[0] += p[0];
        s[1] += p[1];
        s[2] += p[2];
        s[3] += static_cast<double>(y);
        s[4] += static_cast<double>(x);
        ++counts[k];
      }
    }
    for (std::size_t k = 0; k < centers_.size(); ++k) {
      if (counts[k] == 0) continue;
      const double n = static_cast<double>(counts[k]);
      centers_[k] = {sums[k][0] / n, sums[k][1] / n, sums[k][2] / n,
                     sums[k][3] / n, sums[k][4] / n};
    }
  }

  // Every non-largest component of a cluster, and every component smaller than
  // min_px, is merged into its largest adjacent component. Components are
  // visited in raster order of their first pixel.
  MaskSet enforce_connectivity(std::uint32_t min_px, std::uint32_t* merged) {
    const std::size_t n = dims_.pixels();
    std::vector<std::int32_t> comp(n, -1);
    std::vector<std::int32_t> comp_label;
    std::vector<std::size_t> comp_size;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
      if (comp[start] >= 0) continue;
      const auto id = static_cast<std::int32_t>(comp_label.size());
      const std::int32_t label = labels_[start];
      std::size_t size = 0;
      comp[start] = id;
      stack.push_back(start);
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        ++size;
        const std::size_t y = p / w_;
        const std::size_t x = p % w_;
        auto visit = [&](std::size_t q) {
          if (comp[q] < 0 && labels_[q] == label) {
            comp[q] = id;
            stack.push_back(q);
          }
        };
        if (x > 0) visit(p - 1);
        if (x + 1 < w_) visit(p + 1);
        if (y > 0) visit(p - w_);
        if (y + 1 < h_) visit(p + w_);
      }
      comp_label.push_back(label);
      comp_size.push_back(size);
    }
    const std::size_t num_comps = comp_label.size();

    // Component adjacency in CSR form: count, fill, then sort and dedupe
    // each component's short neighbour list in place.
    auto for_each_edge = [&](auto&& fn) {
      for (std::size_t p = 0; p < n; ++p) {
        const auto a = static_cast<std::size_t>(comp[p]);
        if (p % w_ + 1 < w_ && comp[p + 1] != comp[p]) fn(a, static_cast<std::size_t>(comp[p + 1]));
        if (p / w_ + 1 < h_ && comp[p + w_] != comp[p]) fn(a, static_cast<std::size_t>(comp[p + w_]));
      }
    };
    std::vector<std::size_t> fill(num_comps + 1, 0);
    for_each_edge([&](std::size_t a, std::size_t b) {
      ++fill[a + 1];
      ++fill[b + 1];
    });
    std::partial_sum(fill.begin(), fill.end(), fill.begin());
    std::vector<std::size_t> neighbours(fill.back());
    std::vector<std::size_t> cursor(fill.begin(), fill.end() - 1);
    for_each_edge([&](std::size_t a, std::size_t b) {
      neighbours[cursor[a]++] = b;
      neighbours[cursor[b]++] = a;
    });
    std::vector<std::size_t> adj_begin(num_comps + 1, 0);
    std::size_t write = 0;
    for (std::size_t c = 0; c < num_comps; ++c) {
      auto first = neighbours.begin() + static_cast<std::ptrdiff_t>(fill[c]);
      auto last = neighbours.begin() + static_cast<std::ptrdiff_t>(fill[c + 1]);
      std::sort(first, last);
      last = std::unique(first, last);
      adj_begin[c] = write;
      for (auto it = first; it != last; ++it) neighbours[write++] = *it;
    }
    adj_begin[num_comps] = write;

    // Largest component per cluster label (first in raster order on ties).
    std::vector<std::int64_t> primary(centers_.size(), -1);
    for (std::size_t c = 0; c < num_comps; ++c) {
      auto& p = primary[static_cast<std::size_t>(comp_label[c])];
      if (p < 0 || comp_size[c] > comp_size[static_cast<std::size_t>(p)]) {
        p = static_cast<std::int64_t>(c);
      }
    }

    std::vector<std::size_t> parent(num_comps);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<std::size_t> group_size = comp_size;
    // Members of each group as an intrusive singly linked list.
    constexpr std::size_t kEnd = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> next(num_comps, kEnd);
    std::vector<std::size_t> head(num_comps);
    std::vector<std::size_t> tail(num_comps);
    std::iota(head.begin(), head.end(), 0);
    std::iota(tail.begin(), tail.end(), 0);
    auto find = [&](std::size_t c) {
      while (parent[c] != c) {
        parent[c] = parent[parent[c]];
        c = parent[c];
      }
      return c;
    };

    *merged = 0;
    for (std::size_t c = 0; c < num_comps; ++c) {
      if (find(c) != c) continue;
      const bool is_primary =
          primary[static_cast<std::size_t>(comp_label[c])] == static_cast<std::int64_t>(c);
      if (is_primary && group_size[c] >= min_px) continue;
      std::size_t target = num_comps;
      for (std::size_t m = head[c]; m != kEnd; m = next[m]) {
        for (std::size_t e = adj_begin[m]; e < adj_begin[m + 1]; ++e) {
          const std::size_t r = find(neighbours[e]);
          if (r == c) continue;
          if (target == num_comps || group_size[r] > group_size[target] ||
              (group_size[r] == group_size[target] && r < target)) {
            target = r;
          }
        }
      }
      if (target == num_comps) continue;
      parent[c] = target;
      group_size[target] += group_size[c];
      next[tail[target]] = head[c];
      tail[target] = tail[c];
      ++*merged;
    }

    // Roots in raster order of their first pixel become the output masks.
    std::vector<std::int64_t> mask_index(num_comps, -1);
    std::vector<IntervalList> intervals;
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t r = find(static_cast<std::size_t>(comp[p]));
      if (mask_index[r] < 0) {
        mask_index[r] = static_cast<std::int64_t>(intervals.size());
        intervals.emplace_back();
      }
      IntervalList& list = intervals[static_cast<std::size_t>(mask_index[r])];
      if (!list.empty() && list.back().end == p) {
        list.back().end = p + 1;
      } else {
        list.push_back({p, p + 1});
      }
    }
    MaskSet out{dims_, {}};
    out.masks.reserve(intervals.size());
    for (auto& list : intervals) {
      out.masks.push_back(
          RegionMask::from_intervals(dims_, std::move(list), MaskSource::kSlic));
    }
    return out;
  }

  ImageDims dims_;
  std::size_t h_;
  std::size_t w_;
  LabImage lab_;
  // Planar copies of lab_ for the assignment inner loop.
  std::vector<double> plane_l_;
  std::vector<double> plane_a_;
  std::vector<double> plane_b_;
  std::vector<double> col_coord_;
  SlicConfig config_;
  double step_ = 1.0;
  double spatial_weight_ = 1.0;
  std::vector<Center> centers_;
  std::vector<std::int32_t> labels_;
};

}  // namespace

MaskSet slic_segment(const RgbImage& image, const SlicConfig& config,
                     SlicTrace* trace) {
  config.validate();
  image.validate();
  if (image.dims.pixels() < config.num_components) {
    throw Error(ErrorCode::kConfig,
                "image has " + std::to_string(image.dims.pixels()) +
                    " pixels, fewer than num_components " +
                    std::to_string(config.num_components));
  }
  return Segmenter(image, config).run(trace);
}

}  // namespace rbr
