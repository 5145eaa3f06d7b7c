// Test-only reference implementations and random instance generators. Every
// oracle here is written the slow, obvious way so it can check the library.
#ifndef RBR_TESTS_ORACLES_HPP_
#define RBR_TESTS_ORACLES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "rbr/core.hpp"
#include "rbr/decoders.hpp"
#include "rbr/random.hpp"
#include "rbr/segmap.hpp"
#include "rbr/slic.hpp"

namespace rbr::oracle {

inline FeatureGrid random_grid(Rng& rng, std::uint32_t max_grid, std::uint32_t max_dim,
                               std::uint32_t max_patch) {
  FeatureGrid g;
  g.dim = 1 + static_cast<std::uint32_t>(rng.below(max_dim));
  g.grid_h = 1 + static_cast<std::uint32_t>(rng.below(max_grid));
  g.grid_w = 1 + static_cast<std::uint32_t>(rng.below(max_grid));
  g.patch = 1 + static_cast<std::uint32_t>(rng.below(max_patch));
  g.image_dims = {g.grid_h * g.patch, g.grid_w * g.patch};
  g.data.resize(static_cast<std::size_t>(g.dim) * g.grid_h * g.grid_w);
  for (float& v : g.data) v = static_cast<float>(rng.normal());
  return g;
}

/// A random rectangle or scatter of pixels, never empty.
inline Bitmap random_bitmap(Rng& rng, ImageDims dims) {
  Bitmap b{dims, std::vector<std::uint8_t>(dims.pixels(), 0)};
  switch (rng.below(3)) {
    case 0: {  // rectangle
      const auto r0 = rng.below(dims.height), c0 = rng.below(dims.width);
      const auto r1 = r0 + rng.below(dims.height - r0), c1 = c0 + rng.below(dims.width - c0);
      for (auto r = r0; r <= r1; ++r)
        for (auto c = c0; c <= c1; ++c) b.bits[r * dims.width + c] = 1;
      break;
    }
    case 1: {  // scattered pixels
      const double p = rng.uniform(0.05, 0.6);
      for (auto& bit : b.bits) bit = rng.uniform() < p;
      break;
    }
    default:  // a handful of single pixels
      for (int k = 0; k < 3; ++k) b.bits[rng.below(dims.pixels())] = 1;
  }
  if (std::find(b.bits.begin(), b.bits.end(), 1) == b.bits.end()) {
    b.bits[rng.below(dims.pixels())] = 1;
  }
  return b;
}

inline MaskSet random_mask_set(Rng& rng, ImageDims dims, std::size_t max_masks) {
  MaskSet set{dims, {}};
  const std::size_t n = 1 + rng.below(max_masks);
  for (std::size_t i = 0; i < n; ++i) set.masks.push_back(rle_encode(random_bitmap(rng, dims)));
  return set;
}

inline LabelMap random_labels(Rng& rng, ImageDims dims, std::uint16_t classes,
                              double ignore_p = 0.0) {
  LabelMap m{dims, std::vector<std::uint16_t>(dims.pixels()), classes};
  for (auto& l : m.labels) {
    l = rng.uniform() < ignore_p ? kIgnoreLabel : static_cast<std::uint16_t>(rng.below(classes));
  }
  return m;
}

/// Bilinear sample of a patch grid at image pixel (y, x), written directly
/// from the half-pixel-centre convention.
inline long double sample_bilinear(const FeatureGrid& g, std::size_t c, std::size_t y,
                                   std::size_t x) {
  auto coord = [](std::size_t i, std::uint32_t in, std::uint32_t out) {
    long double s = ((i + 0.5L) * in) / out - 0.5L;
    if (s < 0) s = 0;
    if (s > in - 1.0L) s = in - 1.0L;
    return s;
  };
  const long double sy = coord(y, g.grid_h, g.image_dims.height);
  const long double sx = coord(x, g.grid_w, g.image_dims.width);
  const auto y0 = static_cast<std::size_t>(std::floor(sy));
  const auto x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min<std::size_t>(y0 + 1, g.grid_h - 1);
  const std::size_t x1 = std::min<std::size_t>(x0 + 1, g.grid_w - 1);
  const long double fy = sy - y0, fx = sx - x0;
  return (1 - fy) * ((1 - fx) * g.at(c, y0, x0) + fx * g.at(c, y0, x1)) +
         fy * ((1 - fx) * g.at(c, y1, x0) + fx * g.at(c, y1, x1));
}

/// Mean of the upsampled features over the mask, pixel by pixel.
inline std::vector<long double> brute_pool_average(const FeatureGrid& g, const Bitmap& mask) {
  std::vector<long double> acc(g.dim, 0.0L);
  std::size_t n = 0;
  for (std::size_t y = 0; y < mask.dims.height; ++y) {
    for (std::size_t x = 0; x < mask.dims.width; ++x) {
      if (!mask.bits[y * mask.dims.width + x]) continue;
      ++n;
      for (std::size_t c = 0; c < g.dim; ++c) acc[c] += sample_bilinear(g, c, y, x);
    }
  }
  for (auto& v : acc) v /= static_cast<long double>(n);
  return acc;
}

/// Confusion counts straight from a label array; -1 predictions are void.
inline std::vector<std::size_t> brute_confusion(const std::vector<std::int32_t>& pred,
                                                const LabelMap& gt) {
  const std::size_t cols = gt.num_classes + 1u;
  std::vector<std::size_t> cm(static_cast<std::size_t>(gt.num_classes) * cols, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt.labels[i] == kIgnoreLabel) continue;
    const std::size_t col = pred[i] < 0 ? gt.num_classes : static_cast<std::size_t>(pred[i]);
    ++cm[gt.labels[i] * cols + col];
  }
  return cm;
}

/// mIoU from first principles: per class, |gt and pred| / |gt or pred| over
/// evaluated pixels, averaged over classes present in either.
inline std::optional<double> brute_miou(const std::vector<std::int32_t>& pred,
                                        const LabelMap& gt) {
  double sum = 0;
  int present = 0;
  for (int c = 0; c < gt.num_classes; ++c) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (gt.labels[i] == kIgnoreLabel) continue;
      const bool g = gt.labels[i] == c, p = pred[i] == c;
      inter += g && p;
      uni += g || p;
    }
    if (uni > 0) {
      sum += static_cast<double>(inter) / static_cast<double>(uni);
      ++present;
    }
  }
  if (present == 0) return std::nullopt;
  return sum / present;
}

struct BruteHit {
  std::uint32_t image_id;
  double score;
};

/// Every row scored with a long double dot product; images ranked by their
/// best row, ties by ascending id.
inline std::vector<BruteHit> brute_rank(const std::vector<RegionVector>& db,
                                        const std::vector<float>& q, bool normalize) {
  auto norm = [](const std::vector<float>& v) {
    long double s = 0;
    for (float x : v) s += static_cast<long double>(x) * x;
    return std::sqrt(s);
  };
  const long double qn = normalize ? norm(q) : 1.0L;
  std::map<std::uint32_t, long double> best;
  for (const auto& r : db) {
    long double dot = 0;
    for (std::size_t i = 0; i < q.size(); ++i) dot += static_cast<long double>(q[i]) * r.values[i];
    if (normalize) dot /= qn * norm(r.values);
    auto it = best.find(r.image_id);
    if (it == best.end() || dot > it->second) best[r.image_id] = dot;
  }
  std::vector<BruteHit> out;
  for (const auto& [id, s] : best) out.push_back({id, static_cast<double>(s)});
  std::stable_sort(out.begin(), out.end(),
                   [](const BruteHit& a, const BruteHit& b) { return a.score > b.score; });
  return out;
}

inline double brute_ap(const std::vector<bool>& relevant_by_rank, std::size_t total_relevant) {
  double sum = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < relevant_by_rank.size(); ++i) {
    if (relevant_by_rank[i]) sum += static_cast<double>(++hits) / static_cast<double>(i + 1);
  }
  return total_relevant == 0 ? 0.0 : sum / static_cast<double>(total_relevant);
}

/// Count of 4-connected components of a bitmap.
inline std::size_t components4(const Bitmap& b) {
  const std::size_t h = b.dims.height, w = b.dims.width;
  std::vector<std::uint8_t> seen(b.bits.size(), 0);
  std::size_t count = 0;
  for (std::size_t s = 0; s < b.bits.size(); ++s) {
    if (!b.bits[s] || seen[s]) continue;
    ++count;
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop();
      const std::size_t r = p / w, c = p % w;
      const std::size_t nb[4] = {r > 0 ? p - w : p, r + 1 < h ? p + w : p, c > 0 ? p - 1 : p,
                                 c + 1 < w ? p + 1 : p};
      for (std::size_t n : nb) {
        if (b.bits[n] && !seen[n]) {
          seen[n] = 1;
          q.push(n);
        }
      }
    }
  }
  return count;
}

/// Per-pixel cover count of a mask set.
inline std::vector<int> cover_counts(const MaskSet& set) {
  std::vector<int> cover(set.dims.pixels(), 0);
  for (const auto& m : set.masks) {
    const Bitmap b = rle_decode(m);
    for (std::size_t i = 0; i < cover.size(); ++i) cover[i] += b.bits[i];
  }
  return cover;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Central differences on every scalar of every parameter against the
/// analytic gradient. Relative error is |a - n| / max(1e-6, |a| + |n|)
/// (the floor keeps exact-zero gradients from dividing by zero).
inline GradCheck finite_difference_check(Decoder& decoder, const std::vector<Sequence>& batch,
                                         double h = 1e-5) {
  loss_and_grads(decoder, batch);
  std::vector<std::vector<double>> analytic;
  for (const Param* p : std::as_const(decoder).params()) analytic.push_back(p->grad);
  GradCheck out;
  const auto params = decoder.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = evaluate_loss(decoder, batch);
      p.value[i] = saved - h;
      const double down = evaluate_loss(decoder, batch);
      p.value[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_param = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

/// Random labelled sequences of up to max_tokens tokens, some masked out.
inline std::vector<Sequence> random_sequences(Rng& rng, std::size_t count, std::size_t dim,
                                              std::size_t classes, std::size_t max_tokens,
                                              bool allow_padding) {
  std::vector<Sequence> out;
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t t = 1 + rng.below(max_tokens);
    Sequence seq;
    seq.tokens = Matrix(t, dim);
    for (double& v : seq.tokens.data) v = rng.normal();
    if (allow_padding) {
      seq.mask.assign(t, 1);
      for (std::size_t i = 1; i < t; ++i) seq.mask[i] = rng.uniform() < 0.75;
    }
    for (std::size_t i = 0; i < t; ++i) {
      const bool real = seq.mask.empty() || seq.mask[i];
      seq.targets.push_back(real ? TokenTarget{static_cast<std::int32_t>(rng.below(classes)),
                                               rng.uniform(1.0, 50.0)}
                                 : TokenTarget{});
    }
    out.push_back(std::move(seq));
  }
  return out;
}

/// Random uniform-ish RGB image with a few colour blocks.
inline RgbImage random_image(Rng& rng, ImageDims dims) {
  RgbImage img{dims, std::vector<std::uint8_t>(dims.pixels() * 3)};
  const int blocks = 2 + static_cast<int>(rng.below(6));
  std::vector<std::array<std::uint32_t, 4>> rects;
  std::vector<std::array<std::uint8_t, 3>> colors;
  for (int b = 0; b < blocks; ++b) {
    const auto r0 = static_cast<std::uint32_t>(rng.below(dims.height));
    const auto c0 = static_cast<std::uint32_t>(rng.below(dims.width));
    rects.push_back({r0, c0, r0 + 1 + static_cast<std::uint32_t>(rng.below(dims.height / 2 + 1)),
                     c0 + 1 + static_cast<std::uint32_t>(rng.below(dims.width / 2 + 1))});
    colors.push_back({static_cast<std::uint8_t>(rng.below(256)),
                      static_cast<std::uint8_t>(rng.below(256)),
                      static_cast<std::uint8_t>(rng.below(256))});
  }
  for (std::uint32_t r = 0; r < dims.height; ++r) {
    for (std::uint32_t c = 0; c < dims.width; ++c) {
      std::array<int, 3> px{128, 128, 128};
      for (std::size_t b = 0; b < rects.size(); ++b) {
        const auto& q = rects[b];
        if (r >= q[0] && r < q[2] && c >= q[1] && c < q[3]) {
          px = {colors[b][0], colors[b][1], colors[b][2]};
        }
      }
      for (int k = 0; k < 3; ++k) {
        const int noisy = px[k] + static_cast<int>(rng.below(21)) - 10;
        img.pixels[(r * dims.width + c) * 3 + k] = static_cast<std::uint8_t>(std::clamp(noisy, 0, 255));
      }
    }
  }
  return img;
}

}  // namespace rbr::oracle

#endif  // RBR_TESTS_ORACLES_HPP_
