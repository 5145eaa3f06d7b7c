#include "rbr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "rbr/random.hpp"

namespace rbr {

void SceneConfig::validate() const {
  check_dims(dims);
  if (num_classes == 0 || num_segments < num_classes) {
    throw Error(ErrorCode::kConfig, "need num_segments >= num_classes >= 1, got " +
                                        std::to_string(num_segments) + " segments and " +
                                        std::to_string(num_classes) + " classes");
  }
  if (num_classes >= kIgnoreLabel) throw Error(ErrorCode::kConfig, "too many classes");
  if (patch == 0 || dims.height % patch != 0 || dims.width % patch != 0) {
    throw Error(ErrorCode::kConfig, "patch size " + std::to_string(patch) +
                                        " must divide the image dims");
  }
  if (feature_dim < num_classes + 2) {
    throw Error(ErrorCode::kConfig, "feature_dim must be at least num_classes + 2");
  }
  if (small_segment && patch < 2) {
    throw Error(ErrorCode::kConfig, "the small segment needs a patch size of at least 2");
  }
  if (!(noise_std >= 0.0) || !(prototype_scale > 0.0)) {
    throw Error(ErrorCode::kConfig, "noise must be >= 0 and the prototype scale > 0");
  }
}

namespace {

std::array<std::uint8_t, 3> class_color(std::uint32_t k, std::uint32_t num_classes) {
  // Evenly spaced hues at fixed saturation and value.
  const double h = 6.0 * static_cast<double>(k) / num_classes;
  const double s = 0.8;
  const double v = 0.9;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s);
  const double q = v * (1 - s * f);
  const double t = v * (1 - s * (1 - f));
  std::array<double, 3> rgb{};
  switch (sector) {
    case 0: rgb = {v, t, p}; break;
    case 1: rgb = {q, v, p}; break;
    case 2: rgb = {p, v, t}; break;
    case 3: rgb = {p, q, v}; break;
    case 4: rgb = {t, p, v}; break;
    default: rgb = {v, p, q}; break;
  }
  return {static_cast<std::uint8_t>(std::lround(255 * rgb[0])),
          static_cast<std::uint8_t>(std::lround(255 * rgb[1])),
          static_cast<std::uint8_t>(std::lround(255 * rgb[2]))};
}

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Paints segment ids into `owner`; returns the number of segments.
std::uint32_t paint_layout(Rng& rng, const SceneConfig& cfg, std::vector<std::uint32_t>& owner) {
  const std::int64_t h = cfg.dims.height;
  const std::int64_t w = cfg.dims.width;
  std::fill(owner.begin(), owner.end(), 0u);
  for (std::uint32_t s = 1; s < cfg.num_segments; ++s) {
    const bool ellipse = rng.below(2) == 1;
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    // Half-extents around the size that would tile the image evenly.
    const double r0 = 0.5 * std::sqrt(static_cast<double>(h * w) / cfg.num_segments);
    const double ry = std::max(1.0, rng.uniform(0.7, 1.6) * r0);
    const double rx = std::max(1.0, rng.uniform(0.7, 1.6) * r0);
    const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cy - ry)));
    const auto y1 = std::min<std::int64_t>(h, static_cast<std::int64_t>(std::ceil(cy + ry)));
    const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cx - rx)));
    const auto x1 = std::min<std::int64_t>(w, static_cast<std::int64_t>(std::ceil(cx + rx)));
    for (std::int64_t y = y0; y < y1; ++y) {
      for (std::int64_t x = x0; x < x1; ++x) {
        if (ellipse) {
          const double dy = (y + 0.5 - cy) / ry;
          const double dx = (x + 0.5 - cx) / rx;
          if (dy * dy + dx * dx > 1.0) continue;
        }
        owner[y * w + x] = s;
      }
    }
  }
  if (!cfg.small_segment) return cfg.num_segments;
  const std::uint32_t p = cfg.patch;
  const std::uint32_t side = p / 2;
  const auto gy = static_cast<std::uint32_t>(rng.below(cfg.dims.height / p));
  const auto gx = static_cast<std::uint32_t>(rng.below(cfg.dims.width / p));
  const auto oy = static_cast<std::uint32_t>(rng.below(p - side + 1));
  const auto ox = static_cast<std::uint32_t>(rng.below(p - side + 1));
  for (std::uint32_t y = 0; y < side; ++y) {
    for (std::uint32_t x = 0; x < side; ++x) {
      owner[(gy * p + oy + y) * w + gx * p + ox + x] = cfg.num_segments;
    }
  }
  return cfg.num_segments + 1;
}

}  // namespace

SynthScene gen_scene(std::uint64_t seed, const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(seed);
  const ImageDims dims = cfg.dims;
  const std::size_t n = dims.pixels();
  std::vector<std::uint32_t> owner(n);
  std::uint32_t segments = 0;
  std::vector<std::size_t> area;
  std::uint32_t attempt = 0;
  for (;; ++attempt) {
    if (attempt == cfg.max_attempts) {
      throw Error(ErrorCode::kConfig,
                  "could not place " + std::to_string(cfg.num_segments) + " segments with " +
                      std::to_string(cfg.min_segment_px) + "+ visible pixels in " +
                      std::to_string(dims.height) + "x" + std::to_string(dims.width) +
                      " after " + std::to_string(cfg.max_attempts) +
                      " layouts; lower num_segments or min_segment_px");
    }
    segments = paint_layout(rng, cfg, owner);
    area.assign(segments, 0);
    for (std::uint32_t s : owner) ++area[s];
    // The planted small segment is exempt from the size floor by design.
    if (std::all_of(area.begin(), area.begin() + cfg.num_segments,
                    [&](std::size_t a) { return a >= cfg.min_segment_px; })) {
      break;
    }
  }

  SynthScene scene;
  std::vector<std::uint16_t> perm(cfg.num_classes);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::uint16_t>(perm));
  scene.segment_classes.resize(segments);
  for (std::uint32_t s = 0; s < segments; ++s) {
    scene.segment_classes[s] =
        s < cfg.num_classes ? perm[s] : static_cast<std::uint16_t>(rng.below(cfg.num_classes));
  }

  scene.labels.dims = dims;
  scene.labels.num_classes = static_cast<std::uint16_t>(cfg.num_classes);
  scene.labels.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) scene.labels.labels[i] = scene.segment_classes[owner[i]];

  // Per-segment intervals from one raster pass.
  std::vector<IntervalList> intervals(segments);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && owner[j] == owner[i]) ++j;
    intervals[owner[i]].push_back({i, j});
    i = j;
  }
  scene.aligned.dims = dims;
  for (std::uint32_t s = 0; s < segments; ++s) {
    scene.aligned.masks.push_back(
        RegionMask::from_intervals(dims, std::move(intervals[s]), MaskSource::kSynthetic));
  }

  std::vector<std::array<double, 3>> seg_color(segments);
  for (std::uint32_t s = 0; s < segments; ++s) {
    const auto base = class_color(scene.segment_classes[s], cfg.num_classes);
    for (int c = 0; c < 3; ++c) seg_color[s][c] = base[c] + rng.uniform(-12.0, 12.0);
  }
  scene.image.dims = dims;
  scene.image.pixels.resize(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      scene.image.pixels[3 * i + c] = clamp_byte(seg_color[owner[i]][c] + rng.uniform(-4.0, 4.0));
    }
  }

  const std::uint32_t p = cfg.patch;
  const std::uint32_t gh = dims.height / p;
  const std::uint32_t gw = dims.width / p;
  scene.features = FeatureGrid::zeros(cfg.feature_dim, gh, gw, p, dims);
  std::vector<double> frac(cfg.num_classes);
  for (std::uint32_t gy = 0; gy < gh; ++gy) {
    for (std::uint32_t gx = 0; gx < gw; ++gx) {
      std::fill(frac.begin(), frac.end(), 0.0);
      for (std::uint32_t y = gy * p; y < (gy + 1) * p; ++y) {
        for (std::uint32_t x = gx * p; x < (gx + 1) * p; ++x) {
          frac[scene.labels.labels[static_cast<std::size_t>(y) * dims.width + x]] += 1.0;
        }
      }
      for (std::uint32_t c = 0; c < cfg.feature_dim; ++c) {
        double v = 0.0;
        if (c < cfg.num_classes) {
          v = cfg.prototype_scale * frac[c] / static_cast<double>(p * p);
        } else if (c == cfg.feature_dim - 2) {
          v = cfg.ramp_scale * (gy + 0.5) / gh;
        } else if (c == cfg.feature_dim - 1) {
          v = cfg.ramp_scale * (gx + 0.5) / gw;
        }
        v += rng.normal(0.0, cfg.noise_std);
        scene.features.at(c, gy, gx) = static_cast<float>(v);
      }
    }
  }
  return scene;
}

RetrievalDb gen_retrieval_db(std::uint64_t seed, const RetrievalDbConfig& cfg) {
  if (cfg.num_images == 0 || cfg.num_classes == 0 || cfg.regions_per_image == 0 ||
      cfg.dim <= cfg.num_classes) {
    throw Error(ErrorCode::kConfig,
                "retrieval db needs images, classes, regions and dim > num_classes");
  }
  if (!(cfg.noise_std >= 0.0) || !(cfg.class_probability >= 0.0 && cfg.class_probability <= 1.0)) {
    throw Error(ErrorCode::kConfig, "noise must be >= 0 and class_probability in [0, 1]");
  }
  Rng rng(seed);
  RetrievalDb db;
  db.image_classes.resize(cfg.num_images);
  for (auto& classes : db.image_classes) {
    for (std::uint32_t k = 0; k < cfg.num_classes; ++k) {
      if (rng.uniform() < cfg.class_probability && classes.size() < cfg.regions_per_image) {
        classes.push_back(k);
      }
    }
  }
  for (std::uint32_t k = 0; k < cfg.num_classes; ++k) {
    const bool present = std::any_of(db.image_classes.begin(), db.image_classes.end(),
                                     [&](const auto& c) {
                                       return std::find(c.begin(), c.end(), k) != c.end();
                                     });
    if (present) continue;
    const auto start = static_cast<std::uint32_t>(rng.below(cfg.num_images));
    for (std::uint32_t off = 0; off < cfg.num_images; ++off) {
      auto& classes = db.image_classes[(start + off) % cfg.num_images];
      if (classes.size() < cfg.regions_per_image || off + 1 == cfg.num_images) {
        classes.push_back(k);
        break;
      }
    }
  }

  auto noisy = [&](std::vector<float>& v) {
    if (cfg.noise_std == 0.0) return;
    for (float& x : v) x = static_cast<float>(x + rng.normal(0.0, cfg.noise_std));
  };
  for (std::uint32_t i = 0; i < cfg.num_images; ++i) {
    const auto& classes = db.image_classes[i];
    const std::size_t regions = std::max<std::size_t>(cfg.regions_per_image, classes.size());
    for (std::size_t r = 0; r < regions; ++r) {
      RegionVector v{i, static_cast<std::uint32_t>(r), std::vector<float>(cfg.dim, 0.0f)};
      if (cfg.distractor_only) {
        for (float& x : v.values) x = static_cast<float>(rng.normal());
      } else if (r < classes.size()) {
        v.values[classes[r]] = static_cast<float>(cfg.prototype_scale);
      } else {
        for (std::uint32_t c = cfg.num_classes; c < cfg.dim; ++c) {
          v.values[c] = static_cast<float>(rng.normal());
        }
      }
      noisy(v.values);
      db.database.push_back(std::move(v));
    }
  }

  for (std::uint32_t k = 0; k < cfg.num_classes; ++k) {
    std::vector<std::uint32_t> relevant;
    for (std::uint32_t i = 0; i < cfg.num_images; ++i) {
      const auto& c = db.image_classes[i];
      if (std::find(c.begin(), c.end(), k) != c.end()) relevant.push_back(i);
    }
    for (std::uint32_t q = 0; q < cfg.queries_per_class; ++q) {
      RetrievalQuery query;
      query.class_id = k;
      query.vector = {0xFFFFFFFFu, q, std::vector<float>(cfg.dim, 0.0f)};
      query.vector.values[k] = static_cast<float>(cfg.prototype_scale);
      noisy(query.vector.values);
      query.relevant = relevant;
      db.queries.push_back(std::move(query));
    }
  }
  return db;
}

double random_ranking_ap(std::size_t n, std::size_t r) {
  if (n == 0 || r == 0) return 0.0;
  if (n == 1) return 1.0;
  // A relevant image at rank k has 1 + (k-1)(r-1)/(n-1) relevant images at
  // or above it in expectation, and its rank is uniform on 1..n.
  const double nn = static_cast<double>(n);
  const double ratio = (static_cast<double>(r) - 1.0) / (nn - 1.0);
  double sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    sum += (1.0 + (static_cast<double>(k) - 1.0) * ratio) / static_cast<double>(k);
  }
  return sum / nn;
}

}  // namespace rbr
