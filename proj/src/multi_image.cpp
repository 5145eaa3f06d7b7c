#include "rbr/multi_image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "rbr/posemb.hpp"

namespace rbr {

void PointMap::validate() const {
  check_dims(dims);
  if (xyz.size() != 3 * dims.pixels() || valid.size() != dims.pixels()) {
    throw Error(ErrorCode::kFormat, "point map buffers do not match " +
                                        std::to_string(dims.height) + "x" +
                                        std::to_string(dims.width));
  }
}

std::size_t PointMap::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; }));
}

std::optional<SceneBounds> scene_bounds(std::span<const PointMap> maps) {
  std::optional<SceneBounds> bounds;
  for (const PointMap& map : maps) {
    map.validate();
    for (std::size_t p = 0; p < map.dims.pixels(); ++p) {
      if (!map.valid[p]) continue;
      if (!bounds) {
        bounds.emplace();
        for (int a = 0; a < 3; ++a) bounds->lo[a] = bounds->hi[a] = map.xyz[3 * p + a];
        continue;
      }
      for (int a = 0; a < 3; ++a) {
        const double v = map.xyz[3 * p + a];
        bounds->lo[a] = std::min(bounds->lo[a], v);
        bounds->hi[a] = std::max(bounds->hi[a], v);
      }
    }
  }
  return bounds;
}

std::vector<float> embed_2d(const RegionMask& mask, ImageDims dims, std::size_t emb_dim) {
  if (!(mask.dims() == dims)) {
    throw Error(ErrorCode::kDimsMismatch, "mask does not match the image dims");
  }
  const Centroid& c = mask.centroid();
  return sinusoid_2d((c.row + 0.5) / dims.height, (c.col + 0.5) / dims.width, emb_dim);
}

Embedding3d embed_3d(const RegionMask& mask, const PointMap& points,
                     const SceneBounds& bounds, std::size_t emb_dim) {
  points.validate();
  if (!(mask.dims() == points.dims)) {
    throw Error(ErrorCode::kDimsMismatch, "mask does not match the point map dims");
  }
  if (emb_dim == 0 || emb_dim % 6 != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "3D embedding size must be a positive multiple of 6, got " +
                    std::to_string(emb_dim));
  }
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  std::size_t n = 0;
  const std::size_t w = points.dims.width;
  mask.for_each_pixel([&](std::size_t row, std::size_t col) {
    const std::size_t p = row * w + col;
    if (!points.valid[p]) return;
    for (int a = 0; a < 3; ++a) sum[a] += points.xyz[3 * p + a];
    ++n;
  });
  Embedding3d out;
  if (n == 0) {
    out.values.assign(emb_dim, 0.0f);
    return out;
  }
  out.has_geometry = true;
  std::array<double, 3> unit{};
  for (int a = 0; a < 3; ++a) {
    out.centroid[a] = sum[a] / static_cast<double>(n);
    const double extent = bounds.hi[a] - bounds.lo[a];
    unit[a] = extent > 0.0 ? (out.centroid[a] - bounds.lo[a]) / extent : 0.5;
  }
  out.values = sinusoid_3d(unit[0], unit[1], unit[2], emb_dim);
  return out;
}

Embedding3d embed_3d(const RegionMask& mask, const PointMap& points, std::size_t emb_dim) {
  const auto bounds = scene_bounds(std::span<const PointMap>(&points, 1));
  return embed_3d(mask, points, bounds.value_or(SceneBounds{}), emb_dim);
}

std::size_t TokenBatch::real_count() const {
  return static_cast<std::size_t>(std::count_if(
      attention_mask.begin(), attention_mask.end(), [](std::uint8_t m) { return m != 0; }));
}

void TokenBatch::validate() const {
  const std::size_t t = attention_mask.size();
  if (tokens.size() != t * dim || provenance.size() != t) {
    throw Error(ErrorCode::kFormat, "token batch buffers disagree on the token count");
  }
  for (std::size_t i = 0; i < t; ++i) {
    if (attention_mask[i]) continue;
    const float* row = token(i);
    if (std::any_of(row, row + dim, [](float v) { return v != 0.0f; })) {
      throw Error(ErrorCode::kFormat, "padded token " + std::to_string(i) + " is not zero");
    }
  }
}

Sequence to_sequence(const TokenBatch& batch) {
  Sequence seq;
  seq.tokens = Matrix(batch.size(), batch.dim);
  std::copy(batch.tokens.begin(), batch.tokens.end(), seq.tokens.data.begin());
  seq.mask = batch.attention_mask;
  seq.targets.assign(batch.size(), TokenTarget{});
  return seq;
}

std::vector<SceneToken> make_scene_tokens(std::span<const RegionVector> vectors,
                                          const MaskSet& set, std::size_t dim_2d,
                                          const PointMap* points,
                                          const SceneBounds* bounds, std::size_t dim_3d) {
  std::vector<SceneToken> out;
  out.reserve(vectors.size());
  for (const RegionVector& v : vectors) {
    if (v.region_id >= set.masks.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "region " + std::to_string(v.region_id) + " has no mask");
    }
    const RegionMask& mask = set.masks[v.region_id];
    SceneToken token{v, {}, std::nullopt};
    if (dim_2d > 0) token.emb_2d = embed_2d(mask, set.dims, dim_2d);
    if (dim_3d > 0 && points != nullptr) {
      token.emb_3d = bounds != nullptr ? embed_3d(mask, *points, *bounds, dim_3d)
                                       : embed_3d(mask, *points, dim_3d);
    } else if (dim_3d > 0) {
      token.emb_3d = Embedding3d{std::vector<float>(dim_3d, 0.0f), false, {}};
    }
    out.push_back(std::move(token));
  }
  return out;
}

TokenBatch assemble_scene_tokens(std::span<const SceneToken> tokens,
                                 const SceneTokenConfig& config) {
  TokenBatch batch;
  if (tokens.empty()) return batch;
  std::vector<std::size_t> order(tokens.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const RegionVector& va = tokens[a].vector;
    const RegionVector& vb = tokens[b].vector;
    return std::tie(va.image_id, va.region_id) < std::tie(vb.image_id, vb.region_id);
  });

  const SceneToken& first = tokens.front();
  const std::size_t d = first.vector.values.size();
  const std::size_t d2 = config.use_2d ? first.emb_2d.size() : 0;
  const std::size_t d3 = config.use_3d && first.emb_3d ? first.emb_3d->values.size() : 0;
  if (config.merge == EmbeddingMerge::kAdd && ((d2 != 0 && d2 != d) || (d3 != 0 && d3 != d))) {
    throw Error(ErrorCode::kDimsMismatch,
                "additive merge needs embeddings as wide as the region vectors (" +
                    std::to_string(d) + ")");
  }
  batch.dim = config.merge == EmbeddingMerge::kConcat ? d + d2 + d3 : d;
  batch.tokens.reserve(tokens.size() * batch.dim);

  for (std::size_t idx : order) {
    const SceneToken& t = tokens[idx];
    const std::size_t t3 = config.use_3d && t.emb_3d ? t.emb_3d->values.size() : 0;
    if (t.vector.values.size() != d || (config.use_2d && t.emb_2d.size() != d2) || t3 != d3) {
      throw Error(ErrorCode::kDimsMismatch,
                  "token for image " + std::to_string(t.vector.image_id) + " region " +
                      std::to_string(t.vector.region_id) + " has a different width");
    }
    const std::size_t base = batch.tokens.size();
    batch.tokens.insert(batch.tokens.end(), t.vector.values.begin(), t.vector.values.end());
    auto merge = [&](const std::vector<float>& emb) {
      if (config.merge == EmbeddingMerge::kConcat) {
        batch.tokens.insert(batch.tokens.end(), emb.begin(), emb.end());
      } else {
        for (std::size_t c = 0; c < d; ++c) batch.tokens[base + c] += emb[c];
      }
    };
    if (d2 > 0) merge(t.emb_2d);
    if (d3 > 0) {
      merge(t.emb_3d->values);
      if (!t.emb_3d->has_geometry) ++batch.missing_geometry;
    }
    batch.attention_mask.push_back(1);
    batch.provenance.push_back({t.vector.image_id, t.vector.region_id, 0});
  }
  return batch;
}

std::vector<std::uint32_t> sample_frames(std::uint32_t total_frames, std::uint32_t n) {
  if (total_frames == 0) {
    throw Error(ErrorCode::kInvalidArgument, "cannot sample frames from an empty video");
  }
  std::vector<std::uint32_t> out(n, 0);
  if (n <= 1) return out;
  // round-half-up of i (T - 1) / (n - 1) in exact integer arithmetic.
  const std::uint64_t span = total_frames - 1;
  const std::uint64_t denom = n - 1;
  for (std::uint32_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::uint32_t>((2 * i * span + denom) / (2 * denom));
  }
  return out;
}

namespace {

std::vector<std::size_t> frame_quotas(std::span<const FrameRegions> frames, std::size_t total,
                                      std::size_t budget) {
  std::vector<std::size_t> quota(frames.size());
  std::vector<std::size_t> remainder(frames.size());
  std::size_t used = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::size_t scaled = budget * frames[f].vectors.size();
    quota[f] = scaled / total;
    remainder[f] = scaled % total;
    used += quota[f];
  }
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; used < budget && i < order.size(); ++i) {
    if (remainder[order[i]] == 0) break;
    ++quota[order[i]];
    ++used;
  }
  return quota;
}

std::vector<std::size_t> keep_largest(const FrameRegions& frame, std::size_t quota) {
  const std::size_t n = frame.vectors.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (quota >= n) return idx;
  auto size_of = [&](std::size_t i) {
    return frame.pixel_counts.empty() ? std::size_t{0} : frame.pixel_counts[i];
  };
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return size_of(a) > size_of(b); });
  idx.resize(quota);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

TokenBatch assemble_video_tokens(std::span<const FrameRegions> frames, std::size_t pad_to) {
  if (pad_to == 0) throw Error(ErrorCode::kInvalidArgument, "token budget must be positive");
  std::size_t total = 0;
  std::optional<std::size_t> dim;
  for (const FrameRegions& frame : frames) {
    if (!frame.pixel_counts.empty() && frame.pixel_counts.size() != frame.vectors.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "frame " + std::to_string(frame.frame_index) +
                      " has pixel counts for a different number of regions");
    }
    for (const RegionVector& v : frame.vectors) {
      if (!dim) dim = v.values.size();
      if (v.values.size() != *dim) {
        throw Error(ErrorCode::kDimsMismatch, "region vectors differ in width");
      }
    }
    total += frame.vectors.size();
  }

  TokenBatch batch;
  batch.dim = dim.value_or(0);
  std::vector<std::size_t> quota(frames.size());
  if (total > pad_to) {
    quota = frame_quotas(frames, total, pad_to);
    batch.truncated = total - pad_to;
  } else {
    for (std::size_t f = 0; f < frames.size(); ++f) quota[f] = frames[f].vectors.size();
  }

  batch.tokens.reserve(pad_to * batch.dim);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t r : keep_largest(frames[f], quota[f])) {
      const RegionVector& v = frames[f].vectors[r];
      batch.tokens.insert(batch.tokens.end(), v.values.begin(), v.values.end());
      batch.attention_mask.push_back(1);
      batch.provenance.push_back({v.image_id, v.region_id, frames[f].frame_index});
    }
  }
  batch.tokens.resize(pad_to * batch.dim, 0.0f);
  batch.attention_mask.resize(pad_to, 0);
  batch.provenance.resize(pad_to, TokenProvenance{kPaddingId, kPaddingId, kPaddingId});
  return batch;
}

}  // namespace rbr
