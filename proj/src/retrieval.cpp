#include "rbr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "rbr/pooling.hpp"

namespace rbr {

namespace {

constexpr std::size_t kRowBlock = 64;

constexpr std::size_t kQueryRow = static_cast<std::size_t>(-1);

/// 1 / |v|; `row` names the offending row in the error (kQueryRow for the query).
double inverse_norm(std::span<const float> v, std::size_t row) {
  double norm2 = 0.0;
  for (float x : v) norm2 += static_cast<double>(x) * x;
  if (!(norm2 > 0.0)) {
    throw Error(ErrorCode::kZeroVector,
                row == kQueryRow ? std::string("cannot normalise a zero query")
                                 : "cannot normalise zero row " + std::to_string(row));
  }
  return 1.0 / std::sqrt(norm2);
}

}  // namespace

RetrievalIndex RetrievalIndex::build(std::span<const RegionVector> vectors,
                                     bool normalize) {
  if (vectors.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot index zero vectors");
  RetrievalIndex index;
  index.dim_ = static_cast<std::uint32_t>(vectors.front().values.size());
  if (index.dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "vectors have zero dimension");
  index.normalized_ = normalize;
  index.matrix_.reserve(vectors.size() * index.dim_);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const RegionVector& v = vectors[i];
    if (v.values.size() != index.dim_) {
      throw Error(ErrorCode::kInvalidArgument,
                  "vector " + std::to_string(i) + " has dimension " +
                      std::to_string(v.values.size()) + ", expected " +
                      std::to_string(index.dim_));
    }
    index.matrix_.insert(index.matrix_.end(), v.values.begin(), v.values.end());
    if (normalize) index.inv_norms_.push_back(inverse_norm(v.values, i));
    index.image_ids_.push_back(v.image_id);
    index.region_ids_.push_back(v.region_id);
  }
  return index;
}

RetrievalIndex RetrievalIndex::from_parts(std::uint32_t dim, bool normalized,
                                          std::vector<float> matrix,
                                          std::vector<std::uint32_t> image_ids,
                                          std::vector<std::uint32_t> region_ids) {
  if (dim == 0 || image_ids.size() != region_ids.size() ||
      matrix.size() != image_ids.size() * dim) {
    throw Error(ErrorCode::kFormat, "inconsistent index parts");
  }
  RetrievalIndex index;
  index.dim_ = dim;
  index.normalized_ = normalized;
  index.matrix_ = std::move(matrix);
  index.image_ids_ = std::move(image_ids);
  index.region_ids_ = std::move(region_ids);
  if (normalized) {
    for (std::size_t r = 0; r < index.rows(); ++r) {
      index.inv_norms_.push_back(inverse_norm(index.row(r), r));
    }
  }
  return index;
}

std::vector<double> RetrievalIndex::scores(std::span<const float> query) const {
  if (query.size() != dim_) {
    throw Error(ErrorCode::kInvalidArgument,
                "query dimension " + std::to_string(query.size()) +
                    " does not match index dimension " + std::to_string(dim_));
  }
  const double q_scale = normalized_ ? inverse_norm(query, kQueryRow) : 1.0;
  std::vector<double> out(rows());
  for (std::size_t block = 0; block < rows(); block += kRowBlock) {
    const std::size_t end = std::min(rows(), block + kRowBlock);
    for (std::size_t r = block; r < end; ++r) {
      const float* row_data = matrix_.data() + r * dim_;
      double acc = 0.0;
      for (std::size_t c = 0; c < dim_; ++c) {
        acc += static_cast<double>(row_data[c]) * static_cast<double>(query[c]);
      }
      out[r] = normalized_ ? acc * inv_norms_[r] * q_scale : acc;
    }
  }
  return out;
}

RankedResult RetrievalIndex::query(const RegionVector& query, std::size_t top_k) const {
  const auto s = scores(query.values);
  std::unordered_map<std::uint32_t, std::size_t> slot;
  std::vector<RankedEntry> best;
  for (std::size_t r = 0; r < rows(); ++r) {
    auto [it, inserted] = slot.try_emplace(image_ids_[r], best.size());
    if (inserted) {
      best.push_back({image_ids_[r], s[r], region_ids_[r]});
    } else if (s[r] > best[it->second].score) {
      best[it->second].score = s[r];
      best[it->second].best_region_id = region_ids_[r];
    }
  }
  std::sort(best.begin(), best.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.image_id < b.image_id;
  });
  if (top_k > 0 && best.size() > top_k) best.resize(top_k);
  return {std::move(best)};
}

RegionVector query_from_mask(const FeatureGrid& grid, const RegionMask& mask) {
  grid.validate();
  return pool_region_upsampled(grid, mask, Reducer::kAverage, Interpolation::kBilinear);
}

double average_precision(const RankedResult& ranked,
                         std::span<const std::uint32_t> relevant) {
  const std::unordered_set<std::uint32_t> rel(relevant.begin(), relevant.end());
  if (rel.empty()) throw Error(ErrorCode::kInvalidArgument, "relevant set is empty");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranked.entries.size(); ++r) {
    if (rel.contains(ranked.entries[r].image_id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(rel.size());
}

double precision_at_k(const RankedResult& ranked,
                      std::span<const std::uint32_t> relevant, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  const std::unordered_set<std::uint32_t> rel(relevant.begin(), relevant.end());
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranked.entries.size());
  for (std::size_t r = 0; r < n; ++r) {
    if (rel.contains(ranked.entries[r].image_id)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

RetrievalSummary summarize_retrieval(std::span<const QueryOutcome> outcomes) {
  RetrievalSummary summary;
  summary.queries = outcomes.size();
  if (outcomes.empty()) return summary;
  std::map<std::uint32_t, std::pair<double, std::size_t>> ap;
  std::map<std::uint32_t, std::pair<double, std::size_t>> pk;
  for (const QueryOutcome& o : outcomes) {
    ap[o.class_id].first += o.average_precision;
    ++ap[o.class_id].second;
    pk[o.class_id].first += o.precision_at_k;
    ++pk[o.class_id].second;
  }
  for (const auto& [cls, acc] : ap) {
    const double mean = acc.first / static_cast<double>(acc.second);
    summary.per_class_ap[cls] = mean;
    summary.mean_average_precision += mean;
  }
  for (const auto& [cls, acc] : pk) {
    summary.mean_precision_at_k += acc.first / static_cast<double>(acc.second);
  }
  summary.mean_average_precision /= static_cast<double>(ap.size());
  summary.mean_precision_at_k /= static_cast<double>(pk.size());
  return summary;
}

}  // namespace rbr
