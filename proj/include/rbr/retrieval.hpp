#ifndef RBR_RETRIEVAL_HPP_
#define RBR_RETRIEVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "rbr/core.hpp"

namespace rbr {

struct RankedEntry {
  std::uint32_t image_id = 0;
  double score = 0.0;
  std::uint32_t best_region_id = 0;
};

/// One entry per image, scores non-increasing, ties by ascending image_id.
struct RankedResult {
  std::vector<RankedEntry> entries;
};

/// Exact region-vector search table. Immutable once built; safe to query
/// concurrently.
class RetrievalIndex {
 public:
  /// Throws kInvalidArgument on an empty or ragged input and kZeroVector when
  /// normalising a zero row.
  static RetrievalIndex build(std::span<const RegionVector> vectors,
                              bool normalize = false);

  /// Reassembles an index from stored parts. Rows are always the raw input
  /// vectors; with `normalized` their norms are recomputed (kZeroVector on a
  /// zero row).
  static RetrievalIndex from_parts(std::uint32_t dim, bool normalized,
                                   std::vector<float> matrix,
                                   std::vector<std::uint32_t> image_ids,
                                   std::vector<std::uint32_t> region_ids);

  std::size_t rows() const { return image_ids_.size(); }
  std::uint32_t dim() const { return dim_; }
  bool normalized() const { return normalized_; }
  std::span<const float> row(std::size_t i) const {
    return {matrix_.data() + i * dim_, dim_};
  }
  const std::vector<float>& matrix() const { return matrix_; }
  const std::vector<std::uint32_t>& image_ids() const { return image_ids_; }
  const std::vector<std::uint32_t>& region_ids() const { return region_ids_; }

  /// Dot product of the query with every row, divided by both norms when the
  /// index is normalised.
  std::vector<double> scores(std::span<const float> query) const;

  /// Images ranked by their best region score; top_k == 0 keeps all.
  RankedResult query(const RegionVector& query, std::size_t top_k) const;

 private:
  RetrievalIndex() = default;

  std::uint32_t dim_ = 0;
  bool normalized_ = false;
  std::vector<float> matrix_;
  std::vector<std::uint32_t> image_ids_;
  std::vector<std::uint32_t> region_ids_;
  std::vector<double> inv_norms_;
};

inline RetrievalIndex build_index(std::span<const RegionVector> vectors,
                                  bool normalize = false) {
  return RetrievalIndex::build(vectors, normalize);
}

inline RankedResult query(const RetrievalIndex& index, const RegionVector& q,
                          std::size_t top_k) {
  return index.query(q, top_k);
}

/// Average-pooled upsampled features under a ground-truth query mask.
RegionVector query_from_mask(const FeatureGrid& grid, const RegionMask& mask);

/// Sum over relevant hits of precision-at-that-rank, divided by the number of
/// relevant images. Relevant images missing from a truncated ranking
/// contribute zero.
double average_precision(const RankedResult& ranked,
                         std::span<const std::uint32_t> relevant);

/// Relevant images among the first k, divided by k (even when fewer than k
/// images were ranked).
double precision_at_k(const RankedResult& ranked,
                      std::span<const std::uint32_t> relevant, std::size_t k = 50);

struct QueryOutcome {
  std::uint32_t class_id = 0;
  double average_precision = 0.0;
  double precision_at_k = 0.0;
};

struct RetrievalSummary {
  /// Per-class mean over queries, then mean over classes.
  double mean_average_precision = 0.0;
  double mean_precision_at_k = 0.0;
  std::map<std::uint32_t, double> per_class_ap;
  std::size_t queries = 0;
};

RetrievalSummary summarize_retrieval(std::span<const QueryOutcome> outcomes);

}  // namespace rbr

#endif  // RBR_RETRIEVAL_HPP_
