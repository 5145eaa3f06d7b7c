#include "doctest.h"
#include "rbr/labeling.hpp"

using namespace rbr;

namespace {

RegionMask full(ImageDims dims) {
  return rle_encode(Bitmap{dims, std::vector<std::uint8_t>(dims.pixels(), 1)});
}

}  // namespace

TEST_SUITE("labeling") {

TEST_CASE("majority label with pixel-count weight") {
  const LabelMap gt{{1, 4}, {2, 2, 2, 1}, 3};
  const auto l = derive_region_label(full({1, 4}), gt, 0.5, 7);
  REQUIRE(l.has_value());
  CHECK(l->label == 2);
  CHECK(l->weight == 4);
  CHECK(l->region_id == 7);
}

TEST_CASE("a share of exactly one half passes, ties go to the lower class") {
  const LabelMap gt{{1, 4}, {1, 1, 0, 0}, 2};
  const auto l = derive_region_label(full({1, 4}), gt, 0.5);
  REQUIRE(l.has_value());
  CHECK(l->label == 0);
  CHECK_FALSE(derive_region_label(full({1, 4}), gt, 0.51).has_value());
}

TEST_CASE("ignore pixels are skipped and all-ignore regions excluded") {
  const LabelMap gt{{1, 4}, {kIgnoreLabel, kIgnoreLabel, 1, 0}, 2};
  const auto counts = class_counts(full({1, 4}), gt);
  CHECK(counts == std::vector<std::size_t>{1, 1});
  const LabelMap none{{1, 2}, {kIgnoreLabel, kIgnoreLabel}, 2};
  CHECK_FALSE(derive_region_label(full({1, 2}), none).has_value());
  CHECK_FALSE(oracle_region_probs(full({1, 2}), none).has_value());
}

TEST_CASE("oracle probabilities are class fractions") {
  const LabelMap gt{{1, 4}, {0, 1, 1, 1}, 3};
  const auto p = oracle_region_probs(full({1, 4}), gt);
  REQUIRE(p.has_value());
  CHECK((*p)[0] == 0.25);
  CHECK((*p)[1] == 0.75);
  CHECK((*p)[2] == 0.0);
}

TEST_CASE("label_regions omits excluded regions") {
  const ImageDims dims{1, 4};
  const LabelMap gt{dims, {0, 1, 2, 3}, 4};
  Bitmap one{dims, {1, 0, 0, 0}};
  const MaskSet set{dims, {full(dims), rle_encode(one)}};
  const auto labels = label_regions(set, gt);
  REQUIRE(labels.size() == 1);
  CHECK(labels[0].region_id == 1);
  CHECK(labels[0].label == 0);
}

TEST_CASE("mismatched dims are rejected") {
  const LabelMap gt{{2, 2}, {0, 0, 0, 0}, 1};
  CHECK_THROWS_AS(class_counts(full({1, 4}), gt), Error);
}

}
