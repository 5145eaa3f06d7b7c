#include "doctest.h"
#include "../support/oracles.hpp"
#include "rbr/segmap.hpp"

using namespace rbr;

TEST_SUITE("segmap") {

TEST_CASE("overlapping regions average their distributions") {
  const ImageDims dims{1, 3};
  Bitmap a{dims, {1, 1, 0}};
  Bitmap b{dims, {0, 1, 1}};
  const MaskSet set{dims, {rle_encode(a), rle_encode(b)}};
  const std::vector<std::vector<double>> probs = {{0.6, 0.4}, {0.3, 0.7}};
  const auto pred = predict_pixels(set, probs, 2, true);
  CHECK(pred.labels == std::vector<std::int32_t>{0, 1, 1});
  CHECK(pred.probs[2] == doctest::Approx(0.45));
  CHECK(pred.probs[3] == doctest::Approx(0.55));
}

TEST_CASE("uncovered pixels and regions without prediction are void") {
  const ImageDims dims{1, 3};
  Bitmap a{dims, {1, 0, 0}};
  Bitmap b{dims, {0, 1, 0}};
  const MaskSet set{dims, {rle_encode(a), rle_encode(b)}};
  const std::vector<std::vector<double>> probs = {{1.0, 0.0}, {}};
  const auto pred = predict_pixels(set, probs, 2);
  CHECK(pred.labels == std::vector<std::int32_t>{0, kVoidPixel, kVoidPixel});
  const LabelMap gt{dims, {0, 0, 1}, 2};
  const IouReport r = miou(pred, gt);
  CHECK(r.void_pixels == 2);
  CHECK(r.per_class[0].iou.value() == 0.5);
  CHECK(r.per_class[1].iou.value() == 0.0);
  CHECK(r.miou.value() == 0.25);
}

TEST_CASE("argmax ties go to the lowest class") {
  const ImageDims dims{1, 1};
  const MaskSet set{dims, {rle_encode(Bitmap{dims, {1}})}};
  const std::vector<std::vector<double>> probs = {{0.5, 0.5}};
  CHECK(predict_pixels(set, probs, 2).labels[0] == 0);
}

TEST_CASE("classes absent from both sides are left out of the mean") {
  const LabelMap gt{{1, 2}, {0, 0}, 3};
  PixelPrediction pred{{1, 2}, 3, {0, 0}, {}};
  const IouReport r = miou(pred, gt);
  CHECK(r.miou.value() == 1.0);
  CHECK_FALSE(r.per_class[2].iou.has_value());
}

TEST_CASE("ignore labels are not evaluated") {
  const LabelMap gt{{1, 3}, {0, kIgnoreLabel, 1}, 2};
  PixelPrediction pred{{1, 3}, 2, {0, 0, 1}, {}};
  const IouReport r = miou(pred, gt);
  CHECK(r.evaluated_pixels == 2);
  CHECK(r.miou.value() == 1.0);
}

TEST_CASE("confusion matrices merge additively") {
  Rng rng(12);
  ConfusionMatrix total(3), a(3), b(3);
  for (int i = 0; i < 10; ++i) {
    const LabelMap gt = oracle::random_labels(rng, {5, 5}, 3, 0.1);
    PixelPrediction pred{{5, 5}, 3, std::vector<std::int32_t>(25), {}};
    for (auto& l : pred.labels) l = static_cast<std::int32_t>(rng.below(4)) - 1;
    total.add(pred, gt);
    (i % 2 ? a : b).add(pred, gt);
  }
  a.merge(b);
  CHECK(a.report().confusion == total.report().confusion);
  CHECK_THROWS_AS(a.merge(ConfusionMatrix(2)), Error);
}

TEST_CASE("oracle evaluation of an exact partition is perfect") {
  Rng rng(13);
  const LabelMap gt = oracle::random_labels(rng, {6, 6}, 4);
  MaskSet set{{6, 6}, {}};
  for (std::uint16_t c = 0; c < 4; ++c) {
    Bitmap b{{6, 6}, std::vector<std::uint8_t>(36, 0)};
    for (std::size_t p = 0; p < 36; ++p) b.bits[p] = gt.labels[p] == c;
    if (std::count(b.bits.begin(), b.bits.end(), 1) > 0) set.masks.push_back(rle_encode(b));
  }
  CHECK(oracle_eval(set, gt).miou.value() == 1.0);
}

TEST_CASE("report JSON carries the schema fields") {
  const LabelMap gt{{1, 2}, {0, 1}, 2};
  PixelPrediction pred{{1, 2}, 2, {0, -1}, {}};
  const auto j = miou(pred, gt).to_json();
  CHECK(j.contains("schema_version"));
  CHECK(j["void_pixels"] == 1);
  CHECK(j["confusion"].size() == 6);
}

TEST_CASE("label map predictions map ignore to void") {
  const LabelMap m{{1, 2}, {1, kIgnoreLabel}, 2};
  const auto p = prediction_from_label_map(m);
  CHECK(p.labels == std::vector<std::int32_t>{1, kVoidPixel});
}

}
