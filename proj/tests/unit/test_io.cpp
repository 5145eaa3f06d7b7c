#include <filesystem>

#include "doctest.h"
#include "../support/oracles.hpp"
#include "rbr/io.hpp"

using namespace rbr;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("label map round trip and header checks") {
  LabelMap m{{2, 3}, {0, 1, 2, kIgnoreLabel, 1, 0}, 3};
  const Bytes b = encode_label_map(m);
  CHECK(b.size() == 5 + 12 + 12);
  CHECK(b[0] == 'R');
  const LabelMap back = decode_label_map(b);
  CHECK(back.labels == m.labels);
  CHECK(back.num_classes == 3);

  Bytes bad_magic = b;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { decode_label_map(bad_magic); }) == ErrorCode::kMagicMismatch);
  Bytes bad_version = b;
  bad_version[4] = 9;
  CHECK(code_of([&] { decode_label_map(bad_version); }) == ErrorCode::kUnsupportedVersion);
  const Bytes cut(b.begin(), b.end() - 1);
  CHECK(code_of([&] { decode_label_map(cut); }) == ErrorCode::kTruncatedFile);
  Bytes extra = b;
  extra.push_back(0);
  CHECK(code_of([&] { decode_label_map(extra); }) == ErrorCode::kFormat);
}

TEST_CASE("feature grid and region vectors round trip") {
  Rng rng(3);
  const FeatureGrid g = oracle::random_grid(rng, 5, 4, 8);
  const FeatureGrid gb = decode_feature_grid(encode_feature_grid(g));
  CHECK(gb.data == g.data);
  CHECK(gb.image_dims == g.image_dims);
  CHECK(gb.patch == g.patch);

  const std::vector<RegionVector> v = {{1, 2, {0.5f, -1.0f}}, {7, 0, {3.0f, 4.0f}}};
  CHECK(decode_region_vectors(encode_region_vectors(v)) == v);
  const std::vector<RegionVector> ragged = {{1, 2, {0.5f}}, {7, 0, {3.0f, 4.0f}}};
  CHECK_THROWS_AS(encode_region_vectors(ragged), Error);
}

TEST_CASE("point map round trip keeps validity bits") {
  PointMap pm{{3, 3}, std::vector<float>(27), {1, 0, 1, 1, 1, 0, 0, 0, 1}};
  for (std::size_t i = 0; i < pm.xyz.size(); ++i) pm.xyz[i] = static_cast<float>(i) * 0.25f;
  const PointMap back = decode_point_map(encode_point_map(pm));
  CHECK(back.valid == pm.valid);
  CHECK(back.xyz == pm.xyz);
  CHECK(back.valid_count() == 5);
}

TEST_CASE("index and token batch round trip") {
  const std::vector<RegionVector> v = {{0, 0, {1, 2, 2}}, {3, 1, {0, 0, 5}}};
  const auto idx = build_index(v, true);
  const auto back = decode_index(encode_index(idx));
  CHECK(back.normalized());
  CHECK(back.image_ids() == idx.image_ids());
  CHECK(back.scores(std::vector<float>{1, 0, 0}) == idx.scores(std::vector<float>{1, 0, 0}));

  TokenBatch tb;
  tb.dim = 2;
  tb.tokens = {1, 2, 0, 0};
  tb.attention_mask = {1, 0};
  tb.provenance = {{4, 5, 6}, {kPaddingId, kPaddingId, kPaddingId}};
  tb.truncated = 3;
  CHECK(decode_token_batch(encode_token_batch(tb)) == tb);
}

TEST_CASE("decoder checkpoint round trip is exact to float precision") {
  DecoderSpec s;
  s.kind = DecoderKind::kTransformer;
  s.input_dim = 8;
  s.num_classes = 3;
  s.heads = 2;
  const auto d = make_decoder(s, 5);
  const auto back = decode_decoder(encode_decoder(*d));
  CHECK(back->kind() == DecoderKind::kTransformer);
  CHECK(back->spec().heads == 2);
  const auto pa = std::as_const(*d).params();
  const auto pb = std::as_const(*back).params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
      CHECK(pb[i]->value[j] == static_cast<double>(static_cast<float>(pa[i]->value[j])));
    }
  }
}

TEST_CASE("mask set json round trip and errors") {
  Rng rng(8);
  const MaskSet set = oracle::random_mask_set(rng, {9, 7}, 4);
  const MaskSet back = decode_mask_set(encode_mask_set(set));
  REQUIRE(back.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) CHECK(back.masks[i] == set.masks[i]);

  const std::string bad =
      R"({"height":2,"width":2,"masks":[{"id":0,"source":"sam","rle":[1,2]}]})";
  try {
    decode_mask_set(bad);
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kFormat);
    CHECK(std::string(e.what()).find("mask id 0") != std::string::npos);
  }
  CHECK_THROWS_AS(decode_mask_set("{not json"), Error);
}

TEST_CASE("column-major runs convert both ways") {
  // 2x3 image, foreground is the middle column.
  const ImageDims dims{2, 3};
  const std::vector<std::uint32_t> row_major = {1, 1, 2, 1, 1};
  const std::vector<std::uint32_t> col_major = {2, 2, 2};
  CHECK(rle_row_to_column_major(dims, row_major) == col_major);
  CHECK(rle_column_to_row_major(dims, col_major) == row_major);
  const std::string json =
      R"({"height":2,"width":3,"rle_order":"column-major","masks":[{"id":0,"source":"slic","rle":[2,2,2]}]})";
  const MaskSet set = decode_mask_set(json);
  CHECK(set.masks[0].runs() == row_major);
  CHECK(set.masks[0].source() == MaskSource::kSlic);
}

TEST_CASE("ppm round trip with comments") {
  const std::string text = "P6\n# a comment\n2 1\n255\n";
  Bytes b(text.begin(), text.end());
  for (std::uint8_t v : {10, 20, 30, 40, 50, 60}) b.push_back(v);
  const RgbImage img = decode_ppm(b);
  CHECK(img.dims == ImageDims{1, 2});
  CHECK(img.pixels[5] == 60);
  CHECK(decode_ppm(encode_ppm(img)).pixels == img.pixels);
  const std::string p3 = "P3\n1 1\n255\n0 0 0\n";
  CHECK_THROWS_AS(decode_ppm(Bytes(p3.begin(), p3.end())), Error);
}

TEST_CASE("missing files raise io errors") {
  const auto missing = std::filesystem::temp_directory_path() / "rbr_definitely_missing.rblm";
  CHECK(code_of([&] { load_label_map(missing); }) == ErrorCode::kIo);
}

}
