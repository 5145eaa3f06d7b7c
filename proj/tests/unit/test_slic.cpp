#include "doctest.h"
#include "../support/oracles.hpp"
#include "rbr/regions.hpp"
#include "rbr/slic.hpp"

using namespace rbr;

TEST_SUITE("slic") {

TEST_CASE("lab conversion of reference colours") {
  RgbImage img{{1, 3}, {255, 255, 255, 0, 0, 0, 255, 0, 0}};
  const LabImage lab = rgb_to_lab(img);
  CHECK(lab.values[0] == doctest::Approx(100.0).epsilon(1e-4));
  CHECK(lab.values[1] == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(lab.values[3] == doctest::Approx(0.0));
  // sRGB red is about (53.24, 80.09, 67.20).
  CHECK(lab.values[6] == doctest::Approx(53.24).epsilon(1e-3));
  CHECK(lab.values[7] == doctest::Approx(80.09).epsilon(1e-3));
  CHECK(lab.values[8] == doctest::Approx(67.20).epsilon(1e-3));
}

TEST_CASE("seed lattice never exceeds k and follows the aspect ratio") {
  for (std::uint32_t k = 1; k < 120; ++k) {
    const SeedGrid g = slic_seed_grid({64, 64}, k);
    CHECK(g.rows * g.cols <= k);
  }
  const SeedGrid sq = slic_seed_grid({64, 64}, 16);
  CHECK(sq.rows == 4);
  CHECK(sq.cols == 4);
  const SeedGrid wide = slic_seed_grid({32, 128}, 16);
  CHECK(wide.cols > wide.rows);
}

TEST_CASE("two-colour image splits along the colour edge") {
  RgbImage img{{32, 32}, std::vector<std::uint8_t>(32 * 32 * 3)};
  for (std::size_t p = 0; p < 32 * 32; ++p) {
    const bool left = p % 32 < 16;
    img.pixels[3 * p] = left ? 250 : 10;
    img.pixels[3 * p + 1] = left ? 20 : 200;
    img.pixels[3 * p + 2] = 30;
  }
  SlicConfig cfg;
  cfg.num_components = 4;
  const MaskSet out = slic_segment(img, cfg);
  CHECK(is_partition(out));
  for (const auto& m : out.masks) {
    const bool left = m.bbox().max_col < 16;
    const bool right = m.bbox().min_col >= 16;
    CHECK((left || right));
  }
}

TEST_CASE("output masks are tagged as superpixels and ordered by first pixel") {
  Rng rng(5);
  const MaskSet out = slic_segment(oracle::random_image(rng, {40, 30}), SlicConfig{});
  std::size_t last = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out.masks[i].source() == MaskSource::kSlic);
    const std::size_t first = out.masks[i].intervals().front().begin;
    if (i > 0) CHECK(first > last);
    last = first;
  }
}

TEST_CASE("configuration errors") {
  RgbImage img{{4, 4}, std::vector<std::uint8_t>(48, 0)};
  SlicConfig cfg;
  cfg.num_components = 0;
  CHECK_THROWS_AS(slic_segment(img, cfg), Error);
  cfg.num_components = 17;
  CHECK_THROWS_AS(slic_segment(img, cfg), Error);
  cfg.num_components = 4;
  cfg.compactness = -1;
  CHECK_THROWS_AS(slic_segment(img, cfg), Error);
  RgbImage bad{{4, 4}, std::vector<std::uint8_t>(47, 0)};
  CHECK_THROWS_AS(slic_segment(bad, SlicConfig{}), Error);
}

TEST_CASE("minimum component size is honoured") {
  Rng rng(9);
  SlicConfig cfg;
  cfg.num_components = 30;
  cfg.min_component_px = 40;
  const MaskSet out = slic_segment(oracle::random_image(rng, {48, 48}), cfg);
  for (const auto& m : out.masks) CHECK(m.pixel_count() >= 40);
}

}
