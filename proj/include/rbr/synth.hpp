#ifndef RBR_SYNTH_HPP_
#define RBR_SYNTH_HPP_

#include <cstdint>
#include <vector>

#include "rbr/core.hpp"
#include "rbr/slic.hpp"

namespace rbr {

struct SceneConfig {
  ImageDims dims{96, 96};
  std::uint32_t num_segments = 24;
  std::uint32_t num_classes = 6;
  std::uint32_t patch = 4;
  /// Needs room for one prototype channel per class plus two ramp channels.
  std::uint32_t feature_dim = 16;
  double prototype_scale = 4.0;
  double noise_std = 0.4;
  double ramp_scale = 0.2;
  /// Paint one extra segment of (patch/2)^2 pixels inside a single patch
  /// cell, so it falls below half occupancy everywhere on the patch grid.
  bool small_segment = false;
  /// Painted segments keep at least this many visible pixels.
  std::size_t min_segment_px = 16;
  std::uint32_t max_attempts = 64;

  void validate() const;
};

struct SynthScene {
  RgbImage image;
  LabelMap labels;
  /// One mask per visible segment, partitioning the image.
  MaskSet aligned;
  std::vector<std::uint16_t> segment_classes;
  FeatureGrid features;
};

/// Background segment plus rectangles and ellipses painted in order. The
/// first num_classes segments take classes 0..C-1 so every class appears.
/// Patch features are the class-fraction-weighted prototype (one-hot times
/// scale) plus Gaussian noise and a smooth positional ramp in the last two
/// channels. Layouts leaving a segment under min_segment_px are redrawn;
/// kConfig after max_attempts.
SynthScene gen_scene(std::uint64_t seed, const SceneConfig& config);

struct RetrievalDbConfig {
  std::uint32_t num_images = 200;
  std::uint32_t num_classes = 5;
  std::uint32_t queries_per_class = 3;
  /// Must exceed num_classes; the extra channels hold distractors.
  std::uint32_t dim = 32;
  /// Regions per image including planted ones.
  std::uint32_t regions_per_image = 6;
  /// Probability that an image contains a given class.
  double class_probability = 0.25;
  double prototype_scale = 1.0;
  double noise_std = 0.0;
  /// No planted class regions; every vector is isotropic noise.
  bool distractor_only = false;
};

struct RetrievalQuery {
  std::uint32_t class_id = 0;
  RegionVector vector;
  /// Sorted ids of the images containing the class.
  std::vector<std::uint32_t> relevant;
};

struct RetrievalDb {
  std::vector<RegionVector> database;
  std::vector<RetrievalQuery> queries;
  std::vector<std::vector<std::uint32_t>> image_classes;
};

/// Class prototypes are the first num_classes basis vectors. Each class
/// present in an image contributes one prototype region; the remaining
/// regions live in the orthogonal channels. Noise perturbs every database
/// and query vector. Classes absent from every image are given to one
/// random image so each query has at least one relevant image.
RetrievalDb gen_retrieval_db(std::uint64_t seed, const RetrievalDbConfig& config);

/// Expected average precision of a uniformly random ranking of n images of
/// which r are relevant.
double random_ranking_ap(std::size_t n, std::size_t r);

}  // namespace rbr

#endif  // RBR_SYNTH_HPP_
