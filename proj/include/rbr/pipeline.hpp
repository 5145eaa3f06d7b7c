#ifndef RBR_PIPELINE_HPP_
#define RBR_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "rbr/core.hpp"
#include "rbr/decoders.hpp"
#include "rbr/labeling.hpp"
#include "rbr/pooling.hpp"
#include "rbr/regions.hpp"
#include "rbr/segmap.hpp"
#include "rbr/slic.hpp"
#include "rbr/synth.hpp"

namespace rbr {

inline constexpr int kReportSchemaVersion = 1;

/// One image of a segmentation split.
struct ImageRecord {
  std::uint32_t image_id = 0;
  FeatureGrid features;
  LabelMap gt;
  MaskSet regions;
};

/// Seeded synthetic split; scene i uses seed + i and its aligned masks.
std::vector<SynthScene> make_scenes(std::uint64_t seed, std::size_t count,
                                    const SceneConfig& config);
std::vector<ImageRecord> aligned_records(std::span<const SynthScene> scenes,
                                         std::uint32_t first_image_id = 0);

/// Decoder inputs for one encoded image. Per-token decoders get one
/// single-token sequence per labelled region; `per_image` packs every pooled
/// region of the image into one sequence, unlabelled regions untargeted.
/// Targets carry the region pixel count as weight.
std::vector<Sequence> region_sequences(const EncodedImage& encoded, const MaskSet& regions,
                                       const LabelMap& gt, double label_threshold,
                                       bool per_image);

/// Softmax distributions indexed by mask; vanished masks get an empty one.
std::vector<std::vector<double>> region_distributions(const Decoder& decoder,
                                                      const EncodedImage& encoded,
                                                      std::size_t num_masks);

struct SegRunConfig {
  PoolConfig pool;
  DecoderSpec decoder;  // input_dim and num_classes are filled in
  TrainConfig train = TrainConfig::segmentation_linear();
  double label_threshold = kDefaultLabelThreshold;
  std::uint64_t seed = 0;
};

struct SegRunResult {
  IouReport report;
  TrainResult training;
  std::size_t train_sequences = 0;
  std::size_t vanished_masks = 0;
  double pool_seconds = 0.0;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

/// Pool, label, train on `train`, early-stop on `val`, then score `val`.
SegRunResult run_segmentation(std::span<const ImageRecord> train,
                              std::span<const ImageRecord> val, std::uint16_t num_classes,
                              const SegRunConfig& config);

/// The four resample x reducer cells on one split.
nlohmann::json pooling_ablation(std::span<const ImageRecord> train,
                                std::span<const ImageRecord> val, std::uint16_t num_classes,
                                const SegRunConfig& base);

struct BenchConfig {
  SceneConfig scene{{128, 128}, 24, 6, 4, 16, 4.0, 0.4, 0.2, false, 16, 64};
  std::size_t train_images = 10;
  std::size_t val_images = 5;
  SlicConfig slic;
  std::size_t min_uncovered = kDefaultMinUncovered;
  /// SAM stand-in: each segment is dropped with this probability, the rest
  /// are eroded by `sam_erode` pixels.
  double sam_drop = 0.3;
  std::uint32_t sam_erode = 1;
  SegRunConfig run;
  std::uint64_t seed = 7;
};

/// Imperfect class-agnostic masks derived from the ground-truth segments.
MaskSet sam_standin(const MaskSet& aligned, std::uint64_t seed, double drop,
                    std::uint32_t erode);

/// Region-source comparison: SAM stand-in, SLIC, SAM+SLIC and GT-aligned
/// rows with measured per-stage timings, coverage, oracle and trained mIoU.
nlohmann::json region_bench(const BenchConfig& config);

/// A directory of per-image files plus manifest.json (see docs/formats.md).
struct Fixture {
  std::uint16_t num_classes = 0;
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> val;
};

/// Writes image_NNN.ppm, labels_NNN.rblm, features_NNN.rbrf and masks_NNN.json
/// for every scene, train scenes first, and the manifest.
void save_fixture(const std::filesystem::path& dir, std::span<const SynthScene> train,
                  std::span<const SynthScene> val, const nlohmann::json& meta);
Fixture load_fixture(const std::filesystem::path& dir);

/// Throws kFormat naming the first missing or mistyped key.
void check_ablation_report(const nlohmann::json& report);
void check_bench_report(const nlohmann::json& report);

}  // namespace rbr

#endif  // RBR_PIPELINE_HPP_
