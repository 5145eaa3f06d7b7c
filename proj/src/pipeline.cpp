#include "rbr/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <string>

#include "rbr/io.hpp"
#include "rbr/random.hpp"

namespace rbr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::vector<SynthScene> make_scenes(std::uint64_t seed, std::size_t count,
                                    const SceneConfig& config) {
  std::vector<SynthScene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) scenes.push_back(gen_scene(seed + i, config));
  return scenes;
}

std::vector<ImageRecord> aligned_records(std::span<const SynthScene> scenes,
                                         std::uint32_t first_image_id) {
  std::vector<ImageRecord> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    out.push_back({first_image_id + static_cast<std::uint32_t>(i), scenes[i].features,
                   scenes[i].labels, scenes[i].aligned});
  }
  return out;
}

std::vector<Sequence> region_sequences(const EncodedImage& encoded, const MaskSet& regions,
                                       const LabelMap& gt, double label_threshold,
                                       bool per_image) {
  std::map<std::uint32_t, RegionLabel> labels;
  for (const RegionLabel& l : label_regions(regions, gt, label_threshold)) {
    labels.emplace(l.region_id, l);
  }
  auto target_of = [&](const RegionVector& v) {
    const auto it = labels.find(v.region_id);
    if (it == labels.end()) return TokenTarget{};
    return TokenTarget{it->second.label, static_cast<double>(it->second.weight)};
  };

  std::vector<Sequence> out;
  if (per_image) {
    if (encoded.vectors.empty()) return out;
    Sequence seq;
    seq.tokens = tokens_from_vectors(encoded.vectors);
    for (const RegionVector& v : encoded.vectors) seq.targets.push_back(target_of(v));
    out.push_back(std::move(seq));
    return out;
  }
  for (const RegionVector& v : encoded.vectors) {
    const TokenTarget t = target_of(v);
    if (t.label < 0) continue;
    Sequence seq;
    seq.tokens = tokens_from_vectors(std::span<const RegionVector>(&v, 1));
    seq.targets.push_back(t);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::vector<double>> region_distributions(const Decoder& decoder,
                                                      const EncodedImage& encoded,
                                                      std::size_t num_masks) {
  std::vector<std::vector<double>> dists(num_masks);
  if (encoded.vectors.empty()) return dists;
  const Matrix probs = softmax_rows(decoder.forward(tokens_from_vectors(encoded.vectors)));
  for (std::size_t r = 0; r < encoded.vectors.size(); ++r) {
    const std::uint32_t id = encoded.vectors[r].region_id;
    if (id >= num_masks) {
      throw Error(ErrorCode::kInvalidArgument,
                  "region id " + std::to_string(id) + " exceeds the mask count");
    }
    dists[id].assign(probs.row(r), probs.row(r) + probs.cols);
  }
  return dists;
}

SegRunResult run_segmentation(std::span<const ImageRecord> train,
                              std::span<const ImageRecord> val, std::uint16_t num_classes,
                              const SegRunConfig& config) {
  SegRunResult result;
  const bool per_image = config.decoder.kind == DecoderKind::kTransformer;

  auto start = Clock::now();
  auto encode = [&](std::span<const ImageRecord> split) {
    std::vector<EncodedImage> out;
    out.reserve(split.size());
    for (const ImageRecord& rec : split) {
      out.push_back(encode_image(rec.features, rec.regions, config.pool, rec.image_id));
      result.vanished_masks += out.back().vanished.size();
    }
    return out;
  };
  const auto train_enc = encode(train);
  const auto val_enc = encode(val);
  result.pool_seconds = seconds_since(start);

  auto sequences = [&](std::span<const ImageRecord> split, const std::vector<EncodedImage>& enc) {
    std::vector<Sequence> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
      auto seqs = region_sequences(enc[i], split[i].regions, split[i].gt,
                                   config.label_threshold, per_image);
      std::move(seqs.begin(), seqs.end(), std::back_inserter(out));
    }
    return out;
  };
  const auto train_seqs = sequences(train, train_enc);
  const auto val_seqs = sequences(val, val_enc);
  result.train_sequences = train_seqs.size();
  if (train_seqs.empty()) {
    throw Error(ErrorCode::kEmptyBatch, "no labelled regions in the training split");
  }

  DecoderSpec spec = config.decoder;
  spec.input_dim = train_seqs.front().tokens.cols;
  spec.num_classes = num_classes;
  auto decoder = make_decoder(spec, config.seed);
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  start = Clock::now();
  const bool has_val_weight = total_weight(val_seqs) > 0.0;
  result.training = rbr::train(*decoder, train_seqs,
                          has_val_weight ? std::span<const Sequence>(val_seqs)
                                         : std::span<const Sequence>(),
                          tc);
  result.train_seconds = seconds_since(start);

  start = Clock::now();
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto dists = region_distributions(*decoder, val_enc[i], val[i].regions.size());
    cm.add(predict_pixels(val[i].regions, dists, num_classes), val[i].gt);
  }
  result.report = cm.report();
  result.eval_seconds = seconds_since(start);
  return result;
}

nlohmann::json pooling_ablation(std::span<const ImageRecord> train,
                                std::span<const ImageRecord> val, std::uint16_t num_classes,
                                const SegRunConfig& base) {
  nlohmann::json cells = nlohmann::json::array();
  for (Resample resample : {Resample::kUpsampleFeatures, Resample::kDownsampleMasks}) {
    for (Reducer reducer : {Reducer::kAverage, Reducer::kMax}) {
      SegRunConfig cfg = base;
      cfg.pool.resample = resample;
      cfg.pool.reducer = reducer;
      const SegRunResult r = run_segmentation(train, val, num_classes, cfg);
      cells.push_back({{"resample", resample_name(resample)},
                       {"reducer", reducer_name(reducer)},
                       {"miou", optional_number(r.report.miou)},
                       {"vanished_masks", r.vanished_masks},
                       {"train_sequences", r.train_sequences},
                       {"epochs_run", r.training.train_loss.size()},
                       {"seconds", r.pool_seconds + r.train_seconds + r.eval_seconds}});
    }
  }
  return {{"schema_version", kReportSchemaVersion},
          {"kind", "pooling_ablation"},
          {"decoder", decoder_kind_name(base.decoder.kind)},
          {"num_classes", num_classes},
          {"train_images", train.size()},
          {"val_images", val.size()},
          {"cells", std::move(cells)}};
}

MaskSet sam_standin(const MaskSet& aligned, std::uint64_t seed, double drop,
                    std::uint32_t erode) {
  Rng rng(seed);
  MaskSet out{aligned.dims, {}};
  const std::size_t h = aligned.dims.height;
  const std::size_t w = aligned.dims.width;
  for (const RegionMask& mask : aligned.masks) {
    if (rng.uniform() < drop) continue;
    Bitmap bm = mask.to_bitmap();
    for (std::uint32_t step = 0; step < erode; ++step) {
      Bitmap next = bm;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t i = y * w + x;
          if (!bm.bits[i]) continue;
          const bool edge = (y > 0 && !bm.bits[i - w]) || (y + 1 < h && !bm.bits[i + w]) ||
                            (x > 0 && !bm.bits[i - 1]) || (x + 1 < w && !bm.bits[i + 1]);
          if (edge) next.bits[i] = 0;
        }
      }
      bm = std::move(next);
    }
    if (std::find(bm.bits.begin(), bm.bits.end(), 1) == bm.bits.end()) continue;
    out.masks.push_back(rle_encode(bm, MaskSource::kSam));
  }
  return out;
}

nlohmann::json region_bench(const BenchConfig& config) {
  const auto train_scenes = make_scenes(config.seed, config.train_images, config.scene);
  const auto val_scenes =
      make_scenes(config.seed + config.train_images, config.val_images, config.scene);
  const std::size_t images = train_scenes.size() + val_scenes.size();
  const auto scene_at = [&](std::size_t i) -> const SynthScene& {
    return i < train_scenes.size() ? train_scenes[i] : val_scenes[i - train_scenes.size()];
  };

  struct Source {
    std::string name;
    std::vector<MaskSet> sets;
    double seconds = 0.0;
  };
  Source sam{"sam", {}, 0.0};
  Source slic{"slic", {}, 0.0};
  Source combined{"sam+slic", {}, 0.0};
  Source aligned{"gt_aligned", {}, 0.0};
  for (std::size_t i = 0; i < images; ++i) {
    const SynthScene& s = scene_at(i);
    auto t0 = Clock::now();
    sam.sets.push_back(sam_standin(s.aligned, config.seed * 1000003 + i, config.sam_drop,
                                   config.sam_erode));
    const double sam_s = seconds_since(t0);
    t0 = Clock::now();
    slic.sets.push_back(slic_segment(s.image, config.slic));
    const double slic_s = seconds_since(t0);
    t0 = Clock::now();
    combined.sets.push_back(augment_with_slic(sam.sets.back(), slic.sets.back(),
                                              config.min_uncovered));
    const double aug_s = seconds_since(t0);
    sam.seconds += sam_s;
    slic.seconds += slic_s;
    combined.seconds += sam_s + slic_s + aug_s;
    aligned.sets.push_back(s.aligned);
  }

  nlohmann::json rows = nlohmann::json::array();
  const std::uint16_t classes = static_cast<std::uint16_t>(config.scene.num_classes);
  for (Source* src : {&sam, &slic, &combined, &aligned}) {
    std::vector<ImageRecord> train;
    std::vector<ImageRecord> val;
    double coverage = 0.0;
    std::size_t regions = 0;
    ConfusionMatrix oracle(classes);
    for (std::size_t i = 0; i < images; ++i) {
      const SynthScene& s = scene_at(i);
      const CoverageStats stats = coverage_stats(src->sets[i]);
      coverage += stats.covered_fraction;
      regions += stats.region_count;
      ImageRecord rec{static_cast<std::uint32_t>(i), s.features, s.labels, src->sets[i]};
      if (i < train_scenes.size()) {
        train.push_back(std::move(rec));
      } else {
        const auto dists = oracle_distributions(rec.regions, rec.gt);
        oracle.add(predict_pixels(rec.regions, dists, classes), rec.gt);
        val.push_back(std::move(rec));
      }
    }
    const SegRunResult run = run_segmentation(train, val, classes, config.run);
    rows.push_back(
        {{"regions", src->name},
         {"seconds_per_image", src->seconds / static_cast<double>(images)},
         {"regions_per_image", static_cast<double>(regions) / static_cast<double>(images)},
         {"coverage", coverage / static_cast<double>(images)},
         {"oracle_miou", optional_number(oracle.report().miou)},
         {"miou", optional_number(run.report.miou)},
         {"vanished_masks", run.vanished_masks},
         {"timings",
          {{"regions_s", src->seconds},
           {"pool_s", run.pool_seconds},
           {"train_s", run.train_seconds},
           {"eval_s", run.eval_seconds}}}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"kind", "region_bench"},
          {"images", images},
          {"train_images", train_scenes.size()},
          {"val_images", val_scenes.size()},
          {"height", config.scene.dims.height},
          {"width", config.scene.dims.width},
          {"min_uncovered", config.min_uncovered},
          {"slic", {{"num_components", config.slic.num_components},
                    {"compactness", config.slic.compactness}}},
          {"rows", std::move(rows)}};
}

namespace {

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03zu.%s", stem, i, ext);
  return buf;
}

}  // namespace

void save_fixture(const std::filesystem::path& dir, std::span<const SynthScene> train,
                  std::span<const SynthScene> val, const nlohmann::json& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
  const std::uint16_t classes =
      train.empty() ? (val.empty() ? 0 : val.front().labels.num_classes)
                    : train.front().labels.num_classes;
  nlohmann::json splits = {{"train", nlohmann::json::array()}, {"val", nlohmann::json::array()}};
  std::size_t id = 0;
  for (const auto& [name, scenes] :
       {std::pair{"train", train}, std::pair{"val", val}}) {
    for (const SynthScene& s : scenes) {
      const nlohmann::json entry = {{"image_id", id},
                                    {"image", numbered("image", id, "ppm")},
                                    {"labels", numbered("labels", id, "rblm")},
                                    {"features", numbered("features", id, "rbrf")},
                                    {"masks", numbered("masks", id, "json")}};
      save_ppm(dir / entry["image"].get<std::string>(), s.image);
      save_label_map(dir / entry["labels"].get<std::string>(), s.labels);
      save_feature_grid(dir / entry["features"].get<std::string>(), s.features);
      save_mask_set(dir / entry["masks"].get<std::string>(), s.aligned);
      splits[name].push_back(entry);
      ++id;
    }
  }
  nlohmann::json manifest = {{"schema_version", kReportSchemaVersion},
                             {"kind", "fixture"},
                             {"num_classes", classes},
                             {"meta", meta},
                             {"train", splits["train"]},
                             {"val", splits["val"]}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Fixture load_fixture(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, "fixture manifest: " + std::string(e.what()));
  }
  Fixture fixture;
  try {
    fixture.num_classes = manifest.at("num_classes").get<std::uint16_t>();
    for (const char* split : {"train", "val"}) {
      for (const auto& entry : manifest.at(split)) {
        ImageRecord rec;
        rec.image_id = entry.at("image_id").get<std::uint32_t>();
        rec.features = load_feature_grid(dir / entry.at("features").get<std::string>());
        rec.gt = load_label_map(dir / entry.at("labels").get<std::string>());
        rec.regions = load_mask_set(dir / entry.at("masks").get<std::string>());
        (std::string(split) == "train" ? fixture.train : fixture.val).push_back(std::move(rec));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, "fixture manifest: " + std::string(e.what()));
  }
  return fixture;
}

namespace {

void require(const nlohmann::json& obj, const std::string& where, const char* key,
             bool (nlohmann::json::*type_check)() const noexcept, bool nullable = false) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::kFormat, where + " lacks '" + key + "'");
  }
  const nlohmann::json& v = obj[key];
  if (nullable && v.is_null()) return;
  if (!(v.*type_check)()) {
    throw Error(ErrorCode::kFormat, where + "." + key + " has the wrong type");
  }
}

void require_header(const nlohmann::json& report, const char* kind) {
  require(report, "report", "schema_version", &nlohmann::json::is_number_integer);
  if (report["schema_version"] != kReportSchemaVersion) {
    throw Error(ErrorCode::kFormat, "unsupported report schema_version");
  }
  require(report, "report", "kind", &nlohmann::json::is_string);
  if (report["kind"] != kind) {
    throw Error(ErrorCode::kFormat, std::string("report kind is not '") + kind + "'");
  }
}

}  // namespace

void check_ablation_report(const nlohmann::json& report) {
  require_header(report, "pooling_ablation");
  require(report, "report", "cells", &nlohmann::json::is_array);
  if (report["cells"].size() != 4) {
    throw Error(ErrorCode::kFormat, "pooling ablation needs exactly 4 cells");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string where = "cells[" + std::to_string(i) + "]";
    const auto& cell = report["cells"][i];
    require(cell, where, "resample", &nlohmann::json::is_string);
    require(cell, where, "reducer", &nlohmann::json::is_string);
    require(cell, where, "miou", &nlohmann::json::is_number, true);
    require(cell, where, "vanished_masks", &nlohmann::json::is_number_unsigned);
    require(cell, where, "seconds", &nlohmann::json::is_number);
  }
}

void check_bench_report(const nlohmann::json& report) {
  require_header(report, "region_bench");
  require(report, "report", "images", &nlohmann::json::is_number_unsigned);
  require(report, "report", "rows", &nlohmann::json::is_array);
  if (report["rows"].empty()) throw Error(ErrorCode::kFormat, "bench report has no rows");
  for (std::size_t i = 0; i < report["rows"].size(); ++i) {
    const std::string where = "rows[" + std::to_string(i) + "]";
    const auto& row = report["rows"][i];
    require(row, where, "regions", &nlohmann::json::is_string);
    require(row, where, "seconds_per_image", &nlohmann::json::is_number);
    require(row, where, "regions_per_image", &nlohmann::json::is_number);
    require(row, where, "coverage", &nlohmann::json::is_number);
    require(row, where, "oracle_miou", &nlohmann::json::is_number, true);
    require(row, where, "miou", &nlohmann::json::is_number, true);
    require(row, where, "timings", &nlohmann::json::is_object);
    for (const char* key : {"regions_s", "pool_s", "train_s", "eval_s"}) {
      require(row["timings"], where + ".timings", key, &nlohmann::json::is_number);
    }
  }
}

}  // namespace rbr
