// Command-line front end: one subcommand per pipeline stage. Reports are
// JSON on stdout (or --report); exit codes are listed in README.md.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rbr/core.hpp"
#include "rbr/decoders.hpp"
#include "rbr/io.hpp"
#include "rbr/labeling.hpp"
#include "rbr/multi_image.hpp"
#include "rbr/parallel.hpp"
#include "rbr/pipeline.hpp"
#include "rbr/pooling.hpp"
#include "rbr/regions.hpp"
#include "rbr/retrieval.hpp"
#include "rbr/segmap.hpp"
#include "rbr/slic.hpp"
#include "rbr/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitIo = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  unsigned threads = 0;
  std::uint64_t seed = 0;
  std::string report;
};

void emit(const Globals& g, const json& report) {
  const std::string text = report.dump(2) + "\n";
  if (g.report.empty()) {
    std::cout << text;
  } else {
    rbr::write_text_file(g.report, text);
  }
}

unsigned threads_of(const Globals& g) {
  return g.threads > 0 ? g.threads : rbr::default_thread_count();
}

rbr::Resample parse_resample(const std::string& s) {
  if (s == "upsample") return rbr::Resample::kUpsampleFeatures;
  if (s == "downsample") return rbr::Resample::kDownsampleMasks;
  throw UsageError("--resample must be 'upsample' or 'downsample'");
}

rbr::Reducer parse_reducer(const std::string& s) {
  if (s == "average") return rbr::Reducer::kAverage;
  if (s == "max") return rbr::Reducer::kMax;
  throw UsageError("--reducer must be 'average' or 'max'");
}

rbr::OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adamw") return rbr::OptimizerKind::kAdamW;
  if (s == "sgd") return rbr::OptimizerKind::kSgd;
  throw UsageError("--optimizer must be 'adamw' or 'sgd'");
}

void require_pairs(const std::vector<std::string>& a, const std::vector<std::string>& b,
                   const char* name_a, const char* name_b) {
  if (a.size() != b.size()) {
    throw UsageError(std::string("give one ") + name_b + " per " + name_a + " (" +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

// Region labels as written by prep-labels.
std::map<std::uint32_t, rbr::RegionLabel> load_region_labels(const fs::path& path) {
  std::map<std::uint32_t, rbr::RegionLabel> out;
  try {
    const json doc = json::parse(rbr::read_text_file(path));
    for (const auto& r : doc.at("regions")) {
      rbr::RegionLabel l;
      l.region_id = r.at("region_id").get<std::uint32_t>();
      l.label = r.at("label").get<std::uint16_t>();
      l.weight = r.at("weight").get<std::size_t>();
      out[l.region_id] = l;
    }
  } catch (const json::exception& e) {
    throw rbr::Error(rbr::ErrorCode::kFormat, path.string() + ": " + e.what());
  }
  return out;
}

std::vector<rbr::Sequence> labelled_sequences(const std::vector<rbr::RegionVector>& vectors,
                                              const std::map<std::uint32_t, rbr::RegionLabel>& labels,
                                              bool per_image) {
  auto target_of = [&](const rbr::RegionVector& v) {
    const auto it = labels.find(v.region_id);
    return it == labels.end()
               ? rbr::TokenTarget{}
               : rbr::TokenTarget{it->second.label, static_cast<double>(it->second.weight)};
  };
  std::vector<rbr::Sequence> out;
  if (vectors.empty()) return out;
  if (per_image) {
    rbr::Sequence seq;
    seq.tokens = rbr::tokens_from_vectors(vectors);
    for (const auto& v : vectors) seq.targets.push_back(target_of(v));
    out.push_back(std::move(seq));
    return out;
  }
  for (const auto& v : vectors) {
    const rbr::TokenTarget t = target_of(v);
    if (t.label < 0) continue;
    rbr::Sequence seq;
    seq.tokens = rbr::tokens_from_vectors(std::span<const rbr::RegionVector>(&v, 1));
    seq.targets.push_back(t);
    out.push_back(std::move(seq));
  }
  return out;
}

// ---- subcommands ----------------------------------------------------------------

struct SlicArgs {
  std::string image, out;
  rbr::SlicConfig cfg;
  std::uint32_t min_px = 0;
};

void run_slic(const Globals& g, const SlicArgs& a) {
  rbr::SlicConfig cfg = a.cfg;
  if (a.min_px > 0) cfg.min_component_px = a.min_px;
  rbr::SlicTrace trace;
  const rbr::MaskSet set = rbr::slic_segment(rbr::load_ppm(a.image), cfg, &trace);
  rbr::save_mask_set(a.out, set);
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "slic"},
           {"components", set.size()},
           {"seeds", trace.seeds},
           {"merged_components", trace.merged_components},
           {"iteration_costs", trace.iteration_costs}});
}

struct AugmentArgs {
  std::string sam, slic, out;
  std::size_t min_uncovered = rbr::kDefaultMinUncovered;
};

void run_augment(const Globals& g, const AugmentArgs& a) {
  const rbr::MaskSet sam = rbr::load_mask_set(a.sam);
  const rbr::MaskSet out =
      rbr::augment_with_slic(sam, rbr::load_mask_set(a.slic), a.min_uncovered);
  rbr::save_mask_set(a.out, out);
  const auto before = rbr::coverage_stats(sam);
  const auto after = rbr::coverage_stats(out);
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "augment"},
           {"sam_regions", before.region_count},
           {"added_regions", after.region_count - before.region_count},
           {"coverage_before", before.covered_fraction},
           {"coverage_after", after.covered_fraction}});
}

struct PoolArgs {
  std::string features, masks, out;
  std::uint32_t image_id = 0;
  std::string resample = "upsample", reducer = "average", interp = "bilinear";
  bool grid_posemb = false;
};

void run_pool(const Globals& g, const PoolArgs& a) {
  rbr::PoolConfig cfg;
  cfg.resample = parse_resample(a.resample);
  cfg.reducer = parse_reducer(a.reducer);
  if (a.interp != "bilinear" && a.interp != "nearest") {
    throw UsageError("--interp must be 'bilinear' or 'nearest'");
  }
  cfg.interpolation =
      a.interp == "nearest" ? rbr::Interpolation::kNearest : rbr::Interpolation::kBilinear;
  cfg.add_grid_posemb = a.grid_posemb;
  cfg.threads = threads_of(g);
  const auto enc = rbr::encode_image(rbr::load_feature_grid(a.features),
                                     rbr::load_mask_set(a.masks), cfg, a.image_id);
  rbr::save_region_vectors(a.out, enc.vectors);
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "pool"},
           {"resample", rbr::resample_name(cfg.resample)},
           {"reducer", rbr::reducer_name(cfg.reducer)},
           {"vectors", enc.vectors.size()},
           {"vanished", enc.vanished}});
}

struct PrepLabelsArgs {
  std::string masks, labels, out;
  double threshold = rbr::kDefaultLabelThreshold;
};

void run_prep_labels(const Globals& g, const PrepLabelsArgs& a) {
  const rbr::MaskSet set = rbr::load_mask_set(a.masks);
  const rbr::LabelMap gt = rbr::load_label_map(a.labels);
  const auto labels = rbr::label_regions(set, gt, a.threshold);
  json regions = json::array();
  for (const auto& l : labels) {
    regions.push_back({{"region_id", l.region_id}, {"label", l.label}, {"weight", l.weight}});
  }
  const json doc = {{"schema_version", rbr::kReportSchemaVersion},
                    {"kind", "region_labels"},
                    {"num_classes", gt.num_classes},
                    {"threshold", a.threshold},
                    {"regions", regions}};
  rbr::write_text_file(a.out, doc.dump(2) + "\n");
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "prep_labels"},
           {"regions", set.size()},
           {"labelled", labels.size()},
           {"excluded", set.size() - labels.size()}});
}

struct TrainArgs {
  std::vector<std::string> vectors, labels, val_vectors, val_labels;
  std::string decoder = "linear", out, optimizer = "adamw";
  std::uint32_t num_classes = 0;
  double lr = 5e-4, weight_decay = 0.0, warmup = 0.0;
  std::size_t batch = 32, epochs = 20, patience = 3, hidden = 1000, blocks = 1, heads = 8;
};

void run_train(const Globals& g, const TrainArgs& a) {
  require_pairs(a.vectors, a.labels, "--vectors", "--labels");
  require_pairs(a.val_vectors, a.val_labels, "--val-vectors", "--val-labels");
  rbr::DecoderSpec spec;
  spec.kind = rbr::parse_decoder_kind(a.decoder);
  spec.hidden = a.hidden;
  spec.blocks = a.blocks;
  spec.heads = a.heads;
  const bool per_image = spec.kind == rbr::DecoderKind::kTransformer;
  std::uint32_t classes = a.num_classes;
  auto gather = [&](const std::vector<std::string>& vf, const std::vector<std::string>& lf) {
    std::vector<rbr::Sequence> out;
    for (std::size_t i = 0; i < vf.size(); ++i) {
      const auto labels = load_region_labels(lf[i]);
      for (const auto& [id, l] : labels) classes = std::max<std::uint32_t>(classes, l.label + 1u);
      auto seqs = labelled_sequences(rbr::load_region_vectors(vf[i]), labels, per_image);
      std::move(seqs.begin(), seqs.end(), std::back_inserter(out));
    }
    return out;
  };
  const auto train_set = gather(a.vectors, a.labels);
  const auto val_set = gather(a.val_vectors, a.val_labels);
  if (train_set.empty()) {
    throw rbr::Error(rbr::ErrorCode::kEmptyBatch, "no labelled regions in the training files");
  }
  spec.input_dim = train_set.front().tokens.cols;
  spec.num_classes = classes;
  auto decoder = rbr::make_decoder(spec, g.seed);
  rbr::TrainConfig tc;
  tc.lr = a.lr;
  tc.batch = a.batch;
  tc.epochs = a.epochs;
  tc.optimizer = parse_optimizer(a.optimizer);
  tc.weight_decay = a.weight_decay;
  tc.warmup_epochs = a.warmup;
  tc.patience = a.patience;
  tc.seed = g.seed;
  const auto result = rbr::train(*decoder, train_set, val_set, tc);
  rbr::save_decoder(a.out, *decoder);
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "train_seg"},
           {"decoder", rbr::decoder_kind_name(spec.kind)},
           {"num_classes", spec.num_classes},
           {"input_dim", spec.input_dim},
           {"parameters", decoder->num_parameters()},
           {"train_sequences", train_set.size()},
           {"train_loss", result.train_loss},
           {"val_loss", result.val_loss},
           {"best_epoch", result.best_epoch},
           {"early_stopped", result.early_stopped}});
}

struct EvalSegArgs {
  std::string model;
  std::vector<std::string> vectors, masks, labels;
};

void run_eval_seg(const Globals& g, const EvalSegArgs& a) {
  require_pairs(a.vectors, a.masks, "--vectors", "--masks");
  require_pairs(a.vectors, a.labels, "--vectors", "--labels");
  const auto decoder = rbr::load_decoder(a.model);
  const auto classes = static_cast<std::uint16_t>(decoder->spec().num_classes);
  rbr::ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < a.vectors.size(); ++i) {
    const rbr::MaskSet set = rbr::load_mask_set(a.masks[i]);
    const rbr::LabelMap gt = rbr::load_label_map(a.labels[i]);
    if (gt.num_classes != classes) {
      throw rbr::Error(rbr::ErrorCode::kDimsMismatch,
                       a.labels[i] + " has " + std::to_string(gt.num_classes) +
                           " classes, the model predicts " + std::to_string(classes));
    }
    rbr::EncodedImage enc;
    enc.vectors = rbr::load_region_vectors(a.vectors[i]);
    const auto dists = rbr::region_distributions(*decoder, enc, set.size());
    cm.add(rbr::predict_pixels(set, dists, classes), gt);
  }
  json report = cm.report().to_json();
  report["kind"] = "eval_seg";
  report["images"] = a.vectors.size();
  emit(g, report);
}

struct OracleArgs {
  std::vector<std::string> masks, labels;
};

void run_oracle(const Globals& g, const OracleArgs& a) {
  require_pairs(a.masks, a.labels, "--masks", "--labels");
  std::optional<rbr::ConfusionMatrix> cm;
  for (std::size_t i = 0; i < a.masks.size(); ++i) {
    const rbr::MaskSet set = rbr::load_mask_set(a.masks[i]);
    const rbr::LabelMap gt = rbr::load_label_map(a.labels[i]);
    if (!cm) cm.emplace(gt.num_classes);
    if (gt.num_classes != cm->num_classes()) {
      throw rbr::Error(rbr::ErrorCode::kDimsMismatch, "label maps disagree on the class count");
    }
    cm->add(rbr::predict_pixels(set, rbr::oracle_distributions(set, gt), gt.num_classes), gt);
  }
  json report = cm->report().to_json();
  report["kind"] = "oracle_eval";
  report["images"] = a.masks.size();
  emit(g, report);
}

std::vector<rbr::RegionVector> load_all_vectors(const std::vector<std::string>& files) {
  std::vector<rbr::RegionVector> all;
  for (const auto& f : files) {
    auto v = rbr::load_region_vectors(f);
    std::move(v.begin(), v.end(), std::back_inserter(all));
  }
  return all;
}

struct IndexArgs {
  std::vector<std::string> vectors;
  std::string out;
  bool cosine = false;
};

void run_index(const Globals& g, const IndexArgs& a) {
  const auto index = rbr::build_index(load_all_vectors(a.vectors), a.cosine);
  rbr::save_index(a.out, index);
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "index"},
           {"rows", index.rows()},
           {"dim", index.dim()},
           {"normalized", index.normalized()}});
}

json ranked_json(const rbr::RankedResult& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back(
        {{"image_id", e.image_id}, {"score", e.score}, {"best_region_id", e.best_region_id}});
  }
  return entries;
}

struct QueryArgs {
  std::string index, query_vectors, features, mask_set;
  std::uint32_t mask_id = 0;
  std::size_t top_k = 50;
};

void run_query(const Globals& g, const QueryArgs& a) {
  const auto index = rbr::load_index(a.index);
  std::vector<rbr::RegionVector> queries;
  if (!a.query_vectors.empty()) {
    queries = rbr::load_region_vectors(a.query_vectors);
  } else {
    const rbr::MaskSet set = rbr::load_mask_set(a.mask_set);
    if (a.mask_id >= set.size()) throw UsageError("--mask-id is out of range");
    queries.push_back(rbr::query_from_mask(rbr::load_feature_grid(a.features),
                                           set.masks[a.mask_id]));
  }
  json results = json::array();
  for (std::size_t q = 0; q < queries.size(); ++q) {
    results.push_back({{"query", q}, {"ranked", ranked_json(index.query(queries[q], a.top_k))}});
  }
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "query"},
           {"top_k", a.top_k},
           {"results", results}});
}

struct EvalRetrievalArgs {
  std::string index, queries, relevance;
  std::vector<std::string> vectors;
  std::size_t k = 50;
  bool cosine = false;
};

void run_eval_retrieval(const Globals& g, const EvalRetrievalArgs& a) {
  const rbr::RetrievalIndex index = a.index.empty()
                                        ? rbr::build_index(load_all_vectors(a.vectors), a.cosine)
                                        : rbr::load_index(a.index);
  const auto queries = rbr::load_region_vectors(a.queries);
  json rel;
  try {
    rel = json::parse(rbr::read_text_file(a.relevance)).at("queries");
  } catch (const json::exception& e) {
    throw rbr::Error(rbr::ErrorCode::kFormat, a.relevance + ": " + e.what());
  }
  if (rel.size() != queries.size()) {
    throw rbr::Error(rbr::ErrorCode::kDimsMismatch,
                     "relevance lists " + std::to_string(rel.size()) + " queries, " +
                         a.queries + " holds " + std::to_string(queries.size()));
  }
  std::vector<rbr::QueryOutcome> outcomes;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto relevant = rel[q].at("relevant").get<std::vector<std::uint32_t>>();
    const auto ranked = index.query(queries[q], 0);
    outcomes.push_back({rel[q].at("class_id").get<std::uint32_t>(),
                        rbr::average_precision(ranked, relevant),
                        rbr::precision_at_k(ranked, relevant, a.k)});
  }
  const auto summary = rbr::summarize_retrieval(outcomes);
  json per_class = json::object();
  for (const auto& [k, ap] : summary.per_class_ap) per_class[std::to_string(k)] = ap;
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "eval_retrieval"},
           {"queries", summary.queries},
           {"k", a.k},
           {"map", summary.mean_average_precision},
           {"precision_at_k", summary.mean_precision_at_k},
           {"per_class_ap", per_class}});
}

struct SceneArgs {
  std::vector<std::string> vectors, masks, points;
  std::string out, merge = "concat";
  std::size_t dim_2d = 0, dim_3d = 0;
};

void run_assemble_scene(const Globals& g, const SceneArgs& a) {
  require_pairs(a.vectors, a.masks, "--vectors", "--masks");
  if (!a.points.empty()) require_pairs(a.vectors, a.points, "--vectors", "--points");
  if (a.merge != "concat" && a.merge != "add") throw UsageError("--merge must be concat or add");
  std::vector<rbr::PointMap> maps;
  for (const auto& p : a.points) maps.push_back(rbr::load_point_map(p));
  const auto bounds = rbr::scene_bounds(maps);
  std::vector<rbr::SceneToken> tokens;
  for (std::size_t i = 0; i < a.vectors.size(); ++i) {
    const auto vectors = rbr::load_region_vectors(a.vectors[i]);
    const auto set = rbr::load_mask_set(a.masks[i]);
    auto t = rbr::make_scene_tokens(vectors, set, a.dim_2d, maps.empty() ? nullptr : &maps[i],
                                    bounds ? &*bounds : nullptr, a.dim_3d);
    std::move(t.begin(), t.end(), std::back_inserter(tokens));
  }
  rbr::SceneTokenConfig cfg;
  cfg.merge = a.merge == "add" ? rbr::EmbeddingMerge::kAdd : rbr::EmbeddingMerge::kConcat;
  cfg.use_2d = a.dim_2d > 0;
  cfg.use_3d = a.dim_3d > 0;
  const auto batch = rbr::assemble_scene_tokens(tokens, cfg);
  rbr::save_token_batch(a.out, batch);
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "assemble_scene"},
           {"tokens", batch.size()},
           {"dim", batch.dim},
           {"missing_geometry", batch.missing_geometry}});
}

struct VideoArgs {
  std::vector<std::string> vectors, masks;
  std::string out;
  std::uint32_t total_frames = 0;
  std::size_t pad_to = rbr::kVideoTokenBudget;
};

void run_assemble_video(const Globals& g, const VideoArgs& a) {
  if (!a.masks.empty()) require_pairs(a.vectors, a.masks, "--vectors", "--masks");
  const auto n = static_cast<std::uint32_t>(a.vectors.size());
  std::vector<std::uint32_t> frame_ids(n);
  if (a.total_frames > 0) {
    frame_ids = rbr::sample_frames(a.total_frames, n);
  } else {
    for (std::uint32_t i = 0; i < n; ++i) frame_ids[i] = i;
  }
  std::vector<rbr::FrameRegions> frames;
  for (std::uint32_t i = 0; i < n; ++i) {
    rbr::FrameRegions f;
    f.frame_index = frame_ids[i];
    f.vectors = rbr::load_region_vectors(a.vectors[i]);
    if (!a.masks.empty()) {
      const auto set = rbr::load_mask_set(a.masks[i]);
      for (const auto& v : f.vectors) {
        if (v.region_id >= set.size()) {
          throw rbr::Error(rbr::ErrorCode::kInvalidArgument,
                           a.vectors[i] + ": region " + std::to_string(v.region_id) +
                               " has no mask");
        }
        f.pixel_counts.push_back(set.masks[v.region_id].pixel_count());
      }
    }
    frames.push_back(std::move(f));
  }
  const auto batch = rbr::assemble_video_tokens(frames, a.pad_to);
  rbr::save_token_batch(a.out, batch);
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "assemble_video"},
           {"frames", frame_ids},
           {"tokens", batch.size()},
           {"real_tokens", batch.real_count()},
           {"truncated", batch.truncated}});
}

struct SynthArgs {
  std::string out_dir;
  std::size_t train = 10, val = 5;
  std::uint32_t size = 96, segments = 24, classes = 6, patch = 4;
  bool small_segment = false;
  bool retrieval = false;
  rbr::RetrievalDbConfig db;
};

void run_synth(const Globals& g, const SynthArgs& a) {
  const fs::path dir = a.out_dir;
  if (a.retrieval) {
    const auto db = rbr::gen_retrieval_db(g.seed, a.db);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw rbr::Error(rbr::ErrorCode::kIo, "cannot create " + dir.string());
    rbr::save_region_vectors(dir / "db.rbrv", db.database);
    std::vector<rbr::RegionVector> qv;
    json rel = json::array();
    for (const auto& q : db.queries) {
      qv.push_back(q.vector);
      rel.push_back({{"class_id", q.class_id}, {"relevant", q.relevant}});
    }
    rbr::save_region_vectors(dir / "queries.rbrv", qv);
    rbr::write_text_file(dir / "relevance.json",
                         json{{"schema_version", rbr::kReportSchemaVersion},
                              {"queries", rel}}.dump(2) + "\n");
    emit(g, {{"schema_version", rbr::kReportSchemaVersion},
             {"kind", "synth_retrieval"},
             {"regions", db.database.size()},
             {"queries", db.queries.size()}});
    return;
  }
  rbr::SceneConfig sc;
  sc.dims = {a.size, a.size};
  sc.num_segments = a.segments;
  sc.num_classes = a.classes;
  sc.patch = a.patch;
  sc.small_segment = a.small_segment;
  const auto train = rbr::make_scenes(g.seed, a.train, sc);
  const auto val = rbr::make_scenes(g.seed + a.train, a.val, sc);
  rbr::save_fixture(dir, train, val,
                    {{"seed", g.seed},
                     {"size", a.size},
                     {"segments", a.segments},
                     {"patch", a.patch},
                     {"small_segment", a.small_segment}});
  emit(g, {{"schema_version", rbr::kReportSchemaVersion},
           {"kind", "synth"},
           {"train_images", train.size()},
           {"val_images", val.size()},
           {"out_dir", dir.string()}});
}

struct BenchArgs {
  std::string fixture;
  bool pooling = false;
  bool table = false;
  std::size_t train = 10, val = 5;
};

void print_table(const json& report) {
  if (report["kind"] == "region_bench") {
    std::printf("%-12s %10s %10s %9s %12s %8s\n", "regions", "s/im", "reg/im", "coverage",
                "oracle mIoU", "mIoU");
    for (const auto& r : report["rows"]) {
      std::printf("%-12s %10.4f %10.1f %9.3f %12.4f %8.4f\n",
                  r["regions"].get<std::string>().c_str(), r["seconds_per_image"].get<double>(),
                  r["regions_per_image"].get<double>(), r["coverage"].get<double>(),
                  r["oracle_miou"].is_null() ? 0.0 : r["oracle_miou"].get<double>(),
                  r["miou"].is_null() ? 0.0 : r["miou"].get<double>());
    }
    return;
  }
  std::printf("%-18s %-8s %8s %9s\n", "resample", "reducer", "mIoU", "vanished");
  for (const auto& c : report["cells"]) {
    std::printf("%-18s %-8s %8.4f %9zu\n", c["resample"].get<std::string>().c_str(),
                c["reducer"].get<std::string>().c_str(),
                c["miou"].is_null() ? 0.0 : c["miou"].get<double>(),
                c["vanished_masks"].get<std::size_t>());
  }
}

void run_bench(const Globals& g, const BenchArgs& a) {
  json report;
  if (a.pooling) {
    rbr::Fixture fx;
    if (!a.fixture.empty()) {
      fx = rbr::load_fixture(a.fixture);
    } else {
      rbr::SceneConfig sc;
      sc.small_segment = true;
      const auto tr = rbr::make_scenes(g.seed, a.train, sc);
      const auto va = rbr::make_scenes(g.seed + a.train, a.val, sc);
      fx.num_classes = static_cast<std::uint16_t>(sc.num_classes);
      fx.train = rbr::aligned_records(tr, 0);
      fx.val = rbr::aligned_records(va, static_cast<std::uint32_t>(a.train));
    }
    rbr::SegRunConfig cfg;
    cfg.seed = g.seed;
    cfg.pool.threads = threads_of(g);
    report = rbr::pooling_ablation(fx.train, fx.val, fx.num_classes, cfg);
    rbr::check_ablation_report(report);
  } else {
    rbr::BenchConfig cfg;
    cfg.seed = g.seed;
    cfg.train_images = a.train;
    cfg.val_images = a.val;
    cfg.run.pool.threads = threads_of(g);
    report = rbr::region_bench(cfg);
    rbr::check_bench_report(report);
  }
  if (a.table) {
    print_table(report);
    if (!g.report.empty()) rbr::write_text_file(g.report, report.dump(2) + "\n");
    return;
  }
  emit(g, report);
}

int exit_code_for(const rbr::Error& e) {
  switch (e.code()) {
    case rbr::ErrorCode::kIo: return kExitIo;
    case rbr::ErrorCode::kConfig: return kExitUsage;
    default: return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region-based representation toolkit"};
  app.set_config("--config", "", "TOML-style file with flag defaults (sections per subcommand)");
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (falls back to RBR_THREADS, then 1)");
  app.add_option("--seed", g.seed, "Seed for every randomised stage");
  app.add_option("--report", g.report, "Write the JSON report here instead of stdout");

  SlicArgs slic;
  auto* c_slic = app.add_subcommand("slic", "Superpixels of a PPM image");
  c_slic->add_option("--image", slic.image, "Binary PPM input")->required();
  c_slic->add_option("--out", slic.out, "Mask set JSON output")->required();
  c_slic->add_option("--components", slic.cfg.num_components, "Target superpixel count");
  c_slic->add_option("--compactness", slic.cfg.compactness, "Color vs. spatial weight");
  c_slic->add_option("--iters", slic.cfg.max_iters, "Maximum k-means iterations");
  c_slic->add_option("--min-px", slic.min_px, "Smallest kept component (default S^2/4)");

  AugmentArgs aug;
  auto* c_aug = app.add_subcommand("augment", "Fill SAM coverage gaps with superpixels");
  c_aug->add_option("--sam", aug.sam, "SAM mask set JSON")->required();
  c_aug->add_option("--slic", aug.slic, "Superpixel mask set JSON")->required();
  c_aug->add_option("--out", aug.out, "Augmented mask set JSON")->required();
  c_aug->add_option("--min-uncovered", aug.min_uncovered, "Pixels a superpixel must add");

  PoolArgs pool;
  auto* c_pool = app.add_subcommand("pool", "Region vectors from a feature grid and masks");
  c_pool->add_option("--features", pool.features, "RBRF feature grid")->required();
  c_pool->add_option("--masks", pool.masks, "Mask set JSON")->required();
  c_pool->add_option("--out", pool.out, "RBRV output")->required();
  c_pool->add_option("--image-id", pool.image_id, "Image id stamped on every vector");
  c_pool->add_option("--resample", pool.resample, "upsample | downsample");
  c_pool->add_option("--reducer", pool.reducer, "average | max");
  c_pool->add_option("--interp", pool.interp, "bilinear | nearest");
  c_pool->add_flag("--grid-posemb", pool.grid_posemb, "Add 2D sinusoids to the patch grid");

  PrepLabelsArgs prep;
  auto* c_prep = app.add_subcommand("prep-labels", "Majority labels for every region");
  c_prep->add_option("--masks", prep.masks, "Mask set JSON")->required();
  c_prep->add_option("--labels", prep.labels, "RBLM label map")->required();
  c_prep->add_option("--out", prep.out, "Region label JSON output")->required();
  c_prep->add_option("--threshold", prep.threshold, "Minimum majority share");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train-seg", "Train a region decoder");
  c_train->add_option("--vectors", tr.vectors, "RBRV file per image")->required();
  c_train->add_option("--labels", tr.labels, "Region label JSON per image")->required();
  c_train->add_option("--val-vectors", tr.val_vectors, "Validation RBRV files");
  c_train->add_option("--val-labels", tr.val_labels, "Validation region label files");
  c_train->add_option("--decoder", tr.decoder, "linear | mlp | xf");
  c_train->add_option("--num-classes", tr.num_classes, "Class count (default: from labels)");
  c_train->add_option("--out", tr.out, "RBDC checkpoint output")->required();
  c_train->add_option("--lr", tr.lr, "Learning rate");
  c_train->add_option("--batch", tr.batch, "Sequences per step");
  c_train->add_option("--epochs", tr.epochs, "Maximum epochs");
  c_train->add_option("--optimizer", tr.optimizer, "adamw | sgd");
  c_train->add_option("--weight-decay", tr.weight_decay, "Decoupled weight decay");
  c_train->add_option("--warmup", tr.warmup, "Warm-up epochs");
  c_train->add_option("--patience", tr.patience, "Early-stopping patience");
  c_train->add_option("--hidden", tr.hidden, "MLP hidden width");
  c_train->add_option("--blocks", tr.blocks, "Transformer blocks");
  c_train->add_option("--heads", tr.heads, "Attention heads");

  EvalSegArgs ev;
  auto* c_eval = app.add_subcommand("eval-seg", "mIoU of a trained decoder");
  c_eval->add_option("--model", ev.model, "RBDC checkpoint")->required();
  c_eval->add_option("--vectors", ev.vectors, "RBRV file per image")->required();
  c_eval->add_option("--masks", ev.masks, "Mask set JSON per image")->required();
  c_eval->add_option("--labels", ev.labels, "RBLM label map per image")->required();

  OracleArgs orc;
  auto* c_oracle = app.add_subcommand("oracle-eval", "mIoU with ground-truth region labels");
  c_oracle->add_option("--masks", orc.masks, "Mask set JSON per image")->required();
  c_oracle->add_option("--labels", orc.labels, "RBLM label map per image")->required();

  IndexArgs ix;
  auto* c_index = app.add_subcommand("index", "Build an exact region-vector index");
  c_index->add_option("--vectors", ix.vectors, "RBRV files")->required();
  c_index->add_option("--out", ix.out, "RBIX output")->required();
  c_index->add_flag("--cosine", ix.cosine, "L2-normalise rows and queries");

  QueryArgs qa;
  auto* c_query = app.add_subcommand("query", "Rank images for query vectors");
  c_query->add_option("--index", qa.index, "RBIX index")->required();
  auto* o_qv = c_query->add_option("--query-vectors", qa.query_vectors, "RBRV queries");
  auto* o_qf = c_query->add_option("--features", qa.features, "RBRF grid of the query image");
  c_query->add_option("--masks", qa.mask_set, "Mask set holding the query mask")->needs(o_qf);
  c_query->add_option("--mask-id", qa.mask_id, "Query mask index");
  c_query->add_option("--top-k", qa.top_k, "Images to return (0 = all)");
  o_qv->excludes(o_qf);

  EvalRetrievalArgs er;
  auto* c_er = app.add_subcommand("eval-retrieval", "mAP and precision@k");
  auto* o_ix = c_er->add_option("--index", er.index, "RBIX index");
  auto* o_vx = c_er->add_option("--vectors", er.vectors, "RBRV database files");
  o_ix->excludes(o_vx);
  c_er->add_option("--queries", er.queries, "RBRV query vectors")->required();
  c_er->add_option("--relevance", er.relevance, "Relevance JSON")->required();
  c_er->add_option("--k", er.k, "Cut-off for precision@k");
  c_er->add_flag("--cosine", er.cosine, "Normalise when building from --vectors");

  SceneArgs sa;
  auto* c_scene = app.add_subcommand("assemble-scene", "Multi-view scene tokens");
  c_scene->add_option("--vectors", sa.vectors, "RBRV file per image")->required();
  c_scene->add_option("--masks", sa.masks, "Mask set JSON per image")->required();
  c_scene->add_option("--points", sa.points, "RBPM point map per image");
  c_scene->add_option("--dim-2d", sa.dim_2d, "2D embedding width (multiple of 4, 0 = off)");
  c_scene->add_option("--dim-3d", sa.dim_3d, "3D embedding width (multiple of 6, 0 = off)");
  c_scene->add_option("--merge", sa.merge, "concat | add");
  c_scene->add_option("--out", sa.out, "RBTB output")->required();

  VideoArgs va;
  auto* c_video = app.add_subcommand("assemble-video", "Padded video token batch");
  c_video->add_option("--vectors", va.vectors, "RBRV file per sampled frame")->required();
  c_video->add_option("--masks", va.masks, "Mask set JSON per frame (truncation priority)");
  c_video->add_option("--total-frames", va.total_frames, "Video length for frame indices");
  c_video->add_option("--pad-to", va.pad_to, "Token budget");
  c_video->add_option("--out", va.out, "RBTB output")->required();

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic fixture directory");
  c_synth->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  c_synth->add_option("--train", sy.train, "Training images");
  c_synth->add_option("--val", sy.val, "Validation images");
  c_synth->add_option("--size", sy.size, "Square image side");
  c_synth->add_option("--segments", sy.segments, "Segments per image");
  c_synth->add_option("--classes", sy.classes, "Class count");
  c_synth->add_option("--patch", sy.patch, "Feature patch size");
  c_synth->add_flag("--small-segment", sy.small_segment, "Plant a sub-patch segment");
  c_synth->add_flag("--retrieval", sy.retrieval, "Write a retrieval database instead");
  c_synth->add_option("--db-images", sy.db.num_images, "Retrieval database images");
  c_synth->add_option("--db-noise", sy.db.noise_std, "Retrieval noise std");

  BenchArgs be;
  auto* c_bench = app.add_subcommand("bench", "Region-source bench or pooling ablation");
  c_bench->add_flag("--pooling", be.pooling, "Run the four-cell pooling ablation");
  c_bench->add_option("--fixture", be.fixture, "Fixture directory for --pooling");
  c_bench->add_option("--train", be.train, "Generated training images");
  c_bench->add_option("--val", be.val, "Generated validation images");
  c_bench->add_flag("--table", be.table, "Print a text table (JSON goes to --report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_slic) run_slic(g, slic);
    else if (*c_aug) run_augment(g, aug);
    else if (*c_pool) run_pool(g, pool);
    else if (*c_prep) run_prep_labels(g, prep);
    else if (*c_train) run_train(g, tr);
    else if (*c_eval) run_eval_seg(g, ev);
    else if (*c_oracle) run_oracle(g, orc);
    else if (*c_index) run_index(g, ix);
    else if (*c_query) {
      if (qa.query_vectors.empty() && (qa.features.empty() || qa.mask_set.empty())) {
        throw UsageError("query needs --query-vectors or --features with --masks");
      }
      run_query(g, qa);
    } else if (*c_er) {
      if (er.index.empty() && er.vectors.empty()) {
        throw UsageError("eval-retrieval needs --index or --vectors");
      }
      run_eval_retrieval(g, er);
    } else if (*c_scene) run_assemble_scene(g, sa);
    else if (*c_video) run_assemble_video(g, va);
    else if (*c_synth) run_synth(g, sy);
    else if (*c_bench) run_bench(g, be);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const rbr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
