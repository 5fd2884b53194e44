#pragma once

// End-to-end orchestration behind the `motorseg` command line tool: dataset
// generation, pre-processing, the two training stages, evaluation, screw
// extraction and ablation matrices. Every output lands under a run directory
// whose manifest.json lists the produced files.

#include "motorseg/metrics.hpp"
#include "motorseg/model.hpp"
#include "motorseg/postprocess.hpp"
#include "motorseg/preprocess.hpp"
#include "motorseg/synthgen.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace motorseg::pipeline {

namespace fs = std::filesystem;

/// Bad invocation: missing or conflicting options, invalid matrix specs.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Paths {
  fs::path run_dir = "run";
  /// Generated datasets; empty means <run_dir>/data.
  fs::path data_dir;

  fs::path data() const { return data_dir.empty() ? run_dir / "data" : data_dir; }
  fs::path data(synthgen::Domain d) const { return data() / synthgen::to_string(d); }
  fs::path prep(synthgen::Domain d) const { return run_dir / "prep" / synthgen::to_string(d); }
  fs::path checkpoints() const { return run_dir / "checkpoints"; }
  fs::path reports() const { return run_dir / "reports"; }
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  Paths paths;
  int scenes = 1000;  ///< per domain, split 80/20
  int aug_copies = 1;  ///< augmented cuboids per training scene
  std::size_t max_subclouds = 0;  ///< per training cuboid; 0 keeps every chunk
  synthgen::GenerationProfile sim = synthgen::GenerationProfile::defaults(synthgen::Domain::sim);
  synthgen::GenerationProfile pseudo_real = synthgen::GenerationProfile::defaults(synthgen::Domain::pseudo_real);
  preprocess::CuboidConfig cuboid;
  preprocess::AugConfig aug;
  model::ModelConfig model;
  model::TrainConfig pretrain = model::TrainConfig::pretrain();
  model::TrainConfig finetune = model::TrainConfig::finetune();
  postprocess::LocateParams locate;
  postprocess::OrientationParams orient{.viewpoint = Vec3(0.0, 0.0, 1.0)};

  void validate() const;

  /// Generation profile with the generation-time augmentations (aug3 pose
  /// jitter, aug4 tiles) applied. They only affect the sim domain.
  synthgen::GenerationProfile profile(synthgen::Domain d) const;
  const model::TrainConfig& stage(model::Stage s) const {
    return s == model::Stage::pretrain ? pretrain : finetune;
  }

  /// 20 training scenes per domain, S=1024, at most 10 epochs per stage and
  /// a reduced sampling density.
  static PipelineConfig smoke();
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Missing keys keep the default-constructed values.
void from_json(const nlohmann::json& j, PipelineConfig& c);

PipelineConfig load_config(const fs::path& path);
void save_config(const PipelineConfig& c, const fs::path& path);

/// Sets `key` (dotted path such as "model.S" or "pretrain.epochs") to `value`,
/// parsed as JSON when possible and as a string otherwise. Throws UsageError
/// for unknown keys.
void apply_override(PipelineConfig& c, const std::string& key, const std::string& value);

// --- run directory ------------------------------------------------------------

/// manifest.json in the run directory: one entry per produced file with its
/// size and FNV-1a 64-bit content hash, keyed by path relative to the run dir.
class RunManifest {
 public:
  explicit RunManifest(fs::path run_dir);
  void record(const fs::path& file, const std::string& command);
  void save() const;
  const nlohmann::json& entries() const { return entries_; }

 private:
  fs::path run_dir_;
  nlohmann::json entries_ = nlohmann::json::object();
};

std::uint64_t fnv1a64_file(const fs::path& path);

// --- commands -------------------------------------------------------------------

struct Split {
  std::vector<int> train, test;
};

/// Seeded shuffle of 0..n-1; the first round(0.8 n) ids train.
Split make_split(int n, std::uint64_t seed);
Split load_split(const fs::path& path);

struct GenSummary {
  Split split;
  std::vector<synthgen::SceneManifest> scenes;
  fs::path dir;
  bool reused = false;  ///< identical dataset already present
};

/// Generates cfg.scenes scenes of one domain and split.json. With `reuse`,
/// an existing dataset generated from the same profile, count and seed is
/// kept as is.
GenSummary cmd_gen(const PipelineConfig& cfg, synthgen::Domain domain, int jobs, bool reuse = false);

struct PrepSummary {
  std::size_t train_cuboids = 0, test_cuboids = 0;
  std::size_t train_points = 0, test_points = 0;
};

/// Crops every scene; training scenes get aug_copies augmented cuboids.
PrepSummary cmd_preprocess(const PipelineConfig& cfg, synthgen::Domain domain, int jobs);

struct TrainRequest {
  model::Stage stage = model::Stage::pretrain;
  std::optional<fs::path> init;
  /// Fine-tuning without --init needs this explicit opt-in.
  bool scratch = false;
  /// Defaults to sim for pretraining and pseudo_real for fine-tuning.
  std::optional<synthgen::Domain> domain;
  /// Output stem; defaults to the stage name (plus "_scratch").
  std::string name;
};

struct TrainSummary {
  model::TrainResult result;
  fs::path checkpoint, history;
  synthgen::Domain domain = synthgen::Domain::sim;
  std::size_t samples = 0;
};

TrainSummary cmd_train(const PipelineConfig& cfg, const TrainRequest& req,
                       const model::EpochCallback& on_epoch = {});

struct EvalSummary {
  metrics::ConfusionMatrix confusion;
  metrics::IouResult iou;
  fs::path report;
};

/// Predicts every test cuboid of `domain`. A missing checkpoint evaluates an
/// untrained network initialised from cfg.seed.
EvalSummary cmd_eval(const PipelineConfig& cfg, const std::optional<fs::path>& checkpoint, synthgen::Domain domain,
                     int jobs);

struct ScrewsRequest {
  fs::path cloud;
  std::optional<fs::path> checkpoint;
  bool oracle_labels = false;
  /// Scene manifest for evaluation; defaults to <cloud stem>.json beside the cloud.
  std::optional<fs::path> manifest;
  std::optional<fs::path> out;
};

struct ScrewsSummary {
  postprocess::ScrewReport report;
  std::optional<postprocess::ReportEvaluation> evaluation;
  nlohmann::json document;
  fs::path path;
};

/// crop -> predict (or oracle labels) -> locate -> orient -> evaluate.
ScrewsSummary cmd_screws(const PipelineConfig& cfg, const ScrewsRequest& req);

// --- ablation --------------------------------------------------------------------

struct ToggleColumn {
  std::string key;     ///< stn, pretrain, aug1..aug4, sample_region_restriction,
                       ///< focused_sampling, weighting_loss, patch_attention
  std::string header;  ///< printed column title
};

struct AblationRow {
  std::string name;  ///< optional leading label ("dataset1")
  std::map<std::string, bool> toggles;
};

struct AblationMatrix {
  std::string title;
  std::string name_header;  ///< title of the label column when rows are named
  std::vector<ToggleColumn> columns;
  std::vector<AblationRow> rows;

  /// Throws UsageError on unknown keys, rows missing a column, or duplicate rows.
  void validate() const;
};

AblationMatrix parse_matrix(const nlohmann::json& j);
AblationMatrix load_matrix(const fs::path& path);

/// Row toggles applied to a base configuration.
PipelineConfig apply_toggles(PipelineConfig cfg, const std::map<std::string, bool>& toggles);
bool runs_pretrain(const std::map<std::string, bool>& toggles);

struct RowMetrics {
  std::optional<double> sim_miou, sim_screw_iou;  ///< absent without pretraining
  double real_miou = 0, real_screw_iou = 0;
};

inline const std::vector<std::string> kMetricHeaders{"sim mIoU", "sim screw IoU", "pseudo-real mIoU",
                                                     "pseudo-real screw IoU"};

struct AblationTable {
  AblationMatrix matrix;
  std::vector<RowMetrics> metrics;

  std::vector<std::string> header() const;
  /// Toggles as "x"/"-", metrics with 4 decimals, "-" when absent.
  std::vector<std::vector<std::string>> cells() const;
  std::string markdown() const;
  std::string csv() const;
  nlohmann::json to_json() const;
};

/// One full smoke run per row: generate (shared across rows with the same
/// data), pre-process, pretrain on sim and evaluate on sim test when the row
/// pretrains, fine-tune on pseudo_real (from the pretrained weights or from
/// scratch) and evaluate on pseudo_real test.
AblationTable cmd_ablate(const PipelineConfig& cfg, const AblationMatrix& matrix, int jobs,
                         const std::function<void(std::size_t, const RowMetrics&)>& on_row = {});

/// Runs fn(0..n-1) on up to `jobs` threads; rethrows the lowest-index failure.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace motorseg::pipeline
