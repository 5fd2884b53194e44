#include "motorseg/pipeline.hpp"

#include "motorseg/json_io.hpp"

#include <fstream>
#include <set>

namespace motorseg::pipeline {

using nlohmann::json;
using synthgen::Domain;

void PipelineConfig::validate() const {
  if (paths.run_dir.empty()) throw ValidationError("paths.run_dir must not be empty");
  if (scenes < 5) throw ValidationError("need at least 5 scenes per domain, got " + std::to_string(scenes));
  if (aug_copies < 1) throw ValidationError("aug_copies must be >= 1");
  if (sim.domain != Domain::sim) throw ValidationError("the sim profile must have domain sim");
  if (pseudo_real.domain != Domain::pseudo_real)
    throw ValidationError("the pseudo_real profile must have domain pseudo_real");
  if (!(sim.sample_density > 0.0) || !(pseudo_real.sample_density > 0.0))
    throw ValidationError("sample densities must be > 0");
  cuboid.validate();
  aug.validate();
  model.validate();
  pretrain.validate();
  finetune.validate();
  if (pretrain.stage != model::Stage::pretrain || finetune.stage != model::Stage::finetune)
    throw ValidationError("the pretrain and finetune sections must carry their own stage");
  if (!(locate.eps > 0.0) || locate.min_pts < 1) throw ValidationError("locate needs eps > 0 and min_pts >= 1");
  if (!(orient.eps_n > 0.0) || orient.min_pts_n < 1 || orient.normal_k < 3)
    throw ValidationError("orient needs eps_n > 0, min_pts_n >= 1 and normal_k >= 3");
}

synthgen::GenerationProfile PipelineConfig::profile(Domain d) const {
  if (d == Domain::pseudo_real) return pseudo_real;
  auto p = sim;
  p.pose.enabled = p.pose.enabled && aug.aug3;
  p.tiles.enabled = p.tiles.enabled && aug.aug4;
  return p;
}

PipelineConfig PipelineConfig::smoke() {
  PipelineConfig c;
  c.paths.run_dir = "run";
  c.scenes = 100;
  c.max_subclouds = 1;
  c.sim.sample_density = 1.2e5;
  c.pseudo_real.sample_density = 1.2e5;
  c.aug.yaw_lo_deg = -30.0;
  c.aug.yaw_hi_deg = 30.0;
  // STN with pre-training, no loss weighting or patch branch. Focused
  // sampling stays on: without it screws are not learned at this budget.
  c.model = model::ModelConfig::small();
  c.model.S = 1024;
  c.model.class_weights = false;
  c.model.patch_branch = false;
  c.model.focused_sampling = true;
  c.pretrain.epochs = 16;
  c.pretrain.batch_size = 1;
  c.pretrain.lr_initial = 0.05;
  c.pretrain.lr_final = 1e-4;
  c.pretrain.grad_clip = 1.0;
  c.finetune.epochs = 14;
  c.finetune.batch_size = 1;
  c.finetune.lr_initial = 0.02;
  c.finetune.lr_final = 1e-4;
  c.finetune.grad_clip = 1.0;
  return c;
}

void to_json(json& j, const PipelineConfig& c) {
  j = {{"seed", c.seed},
       {"paths", {{"run_dir", c.paths.run_dir.generic_string()}, {"data_dir", c.paths.data_dir.generic_string()}}},
       {"scenes", c.scenes},
       {"aug_copies", c.aug_copies},
       {"max_subclouds", c.max_subclouds},
       {"sim", c.sim},
       {"pseudo_real", c.pseudo_real},
       {"cuboid", c.cuboid},
       {"aug", c.aug},
       {"model", c.model},
       {"pretrain", c.pretrain},
       {"finetune", c.finetune},
       {"locate", c.locate},
       {"orient", c.orient}};
}

namespace {

const std::set<std::string> kTopKeys{"seed",    "paths", "scenes", "aug_copies", "max_subclouds",
                                     "sim",     "pseudo_real", "cuboid", "aug", "model",
                                     "pretrain", "finetune", "locate", "orient"};

model::TrainConfig read_stage(const json& j, model::Stage stage) {
  json s = j;
  if (!s.contains("stage")) s["stage"] = model::to_string(stage);
  auto t = s.get<model::TrainConfig>();
  if (t.stage != stage) throw ValidationError("section '" + model::to_string(stage) + "' has a different stage");
  return t;
}

synthgen::GenerationProfile read_profile(const json& j, Domain d) {
  json s = j;
  if (!s.contains("domain")) s["domain"] = synthgen::to_string(d);
  return s.get<synthgen::GenerationProfile>();
}

}  // namespace

void from_json(const json& j, PipelineConfig& c) {
  if (!j.is_object()) throw ValidationError("pipeline config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kTopKeys.count(key)) throw UsageError("unknown config key '" + key + "'");
  c = PipelineConfig{};
  c.seed = j.value("seed", c.seed);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    c.paths.run_dir = p.value("run_dir", c.paths.run_dir.generic_string());
    c.paths.data_dir = p.value("data_dir", c.paths.data_dir.generic_string());
  }
  c.scenes = j.value("scenes", c.scenes);
  c.aug_copies = j.value("aug_copies", c.aug_copies);
  c.max_subclouds = j.value("max_subclouds", c.max_subclouds);
  if (j.contains("sim")) c.sim = read_profile(j.at("sim"), Domain::sim);
  if (j.contains("pseudo_real")) c.pseudo_real = read_profile(j.at("pseudo_real"), Domain::pseudo_real);
  if (j.contains("cuboid")) c.cuboid = j.at("cuboid").get<preprocess::CuboidConfig>();
  if (j.contains("aug")) c.aug = j.at("aug").get<preprocess::AugConfig>();
  if (j.contains("model")) c.model = j.at("model").get<model::ModelConfig>();
  if (j.contains("pretrain")) c.pretrain = read_stage(j.at("pretrain"), model::Stage::pretrain);
  if (j.contains("finetune")) c.finetune = read_stage(j.at("finetune"), model::Stage::finetune);
  if (j.contains("locate")) c.locate = j.at("locate").get<postprocess::LocateParams>();
  if (j.contains("orient")) c.orient = j.at("orient").get<postprocess::OrientationParams>();
}

PipelineConfig load_config(const fs::path& path) {
  const json j = read_json_file(path);
  try {
    auto c = j.get<PipelineConfig>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void save_config(const PipelineConfig& c, const fs::path& path) { write_json_file(json(c), path); }

void apply_override(PipelineConfig& c, const std::string& key, const std::string& value) {
  if (key.empty()) throw UsageError("empty override key");
  std::string pointer = "/" + key;
  for (auto& ch : pointer)
    if (ch == '.') ch = '/';
  json j = c;
  json::json_pointer ptr;
  try {
    ptr = json::json_pointer(pointer);
  } catch (const json::exception&) {
    throw UsageError("bad override key '" + key + "'");
  }
  if (!j.contains(ptr)) throw UsageError("unknown config key '" + key + "'");
  json v = json::parse(value, nullptr, false);
  if (v.is_discarded()) v = value;
  j[ptr] = v;
  try {
    c = j.get<PipelineConfig>();
  } catch (const json::exception& e) {
    throw UsageError("cannot set '" + key + "' to " + value + ": " + e.what());
  }
}

// --- run manifest -------------------------------------------------------------

std::uint64_t fnv1a64_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for hashing");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  if (f.bad()) throw IoError("read failed for " + path.string());
  return h;
}

RunManifest::RunManifest(fs::path run_dir) : run_dir_(std::move(run_dir)) {
  const auto path = run_dir_ / "manifest.json";
  if (fs::exists(path)) {
    const json j = read_json_file(path);
    if (j.contains("files") && j.at("files").is_object()) entries_ = j.at("files");
  }
}

void RunManifest::record(const fs::path& file, const std::string& command) {
  std::error_code ec;
  const auto bytes = fs::file_size(file, ec);
  if (ec) throw IoError("cannot stat " + file.string());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64_file(file)));
  const auto rel = file.lexically_relative(run_dir_).generic_string();
  entries_[rel.empty() ? file.generic_string() : rel] = {{"bytes", bytes}, {"fnv1a64", hex}, {"command", command}};
}

void RunManifest::save() const {
  fs::create_directories(run_dir_);
  write_json_file({{"files", entries_}}, run_dir_ / "manifest.json");
}

}  // namespace motorseg::pipeline
