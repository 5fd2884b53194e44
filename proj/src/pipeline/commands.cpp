#include "motorseg/pipeline.hpp"

#include "motorseg/cloud_io.hpp"
#include "motorseg/json_io.hpp"
#include "motorseg/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace motorseg::pipeline {

using nlohmann::json;
using synthgen::Domain;

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void require_file(const fs::path& path, const std::string& hint) {
  if (!fs::is_regular_file(path)) throw IoError(path.string() + " not found; " + hint);
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

json generation_key(const PipelineConfig& cfg, Domain d) {
  return {{"profile", cfg.profile(d)}, {"scenes", cfg.scenes}, {"seed", cfg.seed}};
}

std::string cuboid_stem(int scene, int copy) {
  return synthgen::scene_stem(scene) + "_c" + std::to_string(copy);
}

struct PrepIndex {
  std::vector<std::string> train, test;  // cuboid stems
};

PrepIndex load_prep_index(const PipelineConfig& cfg, Domain d) {
  const auto path = cfg.paths.prep(d) / "index.json";
  require_file(path, "run `preprocess --domain " + synthgen::to_string(d) + "` first");
  const json j = read_json_file(path);
  try {
    return {j.at("train").get<std::vector<std::string>>(), j.at("test").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

std::vector<model::EvalCloud> load_test_clouds(const PipelineConfig& cfg, Domain d, const PrepIndex& idx,
                                               int jobs) {
  std::vector<model::EvalCloud> out(idx.test.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    auto pc = read_mpc(cfg.paths.prep(d) / "test" / (idx.test[i] + ".mpc"));
    out[i] = {std::move(pc.points), std::move(pc.labels)};
  });
  return out;
}

}  // namespace

// --- gen ---------------------------------------------------------------------------

Split make_split(int n, std::uint64_t seed) {
  if (n < 5) throw ValidationError("need at least 5 scenes to split, got " + std::to_string(n));
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  const auto n_train = static_cast<std::size_t>(std::lround(0.8 * n));
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Split load_split(const fs::path& path) {
  require_file(path, "run `gen` first");
  const json j = read_json_file(path);
  try {
    return {j.at("train").get<std::vector<int>>(), j.at("test").get<std::vector<int>>()};
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

GenSummary cmd_gen(const PipelineConfig& cfg, Domain domain, int jobs, bool reuse) {
  cfg.validate();
  GenSummary out;
  out.dir = cfg.paths.data(domain);
  const auto split_path = out.dir / "split.json";
  const json key = generation_key(cfg, domain);
  if (reuse && fs::is_regular_file(split_path)) {
    const json existing = read_json_file(split_path);
    if (existing.value("generation", json()) == key) {
      out.split = load_split(split_path);
      out.reused = true;
      return out;
    }
  }
  ensure_dir(out.dir);
  const auto profile = cfg.profile(domain);
  const auto n = static_cast<std::size_t>(cfg.scenes);
  out.scenes.resize(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    auto g = synthgen::generate_scene(static_cast<int>(i), cfg.seed, profile);
    const auto stem = synthgen::scene_stem(static_cast<int>(i));
    g.manifest.cloud_path = stem + ".mpc";
    write_mpc(g.cloud, out.dir / g.manifest.cloud_path);
    synthgen::save_manifest(g.manifest, out.dir / (stem + ".json"));
    out.scenes[i] = std::move(g.manifest);
  });
  out.split = make_split(cfg.scenes, mix_seed(cfg.seed ^ 0x5b117));
  write_json_file({{"train", out.split.train}, {"test", out.split.test}, {"generation", key}, {"config", cfg}},
                  split_path);

  RunManifest manifest(cfg.paths.run_dir);
  for (std::size_t i = 0; i < n; ++i) {
    const auto stem = synthgen::scene_stem(static_cast<int>(i));
    manifest.record(out.dir / (stem + ".mpc"), "gen");
    manifest.record(out.dir / (stem + ".json"), "gen");
  }
  manifest.record(split_path, "gen");
  manifest.save();
  return out;
}

// --- preprocess -----------------------------------------------------------------------

PrepSummary cmd_preprocess(const PipelineConfig& cfg, Domain domain, int jobs) {
  cfg.validate();
  const auto data = cfg.paths.data(domain);
  const Split split = load_split(data / "split.json");
  const auto dir = cfg.paths.prep(domain);
  std::error_code ec;
  fs::remove_all(dir, ec);
  ensure_dir(dir / "train");
  ensure_dir(dir / "test");

  struct Task {
    int scene;
    bool train;
  };
  std::vector<Task> tasks;
  for (int s : split.train) tasks.push_back({s, true});
  for (int s : split.test) tasks.push_back({s, false});
  const auto copies = static_cast<std::size_t>(cfg.aug_copies);

  // counts[t] = {cuboids, points}
  std::vector<std::pair<std::size_t, std::size_t>> counts(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t t) {
    const auto [scene, train] = tasks[t];
    const auto raw = read_mpc(data / (synthgen::scene_stem(scene) + ".mpc"));
    const auto mode = train ? preprocess::SplitMode::train : preprocess::SplitMode::test;
    for (std::size_t c = 0; c < (train ? copies : 1); ++c) {
      const auto seed = mix_seed(cfg.seed ^ mix_seed(static_cast<std::uint64_t>(scene) * 64 + c));
      const auto prep = preprocess::prepare_cuboid(raw, cfg.cuboid, cfg.aug, mode, seed);
      const auto stem = train ? cuboid_stem(scene, static_cast<int>(c)) : synthgen::scene_stem(scene);
      const auto sub = dir / (train ? "train" : "test");
      write_mpc(prep.augmented, sub / (stem + ".mpc"));
      write_json_file(json(prep.record), sub / (stem + ".json"));
      counts[t].first += 1;
      counts[t].second += prep.augmented.size();
    }
  });

  PrepSummary out;
  PrepIndex idx;
  RunManifest manifest(cfg.paths.run_dir);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto [scene, train] = tasks[t];
    (train ? out.train_cuboids : out.test_cuboids) += counts[t].first;
    (train ? out.train_points : out.test_points) += counts[t].second;
    for (std::size_t c = 0; c < counts[t].first; ++c) {
      const auto stem = train ? cuboid_stem(scene, static_cast<int>(c)) : synthgen::scene_stem(scene);
      (train ? idx.train : idx.test).push_back(stem);
      const auto sub = dir / (train ? "train" : "test");
      manifest.record(sub / (stem + ".mpc"), "preprocess");
      manifest.record(sub / (stem + ".json"), "preprocess");
    }
  }
  write_json_file({{"domain", synthgen::to_string(domain)}, {"train", idx.train}, {"test", idx.test}, {"config", cfg}},
                  dir / "index.json");
  manifest.record(dir / "index.json", "preprocess");
  manifest.save();
  return out;
}

// --- train ----------------------------------------------------------------------------

TrainSummary cmd_train(const PipelineConfig& cfg, const TrainRequest& req, const model::EpochCallback& on_epoch) {
  cfg.validate();
  const bool finetune = req.stage == model::Stage::finetune;
  if (finetune && !req.init && !req.scratch)
    throw UsageError("finetune needs --init <checkpoint> (or --scratch to train from a fresh initialisation)");
  if (req.init && req.scratch) throw UsageError("--init and --scratch are mutually exclusive");

  TrainSummary out;
  out.domain = req.domain.value_or(finetune ? Domain::pseudo_real : Domain::sim);
  std::string name = req.name;
  if (name.empty()) name = model::to_string(req.stage) + (req.scratch ? "_scratch" : "");

  std::optional<model::Checkpoint> init;
  if (req.init) init = model::load_checkpoint(*req.init);

  model::TrainConfig tcfg = cfg.stage(req.stage);
  tcfg.seed = mix_seed(cfg.seed ^ mix_seed(tcfg.seed));
  const auto& mcfg = cfg.model;

  const PrepIndex idx = load_prep_index(cfg, out.domain);
  const auto prep = cfg.paths.prep(out.domain);
  std::vector<model::Sample> samples;
  for (std::size_t f = 0; f < idx.train.size(); ++f) {
    const auto cuboid = read_mpc(prep / "train" / (idx.train[f] + ".mpc"));
    const json rec_j = read_json_file(prep / "train" / (idx.train[f] + ".json"));
    preprocess::PreprocessRecord rec;
    try {
      rec = rec_j.get<preprocess::PreprocessRecord>();
    } catch (const json::exception& e) {
      throw ParseError((prep / "train" / (idx.train[f] + ".json")).string() + ": " + e.what(), 0);
    }
    const auto file_seed = mix_seed(tcfg.seed ^ mix_seed(f + 1));
    auto split = preprocess::split_subclouds(cuboid, mcfg.S, preprocess::SplitMode::train, file_seed,
                                             rec.rotation_gt, mcfg.normalize);
    std::size_t take = split.subclouds.size();
    if (cfg.max_subclouds > 0) take = std::min(take, cfg.max_subclouds);
    for (std::size_t s = 0; s < take; ++s) {
      auto& sc = split.subclouds[s];
      samples.push_back(model::make_sample(std::move(sc.points), std::move(sc.labels), sc.rotation_gt, mcfg,
                                           mix_seed(file_seed + s)));
    }
  }
  if (samples.empty())
    throw ValidationError("no training sub-clouds: every cuboid has fewer than S=" + std::to_string(mcfg.S) +
                          " points");
  out.samples = samples.size();
  const auto val = load_test_clouds(cfg, out.domain, idx, 1);

  out.result = model::train(samples, val, tcfg, mcfg, init ? &init->params : nullptr, on_epoch);

  ensure_dir(cfg.paths.checkpoints());
  ensure_dir(cfg.paths.reports());
  model::Checkpoint ck;
  ck.config = mcfg;
  ck.params = out.result.best;
  json history = json::array();
  for (const auto& r : out.result.history)
    history.push_back({{"epoch", r.epoch},
                       {"lr", r.lr},
                       {"loss_total", r.loss.total},
                       {"val_miou", r.val_miou},
                       {"val_screw_iou", r.val_screw_iou}});
  ck.meta = {{"stage", model::to_string(req.stage)},
             {"domain", synthgen::to_string(out.domain)},
             {"init", req.init ? json(req.init->generic_string()) : json(nullptr)},
             {"best_epoch", out.result.best_epoch},
             {"diverged", out.result.diverged},
             {"samples", samples.size()},
             {"history", history},
             {"config", cfg}};
  out.checkpoint = cfg.paths.checkpoints() / (name + ".msck");
  out.history = cfg.paths.reports() / (name + "_history.csv");
  model::save_checkpoint(ck, out.checkpoint);
  write_text(model::history_csv(out.result.history), out.history);

  RunManifest manifest(cfg.paths.run_dir);
  manifest.record(out.checkpoint, name);
  manifest.record(out.history, name);
  manifest.save();
  return out;
}

// --- eval -----------------------------------------------------------------------------

EvalSummary cmd_eval(const PipelineConfig& cfg, const std::optional<fs::path>& checkpoint, Domain domain, int jobs) {
  cfg.validate();
  model::Checkpoint ck;
  std::string label = "untrained";
  if (checkpoint) {
    ck = model::load_checkpoint(*checkpoint);
    label = checkpoint->stem().string();
  } else {
    ck.config = cfg.model;
    ck.params = model::init_params(cfg.model, mix_seed(cfg.seed ^ 0x1417));
  }
  const PrepIndex idx = load_prep_index(cfg, domain);
  const auto clouds = load_test_clouds(cfg, domain, idx, jobs);
  const model::Network net(ck.config);
  const std::uint64_t seed = mix_seed(cfg.seed ^ 0xe7a1);
  std::vector<std::vector<std::uint8_t>> preds(clouds.size());
  parallel_for(clouds.size(), jobs,
               [&](std::size_t i) { preds[i] = model::predict(net, ck.params, clouds[i].points, mix_seed(seed + i)); });

  EvalSummary out{metrics::ConfusionMatrix(ck.config.num_categories), {}, {}};
  for (std::size_t i = 0; i < clouds.size(); ++i) out.confusion.accumulate(clouds[i].labels, preds[i]);
  out.iou = metrics::iou(out.confusion);

  ensure_dir(cfg.paths.reports());
  out.report = cfg.paths.reports() / ("eval_" + synthgen::to_string(domain) + "_" + label + ".json");
  write_json_file({{"domain", synthgen::to_string(domain)},
                   {"checkpoint", checkpoint ? json(checkpoint->generic_string()) : json(nullptr)},
                   {"clouds", clouds.size()},
                   {"metrics", metrics::to_json(out.confusion, out.iou)},
                   {"config", cfg}},
                  out.report);
  RunManifest manifest(cfg.paths.run_dir);
  manifest.record(out.report, "eval");
  manifest.save();
  return out;
}

// --- screws ---------------------------------------------------------------------------

ScrewsSummary cmd_screws(const PipelineConfig& cfg, const ScrewsRequest& req) {
  cfg.validate();
  if (!req.oracle_labels && !req.checkpoint)
    throw UsageError("screws needs --checkpoint <file> or --oracle-labels");
  const PointCloud raw = read_mpc(req.cloud);

  std::optional<synthgen::SceneManifest> manifest;
  fs::path manifest_path = req.manifest.value_or(fs::path(req.cloud).replace_extension(".json"));
  if (req.manifest || fs::is_regular_file(manifest_path)) manifest = synthgen::load_manifest(manifest_path);

  const auto crop = preprocess::crop_cuboid(raw, cfg.cuboid, mix_seed(cfg.seed ^ 0xa2));
  PointCloud labelled;
  labelled.points = crop.cuboid.points;
  if (req.oracle_labels) {
    labelled.labels = crop.cuboid.labels;
  } else {
    const auto ck = model::load_checkpoint(*req.checkpoint);
    const model::Network net(ck.config);
    labelled.labels = model::predict(net, ck.params, labelled.points, mix_seed(cfg.seed ^ 0xe7a1));
  }

  auto orient = cfg.orient;
  if (manifest) orient.viewpoint = manifest->scene.camera_position();
  ScrewsSummary out;
  out.report = postprocess::build_report(labelled, cfg.locate, orient);
  if (manifest) out.evaluation = postprocess::evaluate_report(out.report, *manifest);

  const bool empty = out.report.status != postprocess::Status::ok;
  out.document = {{"status", empty ? "error" : "ok"},
                  {"error", empty ? json(postprocess::to_string(out.report.status)) : json(nullptr)},
                  {"cloud", req.cloud.generic_string()},
                  {"labels", req.oracle_labels ? json("oracle") : json(req.checkpoint->generic_string())},
                  {"cuboid_points", labelled.size()},
                  {"report", out.report},
                  {"evaluation", out.evaluation ? json(*out.evaluation) : json(nullptr)},
                  {"config", cfg}};
  if (req.out) {
    out.path = *req.out;
    if (out.path.has_parent_path()) ensure_dir(out.path.parent_path());
  } else {
    ensure_dir(cfg.paths.reports());
    out.path = cfg.paths.reports() / ("screws_" + req.cloud.stem().string() + ".json");
  }
  write_json_file(out.document, out.path);
  RunManifest rm(cfg.paths.run_dir);
  rm.record(out.path, "screws");
  rm.save();
  return out;
}

}  // namespace motorseg::pipeline
