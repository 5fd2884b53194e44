// motorseg: command line front end for the segmentation pipeline.
//
// Exit codes: 0 success, 2 usage, 3 empty result, 4 I/O or parse failure.

#include "motorseg/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <thread>

namespace {

using namespace motorseg;
using namespace motorseg::pipeline;

constexpr int kExitUsage = 2;
constexpr int kExitEmpty = 3;
constexpr int kExitIo = 4;

struct Options {
  std::string config_path;
  std::string profile = "smoke";
  std::string run_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  int jobs = 1;
  bool print_config = false;

  std::string domain = "both";
  std::optional<int> scenes;

  std::string stage = "pretrain";
  std::string init;
  bool scratch = false;
  std::string train_domain;
  std::string name;

  std::string checkpoint;
  std::string eval_domain = "pseudo_real";

  std::string cloud;
  bool oracle = false;
  std::string manifest;
  std::string out;

  std::string matrix;
};

PipelineConfig resolve_config(const Options& o) {
  PipelineConfig cfg;
  if (!o.config_path.empty()) {
    cfg = load_config(o.config_path);
  } else if (o.profile == "smoke") {
    cfg = PipelineConfig::smoke();
  } else if (o.profile != "full") {
    throw UsageError("unknown profile '" + o.profile + "' (expected smoke or full)");
  }
  if (!o.run_dir.empty()) cfg.paths.run_dir = o.run_dir;
  if (o.seed) cfg.seed = *o.seed;
  if (o.scenes) cfg.scenes = *o.scenes;
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::vector<synthgen::Domain> domains(const std::string& s) {
  if (s == "both") return {synthgen::Domain::sim, synthgen::Domain::pseudo_real};
  try {
    return {synthgen::parse_domain(s)};
  } catch (const ValidationError&) {
    throw UsageError("unknown domain '" + s + "' (expected sim, pseudo_real or both)");
  }
}

void echo_config(const PipelineConfig& cfg) {
  std::filesystem::create_directories(cfg.paths.run_dir);
  const auto path = cfg.paths.run_dir / "config.json";
  save_config(cfg, path);
  RunManifest m(cfg.paths.run_dir);
  m.record(path, "config");
  m.save();
}

void print_epoch(const model::EpochRecord& r) {
  std::printf("epoch %3d  lr %.2e  loss %.5f  acc %.4f  val mIoU %.4f  val screw IoU %.4f\n", r.epoch, r.lr,
              r.loss.total, r.train_accuracy, r.val_miou, r.val_screw_iou);
  std::fflush(stdout);
}

int run_train(const PipelineConfig& cfg, const Options& o, model::Stage stage) {
  TrainRequest req;
  req.stage = stage;
  if (!o.init.empty()) req.init = o.init;
  req.scratch = o.scratch;
  if (!o.train_domain.empty()) req.domain = synthgen::parse_domain(o.train_domain);
  req.name = o.name;
  const auto s = cmd_train(cfg, req, print_epoch);
  std::printf("%s: %zu samples, best epoch %d%s\ncheckpoint %s\nhistory %s\n", model::to_string(stage).c_str(),
              s.samples, s.result.best_epoch, s.result.diverged ? " (diverged, stopped early)" : "",
              s.checkpoint.string().c_str(), s.history.string().c_str());
  return 0;
}

int dispatch(CLI::App& app, const Options& o) {
  if (app.get_subcommands().empty()) throw UsageError("missing subcommand; see --help");
  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const PipelineConfig cfg = resolve_config(o);
  if (o.print_config) std::cout << nlohmann::json(cfg).dump(2) << '\n';
  const int jobs = o.jobs > 0 ? o.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  if (name == "finetune" && o.init.empty() && !o.scratch)
    throw UsageError("finetune needs --init <checkpoint> (or --scratch)");
  echo_config(cfg);

  if (name == "gen") {
    for (auto d : domains(o.domain)) {
      const auto g = cmd_gen(cfg, d, jobs);
      std::printf("%s: %d scenes in %s, split %zu/%zu\n", synthgen::to_string(d).c_str(), cfg.scenes,
                  g.dir.string().c_str(), g.split.train.size(), g.split.test.size());
    }
    return 0;
  }
  if (name == "preprocess") {
    for (auto d : domains(o.domain)) {
      const auto p = cmd_preprocess(cfg, d, jobs);
      std::printf("%s: %zu training cuboids (%zu points), %zu test cuboids (%zu points)\n",
                  synthgen::to_string(d).c_str(), p.train_cuboids, p.train_points, p.test_cuboids, p.test_points);
    }
    return 0;
  }
  if (name == "train") return run_train(cfg, o, model::parse_stage(o.stage));
  if (name == "finetune") return run_train(cfg, o, model::Stage::finetune);
  if (name == "eval") {
    std::optional<std::filesystem::path> ck;
    if (!o.checkpoint.empty()) ck = o.checkpoint;
    for (auto d : domains(o.eval_domain)) {
      const auto e = cmd_eval(cfg, ck, d, jobs);
      std::printf("%s: mIoU %.4f  screw IoU %.4f  (%s)\n", synthgen::to_string(d).c_str(), e.iou.miou,
                  e.iou.screw_iou, e.report.string().c_str());
    }
    return 0;
  }
  if (name == "screws") {
    ScrewsRequest req;
    req.cloud = o.cloud;
    if (!o.checkpoint.empty()) req.checkpoint = o.checkpoint;
    req.oracle_labels = o.oracle;
    if (!o.manifest.empty()) req.manifest = o.manifest;
    if (!o.out.empty()) req.out = o.out;
    const auto s = cmd_screws(cfg, req);
    std::cout << s.document.dump(2) << '\n';
    return s.report.status == postprocess::Status::ok ? 0 : kExitEmpty;
  }
  if (name == "ablate") {
    const auto matrix = load_matrix(o.matrix);
    const auto t = cmd_ablate(cfg, matrix, jobs, [&](std::size_t r, const RowMetrics& m) {
      std::printf("row %zu/%zu done: pseudo-real mIoU %.4f, screw IoU %.4f\n", r + 1, matrix.rows.size(),
                  m.real_miou, m.real_screw_iou);
      std::fflush(stdout);
    });
    std::cout << t.markdown();
    return 0;
  }
  throw UsageError("unknown subcommand " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-to-real point cloud segmentation pipeline for motor disassembly"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("-c,--config", o.config_path, "Pipeline config JSON")->envname("MOTORSEG_CONFIG");
  app.add_option("--profile", o.profile, "Base config without --config: smoke or full")->capture_default_str();
  app.add_option("--run-dir", o.run_dir, "Run directory (overrides paths.run_dir)");
  app.add_option("--seed", o.seed, "Global seed");
  app.add_option("--set", o.overrides, "Override a config key, e.g. --set model.S=512 (repeatable)");
  app.add_option("-j,--jobs", o.jobs, "Scene-level worker threads for gen/preprocess/eval (0 = all cores)")
      ->capture_default_str();
  app.add_flag("--print-config", o.print_config, "Print the resolved config before running");

  auto* gen = app.add_subcommand("gen", "Generate scenes and the 80/20 split");
  gen->add_option("--domain", o.domain, "sim, pseudo_real or both")->capture_default_str();
  gen->add_option("-n,--scenes", o.scenes, "Scenes per domain (>= 5)");

  auto* prep = app.add_subcommand("preprocess", "Crop cuboids and apply pre-processing augmentations");
  prep->add_option("--domain", o.domain, "sim, pseudo_real or both")->capture_default_str();

  auto add_train_opts = [&](CLI::App* s) {
    s->add_option("--init", o.init, "Initial checkpoint");
    s->add_flag("--scratch", o.scratch, "Fine-tune from a fresh initialisation");
    s->add_option("--domain", o.train_domain, "Training domain (default: sim for pretrain, pseudo_real for finetune)");
    s->add_option("--name", o.name, "Output stem for the checkpoint and history");
  };
  auto* train = app.add_subcommand("train", "Train one stage");
  train->add_option("--stage", o.stage, "pretrain or finetune")->capture_default_str();
  add_train_opts(train);
  auto* finetune = app.add_subcommand("finetune", "Fine-tune on pseudo_real from --init");
  add_train_opts(finetune);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint (default: untrained initialisation)");
  eval->add_option("--domain", o.eval_domain, "sim, pseudo_real or both")->capture_default_str();

  auto* screws = app.add_subcommand("screws", "Locate screws and the unscrewing direction in one cloud");
  screws->add_option("cloud", o.cloud, "MPC1 point cloud")->required();
  screws->add_option("--checkpoint", o.checkpoint, "Segmentation checkpoint");
  screws->add_flag("--oracle-labels", o.oracle, "Use the labels stored in the cloud instead of a network");
  screws->add_option("--manifest", o.manifest, "Scene manifest for evaluation (default: <cloud>.json)");
  screws->add_option("-o,--out", o.out, "Report path (default: <run>/reports/screws_<stem>.json)");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation matrix and print the summary table");
  ablate->add_option("matrix", o.matrix, "Matrix spec JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  try {
    return dispatch(app, o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
