// Runs the ten acceptance criteria and prints one PASS/FAIL line each.
//
//   acceptance            all criteria
//   acceptance 1 5 10     a subset
//
// Exit status is 0 only when every selected criterion passes.

#include "motorseg/core.hpp"
#include "motorseg/imbalance.hpp"
#include "motorseg/model.hpp"
#include "motorseg/pipeline.hpp"
#include "motorseg/postprocess.hpp"
#include "motorseg/preprocess.hpp"
#include "motorseg/random.hpp"
#include "motorseg/synthgen.hpp"

#include "../support/gradcheck.hpp"
#include "../support/micro.hpp"
#include "../support/oracles.hpp"
#include "../support/weights_oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

using namespace motorseg;
using nlohmann::json;

namespace {

/// Collects failed conditions and a short summary line.
class Verdict {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    failed_ |= !ok;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  bool passed() const { return !failed_; }
  std::string text() const {
    std::string s = notes_;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + std::string("FAILED ") + f;
    return s;
  }

 private:
  bool failed_ = false;
  std::vector<std::string> failures_;
  std::string notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. Class weights against the quad-precision oracle.
void class_weight_oracle(Verdict& v) {
  Rng rng(101);
  double worst = 0;
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<std::size_t> counts(6);
    for (auto& c : counts) c = static_cast<std::size_t>(rng.uniform_int(1, 2000000));
    if (trial % 5 == 4) counts[rng.index(6)] = 0;
    const auto w = imbalance::class_weights(counts);
    const auto q = oracle::quad_class_weights(counts);
    for (std::size_t i = 0; i < 6; ++i) {
      if (counts[i] == 0) {
        v.require(w.weight[i] == 0.0, "absent class has zero weight");
        continue;
      }
      worst = std::max({worst, oracle::rel_error(w.weight[i], q.weight[i]),
                        oracle::rel_error(w.scaled_ratio[i], q.scaled_ratio[i])});
    }
    worst = std::max(worst, oracle::rel_error(w.factor, q.factor));
  }
  v.require(worst < 1e-12, "relative error " + fmt("%.3g", worst));
  v.note("25 distributions, max rel error " + fmt("%.2e", worst));
}

// 2. Focused sampling on random sub-clouds, every added point checked
// against a brute-force nearest-neighbour reading of the two rules.
void focused_sampling_rules(Verdict& v) {
  Rng rng(202);
  std::size_t added_total = 0, rule_a = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2048;
    const std::size_t n_tail = 2 + rng.index(60);
    std::vector<Vec3> pts(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      pts[i] = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.3, 0.3));
      labels[i] = static_cast<std::uint8_t>(i < n_tail ? kScrewLabel : rng.uniform_int(0, 4));
    }
    std::shuffle(labels.begin(), labels.end(), rng.engine());
    const auto r = imbalance::focused_sampling(pts, labels, kScrewLabel);

    std::vector<std::size_t> tail;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == kScrewLabel) tail.push_back(i);
    v.require(std::count(r.labels.begin(), r.labels.end(), kScrewLabel) == static_cast<long>(2 * tail.size()),
              "tail count doubles");
    v.require(r.points.size() == n + tail.size(), "only tail points are added");
    v.require(std::memcmp(r.points.data(), pts.data(), n * sizeof(Vec3)) == 0 &&
                  std::equal(labels.begin(), labels.end(), r.labels.begin()),
              "original points byte-identical");

    auto nearest = [&](std::size_t a) {
      std::size_t best = a;
      double bd = std::numeric_limits<double>::infinity();
      for (auto b : tail)
        if (b != a && oracle::d2(pts[a], pts[b]) < bd) {
          bd = oracle::d2(pts[a], pts[b]);
          best = b;
        }
      return best;
    };
    if (r.added_from.size() != tail.size()) continue;
    for (std::size_t k = 0; k < tail.size(); ++k) {
      const std::size_t p1 = r.added_from[k], p2 = r.added_towards[k];
      v.require(labels[p1] == kScrewLabel && labels[p2] == kScrewLabel, "endpoints are tail points");
      v.require(p2 == nearest(p1), "p2 is the nearest tail point of p1");
      const bool mutual = nearest(p2) == p1;
      rule_a += mutual;
      const long double f = mutual ? 1.0L / 3.0L : 2.0L / 3.0L;
      const Vec3& q = r.points[n + k];
      for (int a = 0; a < 3; ++a) {
        const long double want = pts[p1][a] + f * (static_cast<long double>(pts[p2][a]) - pts[p1][a]);
        v.require(std::abs(static_cast<long double>(q[a]) - want) <= 1e-15L, "added point lies at the rule fraction");
      }
      v.require(r.labels[n + k] == kScrewLabel, "added point is labelled tail");
      ++added_total;
    }
  }
  v.note("100 sub-clouds, " + std::to_string(added_total) + " added points (" + std::to_string(rule_a) +
         " by rule a)");
}

// 3. DBSCAN against the naive reference; kernel points against an
// exhaustive nearest-member scan of the K-means centroids.
void clustering_oracles(Verdict& v) {
  int same = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pts = oracle::random_points(500, 3000 + seed);
    const double eps = 0.08 + 0.01 * static_cast<double>(seed % 5);
    const std::size_t min_pts = 3 + seed % 4;
    const auto lab = core::dbscan(pts, eps, min_pts);
    same += oracle::same_partition(lab.assignment, oracle::naive_dbscan(pts, eps, min_pts));
  }
  v.require(same == 20, std::to_string(20 - same) + " DBSCAN partitions differ");

  Rng rng(303);
  std::size_t kernels_checked = 0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    std::vector<Vec3> p;
    std::vector<std::uint8_t> l;
    for (int i = 0; i < 1500; ++i) {
      p.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      l.push_back(static_cast<std::uint8_t>(i < 20 + static_cast<int>(trial) ? kScrewLabel : rng.uniform_int(0, 4)));
    }
    std::shuffle(l.begin(), l.end(), rng.engine());
    const std::uint64_t seed = 40 + trial;
    const auto ks = imbalance::kernel_ground_truth(p, l, 8, seed);
    for (int c = 0; c < kNumCategories; ++c) {
      std::vector<Vec3> members;
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < p.size(); ++i)
        if (l[i] == c) {
          members.push_back(p[i]);
          idx.push_back(i);
        }
      if (!ks.present[c]) {
        v.require(members.empty(), "populated category marked absent");
        continue;
      }
      const auto km = core::kmeans(members, 8, mix_seed(seed + static_cast<std::uint64_t>(c)));
      for (int k = 0; k < 8; ++k) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < members.size(); ++j)
          if (oracle::d2(members[j], km.centroids[k]) < bd) {
            bd = oracle::d2(members[j], km.centroids[k]);
            best = j;
          }
        v.require(ks.indices[c][k] == idx[best], "kernel is the nearest in-category member");
        v.require(l[ks.indices[c][k]] == c && ks.kernels[c][k] == p[ks.indices[c][k]], "kernel is an in-category point");
        ++kernels_checked;
      }
    }
  }
  v.note(std::to_string(same) + "/20 DBSCAN partitions identical, " + std::to_string(kernels_checked) +
         " kernels verified");
}

// 4. Central-difference gradient check of the full loss.
void gradient_check(Verdict& v) {
  double worst = 0;
  std::size_t checked = 0;
  for (std::uint64_t seed : {31, 32, 33}) {
    auto pb = gradcheck::make_problem(seed);
    v.require(pb.cfg.S == 64 && pb.cfg.d == 8, "tiny profile");
    v.require(pb.cfg.stn && pb.cfg.patch_branch && pb.weights.size() == kNumCategories, "all loss terms and weighting active");
    const model::Network net(pb.cfg);
    const auto out = net.forward(pb.params, pb.points);
    const auto l = model::total_loss(out, pb.labels, pb.rotation_target, pb.kernels, pb.weights, pb.cfg);
    v.require(l.terms.rot > 0 && l.terms.ker > 0 && l.terms.seg > 0, "every loss term is non-zero");
    const auto rep = gradcheck::check(pb, 1e-8);
    v.require(rep.unresolved == 0, std::to_string(rep.unresolved) + " parameters without a same-piece quotient");
    v.require(rep.max_rel < 1e-4, "seed " + std::to_string(seed) + " worst " + rep.worst + " " + fmt("%.3g", rep.max_rel));
    worst = std::max(worst, rep.max_rel);
    checked += rep.checked;
  }
  v.note("3 seeds, " + std::to_string(checked) + " partials, max rel error " + fmt("%.2e", worst));
}

// 5. Structural properties of the network and losses.
void network_properties(Verdict& v) {
  using namespace motorseg::model;
  auto pb = gradcheck::make_problem(41);
  const Network net(pb.cfg);
  std::vector<std::size_t> perm(pb.points.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(505);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  std::vector<Vec3> permuted(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) permuted[i] = pb.points[perm[i]];
  const auto a = net.forward(pb.params, pb.points);
  const auto b = net.forward(pb.params, permuted);
  bool equivariant = true;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < 6; ++c) equivariant &= b.logits(i, c) == a.logits(perm[i], c);
  v.require(equivariant, "logits permute exactly with the input");

  double worst_row = 0;
  for (std::size_t i = 0; i < a.attention.rows; ++i) {
    double s = 0;
    for (std::size_t m = 0; m < a.attention.cols; ++m) s += a.attention(i, m);
    worst_row = std::max(worst_row, std::abs(s - 1.0));
  }
  v.require(a.attention.rows == pb.points.size() && worst_row < 1e-6, "attention rows sum to 1");

  const int per = pb.cfg.kernels_per_category;
  Matrix shuffled = a.kernels;
  for (int c = 0; c < kNumCategories; ++c) {
    std::vector<int> slots(per);
    std::iota(slots.begin(), slots.end(), 0);
    std::shuffle(slots.begin(), slots.end(), rng.engine());
    for (int s = 0; s < per; ++s)
      for (int ax = 0; ax < 3; ++ax) shuffled(c * per + s, ax) = a.kernels(c * per + slots[s], ax);
  }
  const double k0 = kernel_loss(a.kernels, pb.kernels, per, KernelMatching::hungarian).value;
  const double k1 = kernel_loss(shuffled, pb.kernels, per, KernelMatching::hungarian).value;
  v.require(std::abs(k0 - k1) <= 1e-12 * std::max(1.0, k0), "kernel loss ignores slot order");

  const auto at_target = total_loss(a, pb.labels, a.rotation, pb.kernels, pb.weights, pb.cfg);
  v.require(at_target.terms.rot == 0.0, "L_rot(R, R) = 0");

  Matrix uniform(257, 6, -0.7);
  std::vector<std::uint8_t> labels(257);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 5));
  const double ce = cross_entropy(uniform, labels, {}, nullptr);
  v.require(std::abs(ce - std::log(6.0)) < 1e-9, "uniform logits give ln 6");

  v.note("attention row error " + fmt("%.1e", worst_row) + ", |dL_ker| " + fmt("%.1e", std::abs(k0 - k1)) +
         ", |L_seg - ln6| " + fmt("%.1e", std::abs(ce - std::log(6.0))));
}

// 6. Sub-cloud split rule and prediction coverage.
void dataloader_rule(Verdict& v) {
  Rng rng(606);
  PointCloud c;
  for (int i = 0; i < 5000; ++i) {
    c.points.emplace_back(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0, 0.1));
    c.labels.push_back(static_cast<std::uint8_t>(rng.uniform_int(0, 5)));
  }
  using preprocess::SplitMode;
  const auto train = preprocess::split_subclouds(c, 2048, SplitMode::train, 7);
  v.require(train.subclouds.size() == 2, "train mode yields 2 sub-clouds");
  const auto test = preprocess::split_subclouds(c, 2048, SplitMode::test, 7);
  v.require(test.subclouds.size() == 3, "test mode yields 3 sub-clouds");
  if (test.subclouds.size() == 3) {
    const auto& first = test.subclouds[0].source_indices;
    const auto& second = test.subclouds[1].source_indices;
    const auto& last = test.subclouds[2];
    std::set<std::size_t> used(first.begin(), first.end());
    used.insert(second.begin(), second.end());
    std::set<std::size_t> residual;
    for (std::size_t i = 0; i < 5000; ++i)
      if (!used.count(i)) residual.insert(i);
    v.require(residual.size() == 904, "904 residual points");
    const std::set<std::size_t> head(last.source_indices.begin(), last.source_indices.begin() + 904);
    v.require(head == residual, "third sub-cloud holds every residual point");
    v.require(last.size() == 2048 && last.padded == 1144, "1144 resampled duplicates");
    const bool in_cuboid = std::all_of(last.source_indices.begin() + 904, last.source_indices.end(),
                                       [](std::size_t i) { return i < 5000; });
    v.require(in_cuboid, "duplicates are resampled from the cuboid");
  }

  auto cfg = model::ModelConfig::tiny();
  const model::Network net(cfg);
  const auto params = model::init_params(cfg, 6);
  std::size_t covered_clouds = 0;
  for (std::size_t n : {std::size_t{40}, std::size_t{64}, std::size_t{65}, std::size_t{300}, std::size_t{1001}}) {
    std::vector<Vec3> pts(c.points.begin(), c.points.begin() + static_cast<long>(n));
    PointCloud pc;
    pc.points = pts;
    pc.labels.assign(n, 0);
    const auto split = preprocess::split_subclouds(pc, cfg.S, SplitMode::test, 3);
    std::vector<int> hits(n, 0);
    for (const auto& sc : split.subclouds)
      for (auto i : sc.source_indices) ++hits[i];
    const auto labels = model::predict(net, params, pts, 3);
    const bool ok = labels.size() == n && std::all_of(hits.begin(), hits.end(), [](int h) { return h >= 1; }) &&
                    std::all_of(labels.begin(), labels.end(), [](auto l) { return l < kNumCategories; });
    v.require(ok, "predict covers all " + std::to_string(n) + " points");
    covered_clouds += ok;
  }
  v.note("5000 pts at S=2048: train " + std::to_string(train.subclouds.size()) + ", test " +
         std::to_string(test.subclouds.size()) + " with " +
         std::to_string(test.subclouds.empty() ? 0 : test.subclouds.back().padded) + " duplicates; prediction covered " +
         std::to_string(covered_clouds) + "/5 cuboids");
}

// 7. Point count and label distribution of generated sim scenes.
void scene_distribution(Verdict& v) {
  const auto prof = synthgen::GenerationProfile::defaults(synthgen::Domain::sim);
  const preprocess::CuboidConfig cuboid;
  std::vector<double> raw, frac, bg, screw;
  for (int s = 0; s < 50; ++s) {
    const auto sc = synthgen::generate_scene(s, 707, prof);
    const auto crop = preprocess::crop_cuboid(sc.cloud, cuboid, mix_seed(s));
    std::array<std::size_t, kNumCategories> h{};
    for (auto l : crop.cuboid.labels) ++h[l];
    const double n = static_cast<double>(crop.cuboid.size());
    raw.push_back(static_cast<double>(sc.cloud.size()));
    frac.push_back(n / raw.back());
    bg.push_back(static_cast<double>(h[0]) / n);
    screw.push_back(static_cast<double>(h[kScrewLabel]) / n);
  }
  auto range = [](const std::vector<double>& x) { return std::minmax_element(x.begin(), x.end()); };
  auto [rlo, rhi] = range(raw);
  auto [flo, fhi] = range(frac);
  auto [blo, bhi] = range(bg);
  auto [slo, shi] = range(screw);
  v.require(*rlo >= 1.0e6 && *rhi <= 1.4e6, "raw size " + fmt("%.0f", *rlo) + ".." + fmt("%.0f", *rhi));
  v.require(*flo >= 0.08 && *fhi <= 0.12, "cuboid fraction " + fmt("%.4f", *flo) + ".." + fmt("%.4f", *fhi));
  v.require(*blo >= 0.50 && *bhi <= 0.75, "background fraction " + fmt("%.3f", *blo) + ".." + fmt("%.3f", *bhi));
  v.require(*slo >= 0.005 && *shi <= 0.02, "screw fraction " + fmt("%.4f", *slo) + ".." + fmt("%.4f", *shi));
  v.note("50 scenes: raw " + fmt("%.2fM", *rlo / 1e6) + ".." + fmt("%.2fM", *rhi / 1e6) + ", cuboid " +
         fmt("%.1f%%", 100 * *flo) + ".." + fmt("%.1f%%", 100 * *fhi) + ", background " + fmt("%.3f", *blo) + ".." +
         fmt("%.3f", *bhi) + ", screw " + fmt("%.4f", *slo) + ".." + fmt("%.4f", *shi));
}

// 8. Screw localisation and orientation from ground-truth labels.
void oracle_postprocess(Verdict& v) {
  for (double sigma : {0.0, 0.0015}) {
    auto prof = synthgen::GenerationProfile::defaults(synthgen::Domain::sim);
    prof.noise_sigma = sigma;
    const double max_angle = sigma == 0.0 ? 2.0 : 5.0;
    double worst_ratio = 0, worst_angle = 0;
    std::size_t missed = 0, spurious = 0, side_ok = 0;
    for (int s = 0; s < 20; ++s) {
      const auto sc = synthgen::generate_scene(s, 808, prof);
      postprocess::OrientationParams op;
      op.viewpoint = sc.manifest.scene.camera_position();
      const auto rep = postprocess::build_report(sc.cloud, {}, op);
      const auto e = postprocess::evaluate_report(rep, sc.manifest, 1.0);
      missed += e.missed;
      spurious += e.spurious;
      worst_ratio = std::max(worst_ratio, e.max_center_error_ratio);
      worst_angle = std::max(worst_angle, std::isnan(e.angular_error_deg) ? 180.0 : e.angular_error_deg);
      side_ok += rep.side_screw_center.has_value() &&
                 (*rep.side_screw_center - sc.manifest.side_screw_center).norm() <
                     sc.manifest.motor.side_screw.head_radius;
    }
    const std::string tag = sigma == 0.0 ? "noiseless" : "sigma 1.5 mm";
    if (sigma == 0.0) {
      v.require(missed == 0 && spurious == 0, tag + ": " + std::to_string(missed) + " missed, " +
                                                  std::to_string(spurious) + " spurious");
      v.require(worst_ratio < 1.0, tag + ": centre error ratio " + fmt("%.3f", worst_ratio));
      v.require(side_ok == 20, tag + ": side screw flagged in " + std::to_string(side_ok) + "/20");
    }
    v.require(worst_angle < max_angle, tag + ": angular error " + fmt("%.2f", worst_angle) + " deg");
    v.note(tag + ": missed " + std::to_string(missed) + ", spurious " + std::to_string(spurious) + ", side " +
           std::to_string(side_ok) + "/20, centre/radius " + fmt("%.3f", worst_ratio) + ", angle " +
           fmt("%.2f", worst_angle) + " deg");
  }
}

// 9. Pre-training on sim then fine-tuning on pseudo-real against training
// on pseudo-real from scratch, at the smoke profile.
void transfer_trend(Verdict& v) {
  using namespace motorseg::pipeline;
  std::vector<double> finetuned, scratch, untrained, diff;
  const auto root = micro::fresh_dir("acceptance_transfer");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = PipelineConfig::smoke();
    cfg.seed = seed;
    cfg.paths.run_dir = root / ("seed_" + std::to_string(seed));
    for (auto d : {synthgen::Domain::sim, synthgen::Domain::pseudo_real}) {
      cmd_gen(cfg, d, 1);
      cmd_preprocess(cfg, d, 1);
    }
    const auto pre = cmd_train(cfg, TrainRequest{});
    TrainRequest ft;
    ft.stage = model::Stage::finetune;
    ft.init = pre.checkpoint;
    const auto fin = cmd_train(cfg, ft);
    TrainRequest sc = ft;
    sc.init.reset();
    sc.scratch = true;
    const auto scr = cmd_train(cfg, sc);
    finetuned.push_back(cmd_eval(cfg, fin.checkpoint, synthgen::Domain::pseudo_real, 1).iou.screw_iou);
    scratch.push_back(cmd_eval(cfg, scr.checkpoint, synthgen::Domain::pseudo_real, 1).iou.screw_iou);
    untrained.push_back(cmd_eval(cfg, std::nullopt, synthgen::Domain::pseudo_real, 1).iou.screw_iou);
    diff.push_back(finetuned.back() - scratch.back());
    std::printf("  transfer seed %llu: finetuned %.4f  scratch %.4f  untrained %.4f\n",
                static_cast<unsigned long long>(seed), finetuned.back(), scratch.back(), untrained.back());
    std::fflush(stdout);
  }
  const double gain = median(finetuned) - median(untrained);
  v.require(median(diff) >= 0.0, "median paired finetuned - scratch " + fmt("%.4f", median(diff)));
  v.require(gain >= 0.2, "median gain over untrained " + fmt("%.4f", gain));
  v.note("median screw IoU finetuned " + fmt("%.4f", median(finetuned)) + ", scratch " + fmt("%.4f", median(scratch)) +
         ", untrained " + fmt("%.4f", median(untrained)) + "; median paired difference " + fmt("%.4f", median(diff)));
}

// 10. The ablation harness reproduces the fixture table layouts.
void ablation_shape(Verdict& v) {
  using namespace motorseg::pipeline;
  const fs::path fixtures = MOTORSEG_FIXTURE_DIR;
  std::size_t tables = 0;
  for (const char* name : {"ablation_stn_pretrain.json", "ablation_augmentation.json", "ablation_imbalance.json"}) {
    const json spec = read_json_file(fixtures / name);
    const auto matrix = parse_matrix(spec);
    auto cfg = micro::config(micro::fresh_dir(std::string("acceptance_") + name));
    cfg.pretrain.epochs = 1;
    cfg.finetune.epochs = 1;
    const auto table = cmd_ablate(cfg, matrix, 1);
    const auto& expect = spec.at("expect");
    v.require(table.header() == expect.at("header").get<std::vector<std::string>>(), std::string(name) + " header");
    const auto cells = table.cells();
    const auto want = expect.at("toggle_cells").get<std::vector<std::vector<std::string>>>();
    bool rows_ok = cells.size() == want.size();
    for (std::size_t r = 0; rows_ok && r < cells.size(); ++r) {
      rows_ok = cells[r].size() == want[r].size() + kMetricHeaders.size() &&
                std::equal(want[r].begin(), want[r].end(), cells[r].begin());
      const bool pretrained = runs_pretrain(matrix.rows[r].toggles);
      const auto metric = cells[r].end() - static_cast<long>(kMetricHeaders.size());
      rows_ok = rows_ok && (metric[0] == "-") == !pretrained && (metric[1] == "-") == !pretrained &&
                metric[2] != "-" && metric[3] != "-";
    }
    v.require(rows_ok, std::string(name) + " toggle and metric cells");
    std::size_t reports = 0;
    for (const auto& f : fs::directory_iterator(cfg.paths.reports()))
      if (f.path().extension() == ".json" && f.path().stem().string().rfind("ablation_", 0) == 0)
        reports += read_json_file(f.path()).at("header") == expect.at("header");
    v.require(reports == 1, std::string(name) + " written report");
    tables += rows_ok;
  }
  v.note(std::to_string(tables) + "/3 fixture tables match (micro-scale training)");
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "class weight formula oracle", 1, class_weight_oracle},
      {2, "focused sampling", 5, focused_sampling_rules},
      {3, "clustering oracles", 30, clustering_oracles},
      {4, "gradient check", 300, gradient_check},
      {5, "network properties", 0, network_properties},
      {6, "dataloader rule", 0, dataloader_rule},
      {7, "scene distribution", 600, scene_distribution},
      {8, "post-processing with oracle labels", 300, oracle_postprocess},
      {9, "transfer trend", 7200, transfer_trend},
      {10, "ablation harness shape", 0, ablation_shape},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0) v.require(secs < c.budget_s, "runtime over " + fmt("%.0f s", c.budget_s));
    failed += !v.passed();
    std::printf("[%s] %2d %s (%.1f s): %s\n", v.passed() ? "PASS" : "FAIL", c.id, c.title, secs, v.text().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
