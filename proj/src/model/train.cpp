#include "motorseg/model.hpp"

#include "motorseg/preprocess.hpp"
#include "motorseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace motorseg::model {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(lr_final > 0.0 && lr_final <= lr_initial)) throw ValidationError("need 0 < lr_final <= lr_initial");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
  if (!(grad_clip >= 0.0)) throw ValidationError("grad_clip must be >= 0");
}

TrainConfig TrainConfig::pretrain() { return TrainConfig{}; }

TrainConfig TrainConfig::finetune() {
  TrainConfig c;
  c.epochs = 300;
  c.lr_initial = 0.001;
  c.stage = Stage::finetune;
  return c;
}

Stage parse_stage(const std::string& s) {
  if (s == "pretrain") return Stage::pretrain;
  if (s == "finetune") return Stage::finetune;
  throw ValidationError("unknown stage '" + s + "'");
}

std::string to_string(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},     {"batch_size", c.batch_size}, {"lr_initial", c.lr_initial},
       {"lr_final", c.lr_final}, {"momentum", c.momentum},     {"seed", c.seed}, {"grad_clip", c.grad_clip},
       {"stage", to_string(c.stage)}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const Stage stage = parse_stage(j.value("stage", std::string("pretrain")));
  const TrainConfig d = stage == Stage::pretrain ? TrainConfig::pretrain() : TrainConfig::finetune();
  c.stage = stage;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.lr_initial = j.value("lr_initial", d.lr_initial);
  c.lr_final = j.value("lr_final", d.lr_final);
  c.momentum = j.value("momentum", d.momentum);
  c.seed = j.value("seed", d.seed);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.validate();
}

double cosine_lr(const TrainConfig& cfg, int epoch) {
  const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
  return cfg.lr_final + 0.5 * (cfg.lr_initial - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

Sample make_sample(std::vector<Vec3> points, std::vector<std::uint8_t> labels, const Mat3& rotation_gt,
                   const ModelConfig& cfg, std::uint64_t seed) {
  if (points.size() != labels.size()) throw SizeError("points and labels differ in length");
  Sample s;
  if (cfg.focused_sampling) {
    auto fr = imbalance::focused_sampling(points, labels, static_cast<std::uint8_t>(Category::screw));
    s.points = std::move(fr.points);
    s.labels = std::move(fr.labels);
  } else {
    s.points = std::move(points);
    s.labels = std::move(labels);
  }
  s.rotation_gt = rotation_gt;
  if (cfg.patch_branch)
    s.kernels = imbalance::kernel_ground_truth(s.points, s.labels, cfg.kernels_per_category, seed,
                                               cfg.num_categories);
  return s;
}

std::vector<std::size_t> label_counts(std::span<const Sample> samples, int num_categories) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_categories), 0);
  for (const auto& s : samples)
    for (auto l : s.labels) {
      if (l >= counts.size()) throw ValidationError("label out of range");
      ++counts[l];
    }
  return counts;
}

std::vector<std::uint8_t> argmax_rows(const Matrix& logits) {
  std::vector<std::uint8_t> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* r = logits.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols; ++c)
      if (r[c] > r[best]) best = c;
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LossTerms batch_gradient(const Network& net, const ModelParams& params, std::span<const Sample* const> batch,
                         std::span<const double> weights, ModelParams& grads, std::size_t* correct) {
  if (batch.empty()) throw SizeError("empty batch");
  grads = params.zeros_like();
  LossTerms mean;
  std::size_t hits = 0;
  for (const Sample* s : batch) {
    Cache cache;
    const ForwardResult out = net.forward_train(params, s->points, cache);
    // The STN should undo the augmentation: aligned = R x with R = R_aug^T.
    const LossResult loss = total_loss(out, s->labels, s->rotation_gt.transpose(), s->kernels, weights, net.config());
    net.backward(params, cache, loss.d_logits, loss.d_rotation, loss.d_kernels, grads);
    mean.total += loss.terms.total;
    mean.seg += loss.terms.seg;
    mean.rot += loss.terms.rot;
    mean.ker += loss.terms.ker;
    if (correct) {
      const auto pred = argmax_rows(out.logits);
      for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == s->labels[i] ? 1 : 0;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grads.values)
    for (auto& v : g.data) v *= inv;
  mean.total *= inv;
  mean.seg *= inv;
  mean.rot *= inv;
  mean.ker *= inv;
  if (correct) *correct = hits;
  return mean;
}

namespace {

// Ordering key for checkpoint selection; an absent screw class ranks lowest.
std::pair<double, double> score(const EpochRecord& r) {
  const double s = std::isnan(r.val_screw_iou) ? -1.0 : r.val_screw_iou;
  const double m = std::isnan(r.val_miou) ? -1.0 : r.val_miou;
  return {s, m};
}

}  // namespace

TrainResult train(std::span<const Sample> train_set, std::span<const EvalCloud> val_set, const TrainConfig& tcfg,
                  const ModelConfig& mcfg, const ModelParams* init, const EpochCallback& on_epoch) {
  tcfg.validate();
  mcfg.validate();
  if (train_set.empty()) throw ValidationError("training set is empty");
  if (val_set.empty()) throw ValidationError("validation set is empty");
  const Network net(mcfg);
  ModelParams params = init ? *init : init_params(mcfg, mix_seed(tcfg.seed ^ 0x1417));
  if (init && params.names != init_params(mcfg, 0).names)
    throw ValidationError("initial parameters do not match the model configuration");

  std::vector<double> weights;
  if (mcfg.class_weights) weights = imbalance::class_weights(label_counts(train_set, mcfg.num_categories)).weight;

  ModelParams velocity = params.zeros_like();
  ModelParams grads;
  Rng rng(mix_seed(tcfg.seed ^ 0x5eed));
  const std::uint64_t eval_seed = mix_seed(tcfg.seed ^ 0xe7a1);
  std::vector<std::size_t> order(train_set.size());

  TrainResult result;
  result.best = params;
  std::size_t total_points = 0;
  for (const auto& s : train_set) total_points += s.points.size();

  for (int epoch = 0; epoch < tcfg.epochs && !result.diverged; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr(tcfg, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
      std::vector<const Sample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      std::size_t batch_hits = 0;
      const LossTerms terms = batch_gradient(net, params, batch, weights, grads, &batch_hits);
      if (!std::isfinite(terms.total) || !grads.all_finite()) {
        result.diverged = true;
        break;
      }
      hits += batch_hits;
      const double share = static_cast<double>(batch.size()) / static_cast<double>(order.size());
      rec.loss.total += terms.total * share;
      rec.loss.seg += terms.seg * share;
      rec.loss.rot += terms.rot * share;
      rec.loss.ker += terms.ker * share;
      double scale = 1.0;
      if (tcfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads.values)
          for (double v : g.data) sq += v * v;
        if (std::sqrt(sq) > tcfg.grad_clip) scale = tcfg.grad_clip / std::sqrt(sq);
      }
      for (std::size_t a = 0; a < params.values.size(); ++a) {
        auto& w = params.values[a].data;
        auto& v = velocity.values[a].data;
        const auto& g = grads.values[a].data;
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = tcfg.momentum * v[i] + scale * g[i];
          w[i] -= rec.lr * v[i];
        }
      }
      if (!params.all_finite()) {
        result.diverged = true;
        break;
      }
    }
    if (result.diverged) break;
    rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(total_points);
    const auto ious = metrics::iou(evaluate(net, params, val_set, eval_seed));
    rec.val_miou = ious.miou;
    rec.val_screw_iou = ious.screw_iou;
    if (result.best_epoch < 0 || score(rec) > score(result.history[static_cast<std::size_t>(result.best_epoch)])) {
      result.best = params;
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::uint8_t majority_vote(std::span<const std::uint8_t> votes, int num_categories) {
  if (votes.empty()) throw SizeError("no votes");
  std::vector<std::size_t> count(static_cast<std::size_t>(num_categories), 0);
  for (auto v : votes) {
    if (v >= count.size()) throw ValidationError("vote out of range");
    ++count[v];
  }
  return static_cast<std::uint8_t>(std::max_element(count.begin(), count.end()) - count.begin());
}

std::vector<std::uint8_t> predict(const Network& net, const ModelParams& params, std::span<const Vec3> cuboid,
                                  std::uint64_t seed) {
  const auto& cfg = net.config();
  if (cuboid.empty()) throw ValidationError("cannot predict an empty cuboid");
  PointCloud cloud;
  cloud.points.assign(cuboid.begin(), cuboid.end());
  cloud.labels.assign(cuboid.size(), 0);
  const auto split =
      preprocess::split_subclouds(cloud, cfg.S, preprocess::SplitMode::test, seed, Mat3::Identity(), cfg.normalize);
  const auto m = static_cast<std::size_t>(cfg.num_categories);
  std::vector<std::uint32_t> tally(cuboid.size() * m, 0);
  for (const auto& sc : split.subclouds) {
    const auto pred = argmax_rows(net.forward(params, sc.points).logits);
    for (std::size_t i = 0; i < pred.size(); ++i) ++tally[sc.source_indices[i] * m + pred[i]];
  }
  std::vector<std::uint8_t> out(cuboid.size());
  for (std::size_t i = 0; i < cuboid.size(); ++i) {
    const auto* t = tally.data() + i * m;
    out[i] = static_cast<std::uint8_t>(std::max_element(t, t + m) - t);
  }
  return out;
}

metrics::ConfusionMatrix evaluate(const Network& net, const ModelParams& params, std::span<const EvalCloud> clouds,
                                  std::uint64_t seed) {
  metrics::ConfusionMatrix conf(net.config().num_categories);
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    const auto pred = predict(net, params, clouds[i].points, mix_seed(seed + i));
    conf.accumulate(clouds[i].labels, pred);
  }
  return conf;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,lr,loss_total,loss_seg,loss_rot,loss_ker,train_accuracy,val_miou,val_screw_iou\n";
  for (const auto& r : history)
    os << r.epoch << ',' << r.lr << ',' << r.loss.total << ',' << r.loss.seg << ',' << r.loss.rot << ','
       << r.loss.ker << ',' << r.train_accuracy << ',' << r.val_miou << ',' << r.val_screw_iou << '\n';
  return os.str();
}

}  // namespace motorseg::model
