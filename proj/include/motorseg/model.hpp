#pragma once

// Point-cloud segmentation network: optional alignment network (STN),
// EdgeConv backbone, optional kernel-patch branch with patch-to-point cross
// attention, and a per-point classification head. Forward and backward
// passes are hand-written in double precision.

#include "motorseg/common.hpp"
#include "motorseg/imbalance.hpp"
#include "motorseg/metrics.hpp"
#include "motorseg/tensor.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace motorseg::model {

using nn::Matrix;

enum class KernelMatching { hungarian, chamfer };

struct ModelConfig {
  std::size_t S = 2048;
  std::size_t k_graph = 20;
  int num_categories = kNumCategories;
  int kernels_per_category = 8;
  std::size_t patch_size = 32;
  std::size_t d = 64;
  std::vector<std::size_t> edge_widths{64, 64, 128};
  std::vector<std::size_t> stn_widths{32, 64};
  std::size_t head_hidden = 64;
  double alpha = 0.01;
  double beta = 0.05;
  bool class_weights = true;
  bool patch_branch = true;
  bool stn = true;
  bool normalize = true;
  bool focused_sampling = true;
  KernelMatching matching = KernelMatching::hungarian;

  int num_kernels() const { return num_categories * kernels_per_category; }
  void validate() const;

  static ModelConfig small();
  /// Gradient-check profile: S=64, d=8.
  static ModelConfig tiny();
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Ordered named weight arrays. The order is fixed by the config.
struct ModelParams {
  std::vector<std::string> names;
  std::vector<Matrix> values;

  std::size_t index(const std::string& name) const;
  Matrix& operator[](const std::string& name) { return values[index(name)]; }
  const Matrix& operator[](const std::string& name) const { return values[index(name)]; }
  std::size_t count() const;  ///< total scalar parameters
  /// Same names and shapes, all zero.
  ModelParams zeros_like() const;
  bool all_finite() const;

  bool operator==(const ModelParams&) const = default;
};

/// Random initialisation: scaled Gaussian weights, zero biases, a zero STN
/// head (identity transform) and kernel-head biases spread over the unit ball.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

struct Attention {
  Matrix weights;  ///< S x num_kernels row-softmax
};

struct ForwardResult {
  Matrix logits;   ///< N x M
  Mat3 rotation = Mat3::Identity();
  Matrix kernels;  ///< num_kernels x 3, pre-snap, input frame
  std::vector<std::size_t> snapped;  ///< input index per kernel slot
  Matrix attention;  ///< N x num_kernels (empty without the patch branch)
  Matrix patch_features;  ///< num_kernels x d
  Matrix point_features;  ///< N x d backbone output
  Matrix global_feature;  ///< 1 x d
  /// Hash of every discrete choice made (neighbour lists, max-pool winners,
  /// snapping, activation branches). Equal signatures mean the forward pass
  /// lies on the same smooth piece.
  std::uint64_t signature = 0;
};

struct Cache;  // intermediate activations for the backward pass

class Network {
 public:
  explicit Network(ModelConfig cfg);
  const ModelConfig& config() const { return cfg_; }

  /// Optional `slot_mask` (num_kernels entries) hides patches from attention.
  ForwardResult forward(const ModelParams& p, std::span<const Vec3> points,
                        const std::vector<bool>* slot_mask = nullptr) const;

  /// Forward keeping the activations needed by backward().
  ForwardResult forward_train(const ModelParams& p, std::span<const Vec3> points, Cache& cache) const;

  /// Accumulates parameter gradients given loss gradients w.r.t. the logits,
  /// the STN rotation and the pre-snap kernels.
  void backward(const ModelParams& p, const Cache& cache, const Matrix& d_logits, const Mat3& d_rotation,
                const Matrix& d_kernels, ModelParams& grads) const;

 private:
  ForwardResult run(const ModelParams& p, std::span<const Vec3> points, Cache* cache,
                    const std::vector<bool>* slot_mask) const;
  ModelConfig cfg_;
};

struct Cache {
  Matrix x, stn_a1, stn_h1, stn_a2, stn_h2;
  nn::ColumnMax stn_pool;
  Mat3 rotation = Mat3::Identity();
  Matrix p;  ///< aligned points
  struct Edge {
    Matrix input, z;
    std::vector<std::size_t> winner;  ///< N x C neighbour index attaining the max
  };
  std::vector<Edge> edges;
  Matrix concat, f_pre, f;
  nn::ColumnMax global_pool;
  // patch branch
  std::vector<std::size_t> snapped;
  std::vector<std::vector<std::size_t>> patch_members;
  Matrix patch_pre;  ///< num_kernels x d, after max and bias
  std::vector<std::size_t> patch_winner;  ///< num_kernels x d member slot attaining the max
  Matrix patch_features, q, k, v, attn, o, g, fused_pre, fused;
  Matrix head_in, head_pre, head_h;
};

// --- losses -----------------------------------------------------------------

struct LossTerms {
  double total = 0, seg = 0, rot = 0, ker = 0;
};

struct LossResult {
  LossTerms terms;
  Matrix d_logits;
  Mat3 d_rotation = Mat3::Zero();
  Matrix d_kernels;
};

/// Mean (optionally class-weighted) cross entropy, Frobenius rotation loss
/// against `rotation_target`, and per-category kernel matching averaged over
/// present categories. `weights` may be empty (unweighted).
LossResult total_loss(const ForwardResult& out, std::span<const std::uint8_t> labels, const Mat3& rotation_target,
                      const imbalance::KernelSet& kernel_gt, std::span<const double> weights, const ModelConfig& cfg);

double cross_entropy(const Matrix& logits, std::span<const std::uint8_t> labels, std::span<const double> weights,
                     Matrix* d_logits);

/// Minimum-cost perfect assignment on a square cost matrix; result[i] is the
/// column assigned to row i.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost);

struct KernelLoss {
  double value = 0;
  Matrix d_kernels;
};
KernelLoss kernel_loss(const Matrix& kernels, const imbalance::KernelSet& gt, int per_category,
                       KernelMatching matching);

// --- training ----------------------------------------------------------------

struct Sample {
  std::vector<Vec3> points;  ///< normalised, possibly densified beyond S
  std::vector<std::uint8_t> labels;
  Mat3 rotation_gt = Mat3::Identity();  ///< rotation applied by aug1
  imbalance::KernelSet kernels;
};

/// A labelled cuboid used for validation/test metrics.
struct EvalCloud {
  std::vector<Vec3> points;
  std::vector<std::uint8_t> labels;
};

enum class Stage { pretrain, finetune };

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 16;
  double lr_initial = 0.01;
  double lr_final = 1e-5;
  double momentum = 0.9;
  /// Rescales each batch gradient to at most this global L2 norm; 0 disables.
  double grad_clip = 0.0;
  std::uint64_t seed = 0;
  Stage stage = Stage::pretrain;

  void validate() const;
  static TrainConfig pretrain();
  static TrainConfig finetune();
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// lr_final + (lr_initial - lr_final) (1 + cos(pi e / epochs)) / 2
double cosine_lr(const TrainConfig& cfg, int epoch);

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  LossTerms loss;  ///< mean over training samples
  double train_accuracy = 0;
  double val_miou = 0;
  double val_screw_iou = 0;
};

struct TrainResult {
  ModelParams best;
  int best_epoch = -1;
  std::vector<EpochRecord> history;
  bool diverged = false;
};

/// Builds training samples from the sub-clouds of one cuboid: kernel ground
/// truth and (optionally) focused sampling of the screw category.
Sample make_sample(std::vector<Vec3> points, std::vector<std::uint8_t> labels, const Mat3& rotation_gt,
                   const ModelConfig& cfg, std::uint64_t seed);

/// Row argmax, ties to the lowest column.
std::vector<std::uint8_t> argmax_rows(const Matrix& logits);

/// Per-category counts over all samples, for class weighting.
std::vector<std::size_t> label_counts(std::span<const Sample> samples, int num_categories);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// SGD with momentum (v = mu v + g; w -= lr v) and a per-epoch cosine
/// schedule. Keeps the parameters with the best validation screw IoU (ties
/// broken by mIoU, then earlier epoch).
TrainResult train(std::span<const Sample> train_set, std::span<const EvalCloud> val_set, const TrainConfig& tcfg,
                  const ModelConfig& mcfg, const ModelParams* init = nullptr, const EpochCallback& on_epoch = {});

/// Mean gradient of the total loss over `batch` (accumulated into `grads`,
/// which is reset first). Returns the mean loss terms; `correct` (optional)
/// receives the number of points whose argmax matches the label.
LossTerms batch_gradient(const Network& net, const ModelParams& params, std::span<const Sample* const> batch,
                         std::span<const double> weights, ModelParams& grads, std::size_t* correct = nullptr);

/// Labels for every cuboid point: test-mode split, forward, argmax, then a
/// majority vote over repeated occurrences (ties to the lowest id).
std::vector<std::uint8_t> predict(const Network& net, const ModelParams& params, std::span<const Vec3> cuboid,
                                  std::uint64_t seed);

/// Majority vote over per-occurrence predictions; votes[i] lists the labels
/// predicted for point i.
std::uint8_t majority_vote(std::span<const std::uint8_t> votes, int num_categories);

metrics::ConfusionMatrix evaluate(const Network& net, const ModelParams& params, std::span<const EvalCloud> clouds,
                                  std::uint64_t seed);

std::string history_csv(const std::vector<EpochRecord>& history);

// --- checkpoints ---------------------------------------------------------------

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  nlohmann::json meta = nlohmann::json::object();  ///< config echo, provenance
};

/// Binary layout: "MSCK", u32 version, u32 JSON length, JSON (config + meta),
/// u32 array count, then per array: u32 name length, name, u32 rows, u32 cols,
/// rows*cols f64. All integers little-endian.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::vector<char> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::vector<char>& bytes);

Stage parse_stage(const std::string& s);
std::string to_string(Stage s);

}  // namespace motorseg::model
