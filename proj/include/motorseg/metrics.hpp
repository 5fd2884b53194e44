#pragma once

#include "motorseg/common.hpp"

#include "json.hpp"

#include <span>
#include <string>
#include <vector>

namespace motorseg::metrics {

/// Rows are ground truth, columns prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = kNumCategories);

  /// Throws ValidationError on length mismatch or out-of-range labels.
  void accumulate(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  std::uint64_t at(int truth, int predicted) const { return counts_[index(truth, predicted)]; }
  std::uint64_t& at(int truth, int predicted) { return counts_[index(truth, predicted)]; }
  int num_classes() const { return m_; }
  std::uint64_t total() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t index(int t, int p) const { return static_cast<std::size_t>(t) * m_ + p; }
  int m_;
  std::vector<std::uint64_t> counts_;
};

struct IouResult {
  std::vector<double> per_class;  ///< NaN for classes absent from truth and prediction
  std::vector<bool> evaluated;
  double miou = 0.0;
  double screw_iou = 0.0;  ///< 0 when the screw class is absent from both
};

/// With include_background=false, class 0 is left out of the mean. Throws
/// ValidationError when no class remains to average.
IouResult iou(const ConfusionMatrix& conf, bool include_background = true);

nlohmann::json to_json(const ConfusionMatrix& conf, const IouResult& result);
/// One header row, then class,iou rows, then miou and screw_iou rows.
std::string to_csv(const IouResult& result);

}  // namespace motorseg::metrics
