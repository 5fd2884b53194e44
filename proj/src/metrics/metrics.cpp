#include "motorseg/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace motorseg::metrics {

ConfusionMatrix::ConfusionMatrix(int num_classes) : m_(num_classes) {
  if (num_classes < 1) throw ValidationError("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(m_) * m_, 0);
}

void ConfusionMatrix::accumulate(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> predicted) {
  if (truth.size() != predicted.size())
    throw ValidationError("truth has " + std::to_string(truth.size()) + " labels, prediction " +
                          std::to_string(predicted.size()));
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] >= m_ || predicted[i] >= m_)
      throw ValidationError("label out of range at index " + std::to_string(i));
  for (std::size_t i = 0; i < truth.size(); ++i) ++counts_[index(truth[i], predicted[i])];
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.m_ != m_) throw ValidationError("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

IouResult iou(const ConfusionMatrix& conf, bool include_background) {
  const int m = conf.num_classes();
  IouResult r;
  r.per_class.assign(m, std::numeric_limits<double>::quiet_NaN());
  r.evaluated.assign(m, false);
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < m; ++c) {
    std::uint64_t tp = conf.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < m; ++o) {
      if (o == c) continue;
      fp += conf.at(o, c);
      fn += conf.at(c, o);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    r.per_class[c] = static_cast<double>(tp) / static_cast<double>(denom);
    r.evaluated[c] = true;
    if (c == 0 && !include_background) continue;
    sum += r.per_class[c];
    ++n;
  }
  if (n == 0) throw ValidationError("IoU undefined: no class present in truth or prediction");
  r.miou = sum / n;
  r.screw_iou = (kScrewLabel < m && r.evaluated[kScrewLabel]) ? r.per_class[kScrewLabel] : 0.0;
  return r;
}

nlohmann::json to_json(const ConfusionMatrix& conf, const IouResult& result) {
  nlohmann::json rows = nlohmann::json::array(), per = nlohmann::json::object();
  for (int t = 0; t < conf.num_classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < conf.num_classes(); ++p) row.push_back(conf.at(t, p));
    rows.push_back(row);
    per[category_name(t)] = result.evaluated[t] ? nlohmann::json(result.per_class[t]) : nlohmann::json(nullptr);
  }
  return {{"confusion", rows}, {"per_class_iou", per}, {"miou", result.miou}, {"screw_iou", result.screw_iou}};
}

std::string to_csv(const IouResult& result) {
  std::ostringstream out;
  out.precision(10);
  out << "metric,value\n";
  for (std::size_t c = 0; c < result.per_class.size(); ++c) {
    out << "iou_" << category_name(static_cast<int>(c)) << ',';
    if (result.evaluated[c]) out << result.per_class[c];
    out << '\n';
  }
  out << "miou," << result.miou << "\nscrew_iou," << result.screw_iou << '\n';
  return out.str();
}

}  // namespace motorseg::metrics
