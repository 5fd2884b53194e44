#pragma once

// Finite-difference check of the network's analytic parameter gradients.
// The network is piecewise smooth; every difference quotient only uses
// evaluations whose forward signature matches the unperturbed one, so it
// differentiates the same smooth piece as the analytic pass.

#include "motorseg/imbalance.hpp"
#include "motorseg/model.hpp"
#include "motorseg/random.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace gradcheck {

using namespace motorseg;
using namespace motorseg::model;

struct Problem {
  ModelConfig cfg;
  ModelParams params;
  std::vector<Vec3> points;
  std::vector<std::uint8_t> labels;
  Mat3 rotation_target = Mat3::Identity();
  imbalance::KernelSet kernels;
  std::vector<double> weights;
};

/// Random tiny-profile problem with every loss term active and all
/// categories present. Biases and the STN head are randomised too, so no
/// parameter sits at its initial special value.
inline Problem make_problem(std::uint64_t seed) {
  Problem pb;
  pb.cfg = ModelConfig::tiny();
  pb.cfg.focused_sampling = false;
  Rng rng(seed);
  for (std::size_t i = 0; i < pb.cfg.S; ++i) {
    Vec3 p;
    do p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    while (p.norm() > 1.0);
    pb.points.push_back(p);
    pb.labels.push_back(static_cast<std::uint8_t>(i < 6 ? i : rng.index(6)));
  }
  pb.params = init_params(pb.cfg, mix_seed(seed ^ 0x9c));
  for (std::size_t a = 0; a < pb.params.values.size(); ++a) {
    const auto& name = pb.params.names[a];
    if (name.find(".b") != std::string::npos || name == "stn.w3")
      for (auto& v : pb.params.values[a].data) v += rng.normal(0.1);
  }
  const Vec3 axis = Vec3(rng.normal(1), rng.normal(1), rng.normal(1)).normalized();
  pb.rotation_target = rotation_about_axis(axis, rng.uniform(-1.0, 1.0));
  pb.kernels = imbalance::kernel_ground_truth(pb.points, pb.labels, pb.cfg.kernels_per_category, seed);
  std::vector<std::size_t> counts(6, 0);
  for (auto l : pb.labels) ++counts[l];
  pb.weights = imbalance::class_weights(counts).weight;
  return pb;
}

struct Eval {
  double loss;
  std::uint64_t signature;
};

inline Eval evaluate(const Network& net, const Problem& pb, const ModelParams& p) {
  const auto out = net.forward(p, pb.points);
  const auto l = total_loss(out, pb.labels, pb.rotation_target, pb.kernels, pb.weights, pb.cfg);
  return {l.terms.total, out.signature};
}

inline ModelParams analytic(const Network& net, const Problem& pb) {
  Cache cache;
  const auto out = net.forward_train(pb.params, pb.points, cache);
  const auto l = total_loss(out, pb.labels, pb.rotation_target, pb.kernels, pb.weights, pb.cfg);
  ModelParams g = pb.params.zeros_like();
  net.backward(pb.params, cache, l.d_logits, l.d_rotation, l.d_kernels, g);
  return g;
}

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

struct Report {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t one_sided = 0;  ///< central differences crossed a kink at every step
  std::size_t unresolved = 0;  ///< no same-piece quotient found; counted as failures
};

inline Report check(const Problem& pb, double floor) {
  const Network net(pb.cfg);
  const ModelParams grad = analytic(net, pb);
  const Eval base = evaluate(net, pb, pb.params);
  ModelParams p = pb.params;
  Report rep;
  for (std::size_t a = 0; a < p.values.size(); ++a) {
    for (std::size_t i = 0; i < p.values[a].size(); ++i) {
      double& w = p.values[a].data[i];
      const double w0 = w;
      auto at = [&](double delta) {
        w = w0 + delta;
        const Eval e = evaluate(net, pb, p);
        w = w0;
        return e;
      };
      double numeric = 0.0;
      bool found = false;
      for (double h : {1e-5, 1e-6, 1e-7}) {
        const Eval plus = at(h), minus = at(-h);
        if (plus.signature == base.signature && minus.signature == base.signature) {
          numeric = (plus.loss - minus.loss) / (2 * h);
          found = true;
          break;
        }
      }
      if (!found) {
        for (double h : {1e-6, 1e-7, 1e-8}) {
          for (double side : {1.0, -1.0}) {
            const Eval e1 = at(side * h), e2 = at(side * 2 * h);
            if (e1.signature == base.signature && e2.signature == base.signature) {
              numeric = side * (-3 * base.loss + 4 * e1.loss - e2.loss) / (2 * h);
              found = true;
              break;
            }
          }
          if (found) break;
        }
        if (found) ++rep.one_sided;
      }
      if (!found) {
        ++rep.unresolved;
        continue;
      }
      ++rep.checked;
      const double rel = relative_error(grad.values[a].data[i], numeric, floor);
      if (rel > rep.max_rel) {
        rep.max_rel = rel;
        rep.worst = p.names[a] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

}  // namespace gradcheck
