#include "doctest.h"

#include "motorseg/core.hpp"
#include "motorseg/imbalance.hpp"
#include "motorseg/random.hpp"

#include "../support/weights_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace motorseg;
using namespace motorseg::imbalance;

TEST_CASE("focused sampling rule (a): mutual nearest pair") {
  const std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(3, 0, 0)};
  const std::vector<std::uint8_t> l{5, 5};
  const auto r = focused_sampling(p, l, 5);
  REQUIRE(r.points.size() == 4);
  CHECK(r.points[2] == Vec3(1, 0, 0));
  CHECK(r.points[3] == Vec3(2, 0, 0));
}

TEST_CASE("focused sampling rule (b): one-sided nearest") {
  const std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(3, 0, 0), Vec3(4, 0, 0)};
  const std::vector<std::uint8_t> l{5, 5, 5};
  const auto r = focused_sampling(p, l, 5);
  REQUIRE(r.points.size() == 6);
  CHECK(r.points[3] == Vec3(2, 0, 0));
  CHECK(r.added_from[0] == 0);
  CHECK(r.added_towards[0] == 1);
}

TEST_CASE("focused sampling doubles the tail and leaves the rest untouched") {
  Rng rng(1);
  std::vector<Vec3> p;
  std::vector<std::uint8_t> l;
  for (int i = 0; i < 300; ++i) {
    p.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    l.push_back(i < 21 ? 5 : static_cast<std::uint8_t>(rng.uniform_int(0, 4)));
  }
  std::shuffle(l.begin(), l.end(), rng.engine());
  const auto r = focused_sampling(p, l, 5);
  const auto count = [](const std::vector<std::uint8_t>& v, int c) { return std::count(v.begin(), v.end(), c); };
  CHECK(count(r.labels, 5) == 42);
  for (int c = 0; c < 5; ++c) CHECK(count(r.labels, c) == count(l, c));
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(r.points[i] == p[i]);
    CHECK(r.labels[i] == l[i]);
  }
}

TEST_CASE("focused sampling with fewer than two tail points warns") {
  const std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const std::vector<std::uint8_t> l{5, 0};
  const auto r = focused_sampling(p, l, 5);
  CHECK(r.points.size() == 2);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("class weight examples") {
  const std::vector<std::size_t> even{50, 50};
  const auto a = class_weights(even);
  CHECK(a.scaled_ratio[0] == doctest::Approx(0.5));
  CHECK(a.factor == doctest::Approx(0.5));
  CHECK(a.weight[0] == doctest::Approx(0.25));
  CHECK(a.weight[1] == doctest::Approx(0.25));

  // frozen from a 50-digit decimal evaluation
  const std::vector<std::size_t> skew{64, 35, 1};
  const auto b = class_weights(skew);
  CHECK(b.t[1] == doctest::Approx(1.22284283493151944146).epsilon(1e-13));
  CHECK(b.t[2] == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(b.scaled_ratio[0] == doctest::Approx(0.16069825745663472254).epsilon(1e-13));
  CHECK(b.scaled_ratio[2] == doctest::Approx(0.64279302982653889019).epsilon(1e-13));
  CHECK(b.factor == doctest::Approx(0.17805286452140084687).epsilon(1e-13));
  CHECK(b.weight[0] == doctest::Approx(0.02861278506375137568).epsilon(1e-13));
  CHECK(b.weight[1] == doctest::Approx(0.03498893920264396847).epsilon(1e-13));
  CHECK(b.weight[2] == doctest::Approx(0.11445114025500550272).epsilon(1e-13));
}

TEST_CASE("class weights agree with the quad-precision oracle and satisfy invariants") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> counts(6);
    for (auto& c : counts) c = rng.uniform_int(0, 3) == 0 ? 0 : static_cast<std::size_t>(rng.uniform_int(1, 100000));
    counts[rng.index(6)] += 1;
    const auto w = class_weights(counts);
    const auto q = oracle::quad_class_weights(counts);
    double sr = 0, r = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      if (counts[i] == 0) {
        CHECK(w.weight[i] == 0.0);
        continue;
      }
      CHECK(oracle::rel_error(w.weight[i], q.weight[i]) < 1e-12);
      CHECK(oracle::rel_error(w.scaled_ratio[i], q.scaled_ratio[i]) < 1e-12);
      CHECK(w.weight[i] == doctest::Approx(w.scaled_ratio[i] * w.factor).epsilon(1e-15));
      sr += w.scaled_ratio[i];
      r += w.ratio[i];
    }
    CHECK(sr == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        if (counts[i] > 0 && counts[j] > 0 && counts[i] < counts[j]) CHECK(w.weight[i] > w.weight[j]);
    const auto rarest = std::min_element(counts.begin(), counts.end(), [](auto x, auto y) {
      return (x == 0 ? std::numeric_limits<std::size_t>::max() : x) < (y == 0 ? std::numeric_limits<std::size_t>::max() : y);
    });
    CHECK(w.weight[rarest - counts.begin()] == *std::max_element(w.weight.begin(), w.weight.end()));

    auto scaled = counts;
    for (auto& c : scaled) c *= 7;
    const auto ws = class_weights(scaled);
    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2}, permuted(6);
    for (std::size_t i = 0; i < 6; ++i) permuted[i] = counts[perm[i]];
    const auto wp = class_weights(permuted);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(ws.weight[i] == doctest::Approx(w.weight[i]).epsilon(1e-13));
      CHECK(wp.weight[i] == doctest::Approx(w.weight[perm[i]]).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(class_weights(std::vector<std::size_t>(6, 0)), ValidationError);
}

TEST_CASE("kernel ground truth: exact population, padding and absence") {
  std::vector<Vec3> p;
  std::vector<std::uint8_t> l;
  for (int i = 0; i < 8; ++i) {
    p.emplace_back(i, 0.5 * i * i, 0);
    l.push_back(2);
  }
  for (int i = 0; i < 3; ++i) {
    p.emplace_back(0, 0, 10 + i);
    l.push_back(1);
  }
  const auto ks = kernel_ground_truth(p, l, 8, 4);
  CHECK_FALSE(ks.present[5]);
  CHECK(ks.kernels[5].empty());
  REQUIRE(ks.present[2]);
  auto idx = ks.indices[2];
  std::sort(idx.begin(), idx.end());
  for (int i = 0; i < 8; ++i) CHECK(idx[i] == static_cast<std::size_t>(i));
  REQUIRE(ks.present[1]);
  CHECK(ks.indices[1] == std::vector<std::size_t>{8, 9, 10, 8, 8, 8, 8, 8});
  CHECK(ks.kernels[1][7] == p[8]);
}

TEST_CASE("kernel ground truth snaps centroids to the nearest member") {
  Rng rng(3);
  std::vector<Vec3> p;
  std::vector<std::uint8_t> l;
  for (int i = 0; i < 1200; ++i) {
    p.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    l.push_back(static_cast<std::uint8_t>(i < 200 ? 5 : rng.uniform_int(0, 4)));
  }
  std::shuffle(l.begin(), l.end(), rng.engine());
  const auto ks = kernel_ground_truth(p, l, 8, 11);
  const auto again = kernel_ground_truth(p, l, 8, 11);
  CHECK(ks.indices == again.indices);
  for (int c = 0; c < 6; ++c) {
    REQUIRE(ks.present[c]);
    std::vector<Vec3> members;
    std::vector<std::size_t> member_idx;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (l[i] == c) {
        members.push_back(p[i]);
        member_idx.push_back(i);
      }
    const auto km = core::kmeans(members, 8, mix_seed(11 + static_cast<std::uint64_t>(c)));
    for (int k = 0; k < 8; ++k) {
      CHECK(l[ks.indices[c][k]] == c);
      CHECK(ks.kernels[c][k] == p[ks.indices[c][k]]);
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < members.size(); ++j) {
        const double d = (members[j] - km.centroids[k]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      CHECK(ks.indices[c][k] == member_idx[best]);
    }
  }
}
