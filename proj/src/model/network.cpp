#include "motorseg/model.hpp"

#include "motorseg/core.hpp"
#include "motorseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace motorseg::model {

using nn::column_max;
using nn::hconcat;
using nn::matmul;
using nn::matmul_nt;
using nn::matmul_tn_acc;

// --- config ------------------------------------------------------------------

void ModelConfig::validate() const {
  if (d < 1 || head_hidden < 1 || edge_widths.empty() || stn_widths.size() != 2)
    throw ValidationError("model widths must be >= 1 with two STN layers and at least one EdgeConv layer");
  for (auto w : edge_widths)
    if (w < 1) throw ValidationError("EdgeConv widths must be >= 1");
  for (auto w : stn_widths)
    if (w < 1) throw ValidationError("STN widths must be >= 1");
  if (!(alpha >= 0.0 && beta >= 0.0)) throw ValidationError("alpha and beta must be >= 0");
  if (k_graph < 1) throw ValidationError("k_graph must be >= 1");
  if (S <= k_graph) throw ValidationError("S must exceed k_graph");
  if (patch_branch && S < patch_size) throw ValidationError("S must be at least the patch size");
  if (num_categories < 2 || kernels_per_category < 1 || patch_size < 1)
    throw ValidationError("need >= 2 categories, >= 1 kernel per category and patch size >= 1");
}

ModelConfig ModelConfig::small() { return ModelConfig{}; }

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.S = 64;
  c.k_graph = 10;
  c.d = 8;
  c.edge_widths = {8, 8, 8};
  c.stn_widths = {8, 8};
  c.head_hidden = 8;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"S", c.S},
       {"k_graph", c.k_graph},
       {"num_categories", c.num_categories},
       {"kernels_per_category", c.kernels_per_category},
       {"patch_size", c.patch_size},
       {"d", c.d},
       {"edge_widths", c.edge_widths},
       {"stn_widths", c.stn_widths},
       {"head_hidden", c.head_hidden},
       {"alpha", c.alpha},
       {"beta", c.beta},
       {"class_weights", c.class_weights},
       {"patch_branch", c.patch_branch},
       {"stn", c.stn},
       {"normalize", c.normalize},
       {"focused_sampling", c.focused_sampling},
       {"matching", c.matching == KernelMatching::hungarian ? "hungarian" : "chamfer"}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.S = j.value("S", d.S);
  c.k_graph = j.value("k_graph", d.k_graph);
  c.num_categories = j.value("num_categories", d.num_categories);
  c.kernels_per_category = j.value("kernels_per_category", d.kernels_per_category);
  c.patch_size = j.value("patch_size", d.patch_size);
  c.d = j.value("d", d.d);
  c.edge_widths = j.value("edge_widths", d.edge_widths);
  c.stn_widths = j.value("stn_widths", d.stn_widths);
  c.head_hidden = j.value("head_hidden", d.head_hidden);
  c.alpha = j.value("alpha", d.alpha);
  c.beta = j.value("beta", d.beta);
  c.class_weights = j.value("class_weights", d.class_weights);
  c.patch_branch = j.value("patch_branch", d.patch_branch);
  c.stn = j.value("stn", d.stn);
  c.normalize = j.value("normalize", d.normalize);
  c.focused_sampling = j.value("focused_sampling", d.focused_sampling);
  const std::string m = j.value("matching", std::string("hungarian"));
  if (m == "hungarian") c.matching = KernelMatching::hungarian;
  else if (m == "chamfer") c.matching = KernelMatching::chamfer;
  else throw ValidationError("unknown kernel matching '" + m + "'");
  c.validate();
}

// --- params --------------------------------------------------------------------

std::size_t ModelParams::index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError("no parameter named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.names = names;
  for (const auto& v : values) z.values.emplace_back(v.rows, v.cols);
  return z;
}

bool ModelParams::all_finite() const {
  for (const auto& v : values)
    for (double x : v.data)
      if (!std::isfinite(x)) return false;
  return true;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  Rng rng(seed);
  auto weight = [&](const std::string& name, std::size_t in, std::size_t out, double gain = std::sqrt(2.0)) {
    Matrix m(in, out);
    const double sd = gain / std::sqrt(static_cast<double>(in));
    for (auto& v : m.data) v = rng.normal(sd);
    p.names.push_back(name);
    p.values.push_back(std::move(m));
  };
  auto bias = [&](const std::string& name, std::size_t out) {
    p.names.push_back(name);
    p.values.emplace_back(1, out);
  };
  if (cfg.stn) {
    weight("stn.w1", 3, cfg.stn_widths[0]);
    bias("stn.b1", cfg.stn_widths[0]);
    weight("stn.w2", cfg.stn_widths[0], cfg.stn_widths[1]);
    bias("stn.b2", cfg.stn_widths[1]);
    p.names.push_back("stn.w3");
    p.values.emplace_back(cfg.stn_widths[1], 9);
    bias("stn.b3", 9);
  }
  std::size_t in = 3, concat = 0;
  for (std::size_t l = 0; l < cfg.edge_widths.size(); ++l) {
    const std::size_t out = cfg.edge_widths[l];
    const std::string pre = "edge" + std::to_string(l);
    weight(pre + ".wc", in, out, 1.0);
    weight(pre + ".we", in, out, 1.0);
    bias(pre + ".b", out);
    in = out;
    concat += out;
  }
  weight("fuse.w", concat, cfg.d);
  bias("fuse.b", cfg.d);
  if (cfg.patch_branch) {
    const auto k3 = static_cast<std::size_t>(cfg.num_kernels()) * 3;
    weight("kernel.w", cfg.d, k3, 0.05);
    p.names.push_back("kernel.b");
    Matrix kb(1, k3);
    for (auto& v : kb.data) v = rng.uniform(-0.5, 0.5);
    p.values.push_back(std::move(kb));
    weight("patch.w", 3, cfg.d);
    bias("patch.b", cfg.d);
    weight("attn.wq", cfg.d, cfg.d, 1.0);
    weight("attn.wk", cfg.d, cfg.d, 1.0);
    weight("attn.wv", cfg.d, cfg.d, 1.0);
    weight("attn.wo", 2 * cfg.d, cfg.d);
    bias("attn.bo", cfg.d);
  }
  weight("head.w1", 2 * cfg.d, cfg.head_hidden);
  bias("head.b1", cfg.head_hidden);
  weight("head.w2", cfg.head_hidden, static_cast<std::size_t>(cfg.num_categories), 1.0);
  bias("head.b2", static_cast<std::size_t>(cfg.num_categories));
  return p;
}

// --- helpers -------------------------------------------------------------------

namespace {

struct Signature {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  void add(std::uint64_t v) { h = mix_seed(h ^ v); }
  void add_signs(const Matrix& m) {
    std::uint64_t word = 0;
    std::size_t bits = 0;
    for (double v : m.data) {
      word = (word << 1) | (v > 0.0 ? 1u : 0u);
      if (++bits == 64) {
        add(word);
        word = 0;
        bits = 0;
      }
    }
    add(word ^ bits);
  }
  void add_indices(const std::vector<std::size_t>& v) {
    for (auto i : v) add(i);
  }
};

/// k nearest rows of `f` for every row, excluding the row itself; ascending
/// by (squared distance, index). Returns N x k row-major indices.
std::vector<std::size_t> feature_knn(const Matrix& f, std::size_t k) {
  const std::size_t n = f.rows, c = f.cols;
  if (k >= n) throw SizeError("k_graph must be smaller than the number of points");
  Matrix ft(c, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) ft(j, i) = f(i, j);
  std::vector<std::size_t> out(n * k);
  std::vector<double> dist(n);
  std::vector<std::pair<double, std::size_t>> cand(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist.begin(), dist.end(), 0.0);
    const double* fi = f.row(i);
    for (std::size_t a = 0; a < c; ++a) {
      const double v = fi[a];
      const double* col = ft.row(a);
      for (std::size_t j = 0; j < n; ++j) {
        const double diff = v - col[j];
        dist[j] += diff * diff;
      }
    }
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cand[m++] = {std::isnan(dist[j]) ? std::numeric_limits<double>::infinity() : dist[j], j};
    std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end());
    std::sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = cand[j].second;
  }
  return out;
}

Matrix minus(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

// --- forward -------------------------------------------------------------------

Network::Network(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ForwardResult Network::forward(const ModelParams& p, std::span<const Vec3> points,
                               const std::vector<bool>* slot_mask) const {
  return run(p, points, nullptr, slot_mask);
}

ForwardResult Network::forward_train(const ModelParams& p, std::span<const Vec3> points, Cache& cache) const {
  return run(p, points, &cache, nullptr);
}

ForwardResult Network::run(const ModelParams& p, std::span<const Vec3> points, Cache* cache,
                           const std::vector<bool>* slot_mask) const {
  const std::size_t n = points.size();
  if (n <= cfg_.k_graph) throw SizeError("need more points than k_graph");
  if (cfg_.patch_branch && n < cfg_.patch_size) throw SizeError("need at least patch_size points");
  Cache local;
  Cache& c = cache ? *cache : local;
  Signature sig;
  ForwardResult out;

  c.x = nn::from_points(points);
  if (cfg_.stn) {
    c.stn_a1 = matmul(c.x, p["stn.w1"]);
    nn::add_row_vector(c.stn_a1, p["stn.b1"]);
    c.stn_h1 = nn::lrelu(c.stn_a1);
    c.stn_a2 = matmul(c.stn_h1, p["stn.w2"]);
    nn::add_row_vector(c.stn_a2, p["stn.b2"]);
    c.stn_h2 = nn::lrelu(c.stn_a2);
    c.stn_pool = column_max(c.stn_h2);
    Matrix r = matmul(c.stn_pool.value, p["stn.w3"]);
    nn::add_row_vector(r, p["stn.b3"]);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) c.rotation(a, b) = (a == b ? 1.0 : 0.0) + r.data[3 * a + b];
    sig.add_signs(c.stn_a1);
    sig.add_signs(c.stn_a2);
    sig.add_indices(c.stn_pool.argmax);
    c.p = Matrix(n, 3);
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a) {
        double s = 0.0;
        for (int b = 0; b < 3; ++b) s += c.x(i, b) * c.rotation(a, b);
        c.p(i, a) = s;
      }
  } else {
    c.rotation = Mat3::Identity();
    c.p = c.x;
  }
  out.rotation = c.rotation;

  // EdgeConv stack
  c.edges.assign(cfg_.edge_widths.size(), {});
  const Matrix* input = &c.p;
  std::vector<Matrix> layer_out(cfg_.edge_widths.size());
  for (std::size_t l = 0; l < cfg_.edge_widths.size(); ++l) {
    const std::string pre = "edge" + std::to_string(l);
    const Matrix& wc = p[pre + ".wc"];
    const Matrix& we = p[pre + ".we"];
    const std::size_t width = wc.cols;
    auto& e = c.edges[l];
    e.input = *input;
    const auto nbr = feature_knn(e.input, cfg_.k_graph);
    sig.add_indices(nbr);
    Matrix u = matmul(e.input, minus(wc, we));
    nn::add_row_vector(u, p[pre + ".b"]);
    const Matrix v = matmul(e.input, we);
    e.z = Matrix(n, width);
    e.winner.assign(n * width, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t* ni = nbr.data() + i * cfg_.k_graph;
      for (std::size_t ch = 0; ch < width; ++ch) {
        std::size_t best = ni[0];
        double bv = v(best, ch);
        for (std::size_t j = 1; j < cfg_.k_graph; ++j) {
          const double val = v(ni[j], ch);
          if (val > bv) {
            bv = val;
            best = ni[j];
          }
        }
        e.z(i, ch) = u(i, ch) + bv;
        e.winner[i * width + ch] = best;
      }
    }
    sig.add_indices(e.winner);
    sig.add_signs(e.z);
    layer_out[l] = nn::lrelu(e.z);
    input = &layer_out[l];
  }
  c.concat = layer_out[0];
  for (std::size_t l = 1; l < layer_out.size(); ++l) c.concat = hconcat(c.concat, layer_out[l]);
  c.f_pre = matmul(c.concat, p["fuse.w"]);
  nn::add_row_vector(c.f_pre, p["fuse.b"]);
  sig.add_signs(c.f_pre);
  c.f = nn::lrelu(c.f_pre);
  c.global_pool = column_max(c.f);
  sig.add_indices(c.global_pool.argmax);
  const Matrix& g = c.global_pool.value;
  out.point_features = c.f;
  out.global_feature = g;

  const Matrix* fused = &c.f;
  if (cfg_.patch_branch) {
    const auto nk = static_cast<std::size_t>(cfg_.num_kernels());
    Matrix kp = matmul(g, p["kernel.w"]);
    nn::add_row_vector(kp, p["kernel.b"]);
    out.kernels = Matrix(nk, 3);
    std::copy(kp.data.begin(), kp.data.end(), out.kernels.data.begin());
    const std::vector<Vec3> xs = nn::to_points(c.x);
    c.snapped.assign(nk, 0);
    c.patch_members.assign(nk, {});
    for (std::size_t m = 0; m < nk; ++m) {
      const Vec3 kv(out.kernels(m, 0), out.kernels(m, 1), out.kernels(m, 2));
      c.snapped[m] = kv.allFinite() ? core::knn(xs, kv, 1, false).front() : 0;
      c.patch_members[m] = core::knn(xs, xs[c.snapped[m]], cfg_.patch_size, false);
      sig.add_indices(c.patch_members[m]);
    }
    sig.add_indices(c.snapped);
    out.snapped = c.snapped;

    const Matrix& wp = p["patch.w"];
    const std::size_t d = wp.cols;
    c.patch_pre = Matrix(nk, d);
    c.patch_winner.assign(nk * d, 0);
    for (std::size_t m = 0; m < nk; ++m) {
      const auto& mem = c.patch_members[m];
      Matrix q(mem.size(), 3);
      for (std::size_t j = 0; j < mem.size(); ++j)
        for (int a = 0; a < 3; ++a) q(j, a) = c.p(mem[j], a) - c.p(c.snapped[m], a);
      const Matrix act = matmul(q, wp);
      for (std::size_t ch = 0; ch < d; ++ch) {
        std::size_t best = 0;
        double bv = act(0, ch);
        for (std::size_t j = 1; j < mem.size(); ++j)
          if (act(j, ch) > bv) {
            bv = act(j, ch);
            best = j;
          }
        c.patch_pre(m, ch) = bv + p["patch.b"].data[ch];
        c.patch_winner[m * d + ch] = best;
      }
    }
    sig.add_indices(c.patch_winner);
    sig.add_signs(c.patch_pre);
    c.patch_features = nn::lrelu(c.patch_pre);

    c.q = matmul(c.f, p["attn.wq"]);
    c.k = matmul(c.patch_features, p["attn.wk"]);
    c.v = matmul(c.patch_features, p["attn.wv"]);
    c.attn = matmul_nt(c.q, c.k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.q.cols));
    for (std::size_t i = 0; i < n; ++i) {
      double* row = c.attn.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < nk; ++m) {
        if (slot_mask && !(*slot_mask)[m]) continue;
        row[m] *= scale;
        mx = std::max(mx, row[m]);
      }
      double sum = 0.0;
      for (std::size_t m = 0; m < nk; ++m) {
        if (slot_mask && !(*slot_mask)[m]) {
          row[m] = 0.0;
          continue;
        }
        row[m] = std::exp(row[m] - mx);
        sum += row[m];
      }
      for (std::size_t m = 0; m < nk; ++m) row[m] /= sum;
    }
    c.o = matmul(c.attn, c.v);
    c.g = hconcat(c.f, c.o);
    c.fused_pre = matmul(c.g, p["attn.wo"]);
    nn::add_row_vector(c.fused_pre, p["attn.bo"]);
    sig.add_signs(c.fused_pre);
    c.fused = nn::lrelu(c.fused_pre);
    fused = &c.fused;
    out.attention = c.attn;
    out.patch_features = c.patch_features;
  }

  Matrix gb(n, g.cols);
  for (std::size_t i = 0; i < n; ++i) std::copy(g.data.begin(), g.data.end(), gb.row(i));
  c.head_in = hconcat(*fused, gb);
  c.head_pre = matmul(c.head_in, p["head.w1"]);
  nn::add_row_vector(c.head_pre, p["head.b1"]);
  sig.add_signs(c.head_pre);
  c.head_h = nn::lrelu(c.head_pre);
  out.logits = matmul(c.head_h, p["head.w2"]);
  nn::add_row_vector(out.logits, p["head.b2"]);
  out.signature = sig.h;
  return out;
}

// --- backward ------------------------------------------------------------------

void Network::backward(const ModelParams& p, const Cache& c, const Matrix& d_logits, const Mat3& d_rotation,
                       const Matrix& d_kernels, ModelParams& grads) const {
  const std::size_t n = c.x.rows;
  auto G = [&](const char* name) -> Matrix& { return grads[name]; };

  // head
  matmul_tn_acc(c.head_h, d_logits, G("head.w2"));
  nn::column_sum_acc(d_logits, G("head.b2"));
  Matrix dh = matmul_nt(d_logits, p["head.w2"]);
  nn::lrelu_backward_inplace(dh, c.head_pre);
  matmul_tn_acc(c.head_in, dh, G("head.w1"));
  nn::column_sum_acc(dh, G("head.b1"));
  const Matrix d_head_in = matmul_nt(dh, p["head.w1"]);
  const std::size_t d = c.f.cols;
  Matrix d_fused(n, d), dg(1, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = d_head_in.row(i);
    std::copy(r, r + d, d_fused.row(i));
    for (std::size_t j = 0; j < d; ++j) dg.data[j] += r[d + j];
  }

  Matrix df(n, d);
  Matrix dp(n, 3);
  if (cfg_.patch_branch) {
    const auto nk = static_cast<std::size_t>(cfg_.num_kernels());
    Matrix dz = d_fused;
    nn::lrelu_backward_inplace(dz, c.fused_pre);
    matmul_tn_acc(c.g, dz, G("attn.wo"));
    nn::column_sum_acc(dz, G("attn.bo"));
    const Matrix dgc = matmul_nt(dz, p["attn.wo"]);
    Matrix d_o(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = dgc.row(i);
      double* fr = df.row(i);
      for (std::size_t j = 0; j < d; ++j) fr[j] += r[j];
      std::copy(r + d, r + 2 * d, d_o.row(i));
    }
    // o = A v
    Matrix da = matmul_nt(d_o, c.v);  // n x nk
    Matrix dv(nk, c.v.cols);
    matmul_tn_acc(c.attn, d_o, dv);
    // softmax backward, then the 1/sqrt(d) scale
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.q.cols));
    for (std::size_t i = 0; i < n; ++i) {
      const double* a = c.attn.row(i);
      double* g = da.row(i);
      double dot = 0.0;
      for (std::size_t m = 0; m < nk; ++m) dot += a[m] * g[m];
      for (std::size_t m = 0; m < nk; ++m) g[m] = a[m] * (g[m] - dot) * scale;
    }
    const Matrix dq = matmul(da, c.k);
    Matrix dk(nk, c.k.cols);
    matmul_tn_acc(da, c.q, dk);
    matmul_tn_acc(c.f, dq, G("attn.wq"));
    add_into(df, matmul_nt(dq, p["attn.wq"]));
    matmul_tn_acc(c.patch_features, dk, G("attn.wk"));
    matmul_tn_acc(c.patch_features, dv, G("attn.wv"));
    Matrix dpf = matmul_nt(dk, p["attn.wk"]);
    add_into(dpf, matmul_nt(dv, p["attn.wv"]));

    // patch encoder: pre[m][ch] = (P[w] - P[s]) . Wp[:,ch] + b[ch]
    nn::lrelu_backward_inplace(dpf, c.patch_pre);
    Matrix& gwp = G("patch.w");
    Matrix& gbp = G("patch.b");
    const Matrix& wp = p["patch.w"];
    for (std::size_t m = 0; m < nk; ++m) {
      const std::size_t s = c.snapped[m];
      for (std::size_t ch = 0; ch < d; ++ch) {
        const double gval = dpf(m, ch);
        if (gval == 0.0) continue;
        const std::size_t w = c.patch_members[m][c.patch_winner[m * d + ch]];
        gbp.data[ch] += gval;
        for (int a = 0; a < 3; ++a) {
          gwp(a, ch) += (c.p(w, a) - c.p(s, a)) * gval;
          dp(w, a) += wp(a, ch) * gval;
          dp(s, a) -= wp(a, ch) * gval;
        }
      }
    }

    // kernel head
    Matrix dkp(1, nk * 3);
    std::copy(d_kernels.data.begin(), d_kernels.data.end(), dkp.data.begin());
    matmul_tn_acc(c.global_pool.value, dkp, G("kernel.w"));
    nn::column_sum_acc(dkp, G("kernel.b"));
    add_into(dg, matmul_nt(dkp, p["kernel.w"]));
  } else {
    df = d_fused;
  }

  nn::column_max_backward(c.global_pool, dg, df);
  nn::lrelu_backward_inplace(df, c.f_pre);
  matmul_tn_acc(c.concat, df, G("fuse.w"));
  nn::column_sum_acc(df, G("fuse.b"));
  const Matrix dconcat = matmul_nt(df, p["fuse.w"]);

  // EdgeConv stack in reverse
  const std::size_t layers = cfg_.edge_widths.size();
  std::vector<std::size_t> offset(layers, 0);
  for (std::size_t l = 1; l < layers; ++l) offset[l] = offset[l - 1] + cfg_.edge_widths[l - 1];
  Matrix carry;  // gradient w.r.t. the output of layer l from layer l+1
  for (std::size_t li = layers; li-- > 0;) {
    const auto& e = c.edges[li];
    const std::string pre = "edge" + std::to_string(li);
    const std::size_t width = cfg_.edge_widths[li];
    Matrix dy(n, width);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < width; ++ch) dy(i, ch) = dconcat(i, offset[li] + ch);
    if (li + 1 < layers) add_into(dy, carry);
    nn::lrelu_backward_inplace(dy, e.z);
    const Matrix& du = dy;
    Matrix dv(n, width);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < width; ++ch) dv(e.winner[i * width + ch], ch) += du(i, ch);
    matmul_tn_acc(e.input, du, G((pre + ".wc").c_str()));
    matmul_tn_acc(e.input, minus(dv, du), G((pre + ".we").c_str()));
    nn::column_sum_acc(du, G((pre + ".b").c_str()));
    const Matrix& wc = p[pre + ".wc"];
    const Matrix& we = p[pre + ".we"];
    Matrix din = matmul_nt(du, minus(wc, we));
    add_into(din, matmul_nt(dv, we));
    carry = std::move(din);
  }
  add_into(dp, carry);

  if (cfg_.stn) {
    // P = X R^T  =>  dR = dP^T X
    Mat3 dr = d_rotation;
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) dr(a, b) += dp(i, a) * c.x(i, b);
    Matrix drv(1, 9);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) drv.data[3 * a + b] = dr(a, b);
    matmul_tn_acc(c.stn_pool.value, drv, G("stn.w3"));
    nn::column_sum_acc(drv, G("stn.b3"));
    const Matrix dpool = matmul_nt(drv, p["stn.w3"]);
    Matrix dh2(n, c.stn_h2.cols);
    nn::column_max_backward(c.stn_pool, dpool, dh2);
    nn::lrelu_backward_inplace(dh2, c.stn_a2);
    matmul_tn_acc(c.stn_h1, dh2, G("stn.w2"));
    nn::column_sum_acc(dh2, G("stn.b2"));
    Matrix dh1 = matmul_nt(dh2, p["stn.w2"]);
    nn::lrelu_backward_inplace(dh1, c.stn_a1);
    matmul_tn_acc(c.x, dh1, G("stn.w1"));
    nn::column_sum_acc(dh1, G("stn.b1"));
  }
  (void)transpose;
}

}  // namespace motorseg::model
