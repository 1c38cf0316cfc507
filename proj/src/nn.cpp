// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace mavis {

Param* ParamStore::create(const std::string& name, std::vector<int64_t> shape, bool no_decay) {
  if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Tensor(std::move(shape));
  p->no_decay = no_decay;
  Param* raw = p.get();
  params_.push_back(std::move(p));
  index_[name] = raw;
  return raw;
}

Param* ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: missing parameter " + name);
  return it->second;
}

const Param* ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: missing parameter " + name);
  return it->second;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) != 0; }

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->name);
  return out;
}

int64_t ParamStore::total_params() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) {
    if (!p->grad.data.empty())
      std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  }
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& p : params_) {
    Param* q = out.create(p->name, p->value.shape, p->no_decay);
    q->value.data = p->value.data;
  }
  return out;
}

double ParamStore::max_param_distance(const ParamStore& other) const {
  if (params_.size() != other.params_.size())
    throw std::invalid_argument("ParamStore: structural mismatch (count)");
  double m = 0.0;
  for (size_t i = 0; i < params_.size(); ++i) {
    const Param& a = *params_[i];
    const Param& b = *other.params_[i];
    if (a.name != b.name || a.value.shape != b.value.shape)
      throw std::invalid_argument("ParamStore: structural mismatch at " + a.name);
    for (size_t j = 0; j < a.value.data.size(); ++j)
      m = std::max(m, std::fabs(a.value.data[j] - b.value.data[j]));
  }
  return m;
}

uint64_t ParamStore::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : params_) {
    h = fnv1a64(p->name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(p->value.data.data()),
                                 p->value.data.size() * sizeof(double)),
                h);
  }
  return h;
}

void ema_update_store(ParamStore& teacher, const ParamStore& student, double tau) {
  if (teacher.params().size() != student.params().size())
    throw std::invalid_argument("ema_update: structural mismatch (count)");
  for (size_t i = 0; i < teacher.params().size(); ++i) {
    Param& xi = *teacher.params()[i];
    const Param& theta = *student.params()[i];
    if (xi.name != theta.name || xi.value.shape != theta.value.shape)
      throw std::invalid_argument("ema_update: structural mismatch at " + xi.name);
    for (size_t j = 0; j < xi.value.data.size(); ++j)
      xi.value.data[j] = tau * xi.value.data[j] + (1.0 - tau) * theta.value.data[j];
  }
}

void init_kaiming(Param* p, Rng& rng, int64_t fan_in) {
  p->value.fill_normal(rng, 0.0, std::sqrt(2.0 / double(fan_in)));
}

void init_normal(Param* p, Rng& rng, double stddev) { p->value.fill_normal(rng, 0.0, stddev); }

void init_const(Param* p, double v) {
  for (auto& x : p->value.data) x = v;
}

// --- Linear -----------------------------------------------------------------

Linear::Linear(ParamStore& ps, const std::string& prefix, int64_t in_, int64_t out_, Rng& rng,
               bool bias)
    : in(in_), out(out_) {
  w = ps.create(prefix + ".w", {in, out});
  init_kaiming(w, rng, in);
  if (bias) {
    b = ps.create(prefix + ".b", {out}, /*no_decay=*/true);
    init_const(b, 0.0);
  }
}

Var Linear::forward(Tape& t, Var x) const {
  Var wv = t.leaf(&w->value, &w->grad, true);
  Var bv = b ? t.leaf(&b->value, &b->grad, true) : kNoVar;
  return t.linear(x, wv, bv);
}

// --- LayerNorm ---------------------------------------------------------------

LayerNormM::LayerNormM(ParamStore& ps, const std::string& prefix, int64_t dim) {
  gamma = ps.create(prefix + ".g", {dim}, true);
  beta = ps.create(prefix + ".b", {dim}, true);
  init_const(gamma, 1.0);
  init_const(beta, 0.0);
}

Var LayerNormM::forward(Tape& t, Var x) const {
  return t.layer_norm(x, t.leaf(&gamma->value, &gamma->grad, true),
                      t.leaf(&beta->value, &beta->grad, true));
}

// --- attention ----------------------------------------------------------------

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& prefix, int64_t dim_,
                                       int64_t kv_dim, int64_t heads_, Rng& rng)
    : heads(heads_), dim(dim_) {
  if (dim % heads != 0)
    throw std::invalid_argument("attention dim must be divisible by head count");
  wq = Linear(ps, prefix + ".q", dim, dim, rng);
  // No key bias: a shared shift of all keys cancels in softmax, so its
  // gradient is identically zero.
  wk = Linear(ps, prefix + ".k", kv_dim, dim, rng, /*bias=*/false);
  wv = Linear(ps, prefix + ".v", kv_dim, dim, rng);
  wo = Linear(ps, prefix + ".o", dim, dim, rng);
}

Var MultiHeadAttention::forward(Tape& t, Var q_in, Var kv_in, bool causal) const {
  int64_t tq = t.val(q_in).dim(0);
  int64_t tk = t.val(kv_in).dim(0);
  int64_t dk = dim / heads;
  Var q = wq.forward(t, q_in);
  Var k = wk.forward(t, kv_in);
  Var v = wv.forward(t, kv_in);
  Tensor causal_mask;
  if (causal) {
    causal_mask = Tensor({tq, tk});
    for (int64_t i = 0; i < tq; ++i)
      for (int64_t j = 0; j < tk; ++j) causal_mask.at2(i, j) = j > i ? -1e30 : 0.0;
  }
  std::vector<Var> head_outs;
  head_outs.reserve(static_cast<size_t>(heads));
  double inv_sqrt = 1.0 / std::sqrt(double(dk));
  for (int64_t h = 0; h < heads; ++h) {
    Var qh = t.slice_cols(q, h * dk, (h + 1) * dk);
    Var kh = t.slice_cols(k, h * dk, (h + 1) * dk);
    Var vh = t.slice_cols(v, h * dk, (h + 1) * dk);
    Var scores = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
    if (causal) scores = t.add_const_tensor(scores, causal_mask);
    Var probs = t.softmax_rows(scores);
    head_outs.push_back(t.matmul(probs, vh));
  }
  Var cat = t.concat_cols(head_outs);
  return wo.forward(t, cat);
}

// --- transformer layers ---------------------------------------------------------

EncoderLayer::EncoderLayer(ParamStore& ps, const std::string& prefix, int64_t dim, int64_t heads,
                           int64_t ffn, Rng& rng, int64_t conv_kernel) {
  ln1 = LayerNormM(ps, prefix + ".ln1", dim);
  attn = MultiHeadAttention(ps, prefix + ".attn", dim, dim, heads, rng);
  if (conv_kernel > 0) {
    tconv = TemporalConv{LayerNormM(ps, prefix + ".lnc", dim),
                         Conv1dM(ps, prefix + ".tconv", dim, dim, conv_kernel, 1,
                                 conv_kernel / 2, rng)};
  }
  ln2 = LayerNormM(ps, prefix + ".ln2", dim);
  ff1 = Linear(ps, prefix + ".ff1", dim, ffn, rng);
  ff2 = Linear(ps, prefix + ".ff2", ffn, dim, rng);
}

Var EncoderLayer::forward(Tape& t, Var x) const {
  Var h = ln1.forward(t, x);
  x = t.add(x, attn.forward(t, h, h, false));
  if (tconv) {
    Var hc = tconv->ln.forward(t, x);
    Var c = t.transpose2d(tconv->conv.forward(t, t.transpose2d(hc)));
    x = t.add(x, c);
  }
  Var h2 = ln2.forward(t, x);
  x = t.add(x, ff2.forward(t, t.relu(ff1.forward(t, h2))));
  return x;
}

DecoderLayer::DecoderLayer(ParamStore& ps, const std::string& prefix, int64_t dim,
                           int64_t mem_dim, int64_t heads, int64_t ffn, Rng& rng) {
  ln1 = LayerNormM(ps, prefix + ".ln1", dim);
  self_attn = MultiHeadAttention(ps, prefix + ".self", dim, dim, heads, rng);
  ln2 = LayerNormM(ps, prefix + ".ln2", dim);
  cross_attn = MultiHeadAttention(ps, prefix + ".cross", dim, mem_dim, heads, rng);
  ln3 = LayerNormM(ps, prefix + ".ln3", dim);
  ff1 = Linear(ps, prefix + ".ff1", dim, ffn, rng);
  ff2 = Linear(ps, prefix + ".ff2", ffn, dim, rng);
}

Var DecoderLayer::forward(Tape& t, Var x, Var memory) const {
  Var h = ln1.forward(t, x);
  x = t.add(x, self_attn.forward(t, h, h, /*causal=*/true));
  Var h2 = ln2.forward(t, x);
  x = t.add(x, cross_attn.forward(t, h2, memory, false));
  Var h3 = ln3.forward(t, x);
  x = t.add(x, ff2.forward(t, t.relu(ff1.forward(t, h3))));
  return x;
}

// --- transformer stack ------------------------------------------------------------

TransformerStack::TransformerStack(ParamStore& ps, const std::string& prefix, int64_t layers_n,
                                   int64_t dim_, int64_t heads, int64_t ffn,
                                   int64_t max_positions_, Rng& rng, int64_t conv_kernel)
    : dim(dim_), max_positions(max_positions_) {
  pos = ps.create(prefix + ".pos", {max_positions, dim}, true);
  init_normal(pos, rng, 0.02);
  layers.reserve(static_cast<size_t>(layers_n));
  for (int64_t i = 0; i < layers_n; ++i)
    layers.emplace_back(ps, prefix + ".layer" + std::to_string(i), dim, heads, ffn, rng,
                        conv_kernel);
  final_ln = LayerNormM(ps, prefix + ".final_ln", dim);
}

Var TransformerStack::forward(Tape& t, Var x) const {
  int64_t T = t.val(x).dim(0);
  if (T > max_positions)
    throw std::invalid_argument(
        strfmt("sequence length %lld exceeds max positions %lld", (long long)T,
               (long long)max_positions));
  Var pv = t.leaf(&pos->value, &pos->grad, true);
  x = t.add(x, t.slice_rows(pv, 0, T));
  for (const auto& layer : layers) x = layer.forward(t, x);
  return final_ln.forward(t, x);
}

// --- conv blocks -------------------------------------------------------------------

Conv2dM::Conv2dM(ParamStore& ps, const std::string& prefix, int64_t cin, int64_t cout, int64_t k,
                 int64_t stride_, int64_t pad_, Rng& rng, bool bias)
    : stride(stride_), pad(pad_) {
  w = ps.create(prefix + ".w", {cout, cin, k, k});
  init_kaiming(w, rng, cin * k * k);
  if (bias) {
    b = ps.create(prefix + ".b", {cout}, true);
    init_const(b, 0.0);
  }
}

Var Conv2dM::forward(Tape& t, Var x) const {
  Var wv = t.leaf(&w->value, &w->grad, true);
  Var bv = b ? t.leaf(&b->value, &b->grad, true) : kNoVar;
  return t.conv2d_frames(x, wv, bv, stride, pad);
}

Conv1dM::Conv1dM(ParamStore& ps, const std::string& prefix, int64_t cin, int64_t cout, int64_t k,
                 int64_t stride_, int64_t pad_, Rng& rng, bool bias)
    : stride(stride_), pad(pad_) {
  w = ps.create(prefix + ".w", {cout, cin, k});
  init_kaiming(w, rng, cin * k);
  if (bias) {
    b = ps.create(prefix + ".b", {cout}, true);
    init_const(b, 0.0);
  }
}

Var Conv1dM::forward(Tape& t, Var x) const {
  Var wv = t.leaf(&w->value, &w->grad, true);
  Var bv = b ? t.leaf(&b->value, &b->grad, true) : kNoVar;
  return t.conv1d(x, wv, bv, stride, pad);
}

GroupNormM::GroupNormM(ParamStore& ps, const std::string& prefix, int64_t channels, bool seq_)
    : seq(seq_) {
  gamma = ps.create(prefix + ".g", {channels}, true);
  beta = ps.create(prefix + ".b", {channels}, true);
  init_const(gamma, 1.0);
  init_const(beta, 0.0);
}

Var GroupNormM::forward(Tape& t, Var x) const {
  Var g = t.leaf(&gamma->value, &gamma->grad, true);
  Var b = t.leaf(&beta->value, &beta->grad, true);
  return seq ? t.group_norm_seq(x, g, b) : t.group_norm_frames(x, g, b);
}

ResBlock2d::ResBlock2d(ParamStore& ps, const std::string& prefix, int64_t cin, int64_t cout,
                       int64_t stride, Rng& rng) {
  conv1 = Conv2dM(ps, prefix + ".conv1", cin, cout, 3, stride, 1, rng, false);
  gn1 = GroupNormM(ps, prefix + ".gn1", cout, false);
  conv2 = Conv2dM(ps, prefix + ".conv2", cout, cout, 3, 1, 1, rng, false);
  gn2 = GroupNormM(ps, prefix + ".gn2", cout, false);
  if (stride != 1 || cin != cout) {
    down = Conv2dM(ps, prefix + ".down", cin, cout, 1, stride, 0, rng, false);
    down_gn = GroupNormM(ps, prefix + ".down_gn", cout, false);
  }
}

Var ResBlock2d::forward(Tape& t, Var x) const {
  Var h = t.relu(gn1.forward(t, conv1.forward(t, x)));
  h = gn2.forward(t, conv2.forward(t, h));
  Var skip = x;
  if (down) skip = down_gn->forward(t, down->forward(t, x));
  return t.relu(t.add(h, skip));
}

ResBlock1d::ResBlock1d(ParamStore& ps, const std::string& prefix, int64_t cin, int64_t cout,
                       int64_t stride, int64_t kernel, Rng& rng) {
  int64_t padk = kernel / 2;
  conv1 = Conv1dM(ps, prefix + ".conv1", cin, cout, kernel, stride, padk, rng, false);
  gn1 = GroupNormM(ps, prefix + ".gn1", cout, true);
  conv2 = Conv1dM(ps, prefix + ".conv2", cout, cout, kernel, 1, padk, rng, false);
  gn2 = GroupNormM(ps, prefix + ".gn2", cout, true);
  if (stride != 1 || cin != cout) {
    down = Conv1dM(ps, prefix + ".down", cin, cout, 1, stride, 0, rng, false);
    down_gn = GroupNormM(ps, prefix + ".down_gn", cout, true);
  }
}

Var ResBlock1d::forward(Tape& t, Var x) const {
  Var h = t.relu(gn1.forward(t, conv1.forward(t, x)));
  h = gn2.forward(t, conv2.forward(t, h));
  Var skip = x;
  if (down) skip = down_gn->forward(t, down->forward(t, x));
  return t.relu(t.add(h, skip));
}

}  // namespace mavis
