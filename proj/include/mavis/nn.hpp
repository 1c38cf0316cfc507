// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small neural-network building blocks over the tape. Parameters live in a
// ParamStore (an ordered name -> tensor map); modules hold raw pointers into
// the store and are rebuilt cheaply from a store + config.

#ifndef MAVIS_NN_HPP
#define MAVIS_NN_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mavis/autograd.hpp"
#include "mavis/common.hpp"
#include "mavis/tensor.hpp"

namespace mavis {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;  // lazily allocated by the tape
  // Parameters flagged no_decay are skipped by AdamW weight decay
  // (biases, norm affines, positional embeddings, mask tokens).
  bool no_decay = false;
};

class ParamStore {
 public:
  Param* create(const std::string& name, std::vector<int64_t> shape, bool no_decay = false);
  Param* get(const std::string& name);
  const Param* get(const std::string& name) const;
  bool contains(const std::string& name) const;
  // Creation-ordered parameter list.
  const std::vector<std::unique_ptr<Param>>& params() const { return params_; }
  std::vector<std::string> names() const;
  int64_t total_params() const;
  void zero_grad();
  // Deep copy preserving order, names and values; grads are dropped.
  ParamStore clone() const;
  // Max |student - other| over all matched parameters. Structures must match.
  double max_param_distance(const ParamStore& other) const;
  uint64_t fingerprint() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, Param*> index_;
};

// xi <- tau * xi + (1 - tau) * theta, applied name-wise. Throws on any
// structural mismatch between the two stores.
void ema_update_store(ParamStore& teacher, const ParamStore& student, double tau);

// --- initializers -----------------------------------------------------------

void init_kaiming(Param* p, Rng& rng, int64_t fan_in);
void init_normal(Param* p, Rng& rng, double stddev);
void init_const(Param* p, double v);

// --- modules ---------------------------------------------------------------

struct Linear {
  Param* w = nullptr;  // [in, out]
  Param* b = nullptr;
  int64_t in = 0, out = 0;
  Linear() = default;
  Linear(ParamStore& ps, const std::string& prefix, int64_t in, int64_t out, Rng& rng,
         bool bias = true);
  Var forward(Tape& t, Var x) const;
};

struct LayerNormM {
  Param* gamma = nullptr;
  Param* beta = nullptr;
  LayerNormM() = default;
  LayerNormM(ParamStore& ps, const std::string& prefix, int64_t dim);
  Var forward(Tape& t, Var x) const;
};

struct Conv2dM {
  Param* w = nullptr;  // [Cout, Cin, kh, kw]
  Param* b = nullptr;
  int64_t stride = 1, pad = 0;
  Conv2dM() = default;
  Conv2dM(ParamStore& ps, const std::string& prefix, int64_t cin, int64_t cout, int64_t k,
          int64_t stride, int64_t pad, Rng& rng, bool bias = true);
  Var forward(Tape& t, Var x) const;
};

struct Conv1dM {
  Param* w = nullptr;  // [Cout, Cin, k]
  Param* b = nullptr;
  int64_t stride = 1, pad = 0;
  Conv1dM() = default;
  Conv1dM(ParamStore& ps, const std::string& prefix, int64_t cin, int64_t cout, int64_t k,
          int64_t stride, int64_t pad, Rng& rng, bool bias = true);
  Var forward(Tape& t, Var x) const;
};

struct GroupNormM {
  Param* gamma = nullptr;
  Param* beta = nullptr;
  bool seq = false;  // true: [C,L] audio layout, false: [T,C,H,W]
  GroupNormM() = default;
  GroupNormM(ParamStore& ps, const std::string& prefix, int64_t channels, bool seq);
  Var forward(Tape& t, Var x) const;
};

struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int64_t heads = 0, dim = 0;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& prefix, int64_t dim, int64_t kv_dim,
                     int64_t heads, Rng& rng);
  // q_in: [Tq, dim]; kv_in: [Tk, kv_dim]; causal masks future positions.
  Var forward(Tape& t, Var q_in, Var kv_in, bool causal) const;
};

// Pre-norm encoder block. With conv_kernel > 0 a temporal-convolution
// sublayer runs between attention and the feed-forward (the
// convolution-augmented variant).
struct EncoderLayer {
  LayerNormM ln1, ln2;
  MultiHeadAttention attn;
  Linear ff1, ff2;
  struct TemporalConv {
    LayerNormM ln;
    Conv1dM conv;
  };
  std::optional<TemporalConv> tconv;
  EncoderLayer() = default;
  EncoderLayer(ParamStore& ps, const std::string& prefix, int64_t dim, int64_t heads,
               int64_t ffn, Rng& rng, int64_t conv_kernel = 0);
  Var forward(Tape& t, Var x) const;
};

struct DecoderLayer {
  LayerNormM ln1, ln2, ln3;
  MultiHeadAttention self_attn, cross_attn;
  Linear ff1, ff2;
  DecoderLayer() = default;
  DecoderLayer(ParamStore& ps, const std::string& prefix, int64_t dim, int64_t mem_dim,
               int64_t heads, int64_t ffn, Rng& rng);
  Var forward(Tape& t, Var x, Var memory) const;
};

// Pre-norm Transformer encoder stack with learned absolute positions and a
// final LayerNorm.
struct TransformerStack {
  Param* pos = nullptr;  // [max_positions, dim]
  std::vector<EncoderLayer> layers;
  LayerNormM final_ln;
  int64_t dim = 0, max_positions = 0;
  TransformerStack() = default;
  TransformerStack(ParamStore& ps, const std::string& prefix, int64_t layers_n, int64_t dim,
                   int64_t heads, int64_t ffn, int64_t max_positions, Rng& rng,
                   int64_t conv_kernel = 0);
  Var forward(Tape& t, Var x) const;  // x: [T, dim]
};

// Basic residual block (2-D, per frame): conv-norm-relu-conv-norm + skip.
struct ResBlock2d {
  Conv2dM conv1, conv2;
  GroupNormM gn1, gn2;
  std::optional<Conv2dM> down;
  std::optional<GroupNormM> down_gn;
  ResBlock2d() = default;
  ResBlock2d(ParamStore& ps, const std::string& prefix, int64_t cin, int64_t cout,
             int64_t stride, Rng& rng);
  Var forward(Tape& t, Var x) const;
};

// Basic residual block over a 1-D sequence [C, L].
struct ResBlock1d {
  Conv1dM conv1, conv2;
  GroupNormM gn1, gn2;
  std::optional<Conv1dM> down;
  std::optional<GroupNormM> down_gn;
  ResBlock1d() = default;
  ResBlock1d(ParamStore& ps, const std::string& prefix, int64_t cin, int64_t cout,
             int64_t stride, int64_t kernel, Rng& rng);
  Var forward(Tape& t, Var x) const;
};

}  // namespace mavis

#endif  // MAVIS_NN_HPP
