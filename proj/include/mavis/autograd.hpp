// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over a Wengert list. A Tape owns the
// nodes of one forward pass; creation order is a topological order, so the
// backward sweep is a single reverse loop. Leaf nodes may reference external
// parameter/gradient storage so gradients accumulate across multiple tapes
// (per-clip gradient accumulation within a batch).

#ifndef MAVIS_AUTOGRAD_HPP
#define MAVIS_AUTOGRAD_HPP

#include <deque>
#include <functional>
#include <vector>

#include "mavis/tensor.hpp"

namespace mavis {

using Var = int32_t;
constexpr Var kNoVar = -1;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // --- graph construction -------------------------------------------------

  // Leaf referencing external value/grad storage (a model parameter).
  Var leaf(const Tensor* value, Tensor* grad, bool requires_grad);
  // Constant (no gradient ever flows into it).
  Var constant(Tensor value);
  // Trainable copy of a value owned by the tape (used in tests).
  Var input(Tensor value, bool requires_grad);

  // With gradients disabled, every leaf is treated as a constant: the whole
  // forward records values only (teacher/evaluation passes).
  void set_grad_enabled(bool e) { grad_enabled_ = e; }
  bool grad_enabled() const { return grad_enabled_; }

  const Tensor& val(Var v) const;
  // Gradient buffer of a node, allocated to the value's shape on first use.
  Tensor& grad_buf(Var v);
  bool has_grad(Var v) const;
  bool requires_grad(Var v) const;

  // Runs the reverse sweep from a scalar node, seeding with d(loss)/d(loss)=1.
  void backward(Var loss);

  size_t size() const { return nodes_.size(); }

  // Internal: installs the backward closure on a node created via input().
  // Used by op implementations that need to move cached state into the
  // closure after the output node exists.
  void set_back_(Var v, std::function<void(Tape&)> back) { node(v).back = std::move(back); }

  // --- elementwise / scalar ops -------------------------------------------

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double c);
  Var neg(Var a) { return scale(a, -1.0); }
  Var add_const_tensor(Var a, Tensor c);
  Var relu(Var a);
  Var sqrt_eps(Var a, double eps);
  Var logaddexp(Var a, Var b);
  Var sum(Var a);
  Var mean(Var a);

  // --- shape / indexing ops ------------------------------------------------

  Var reshape(Var a, std::vector<int64_t> shape);
  Var transpose2d(Var a);
  Var slice_row(Var a, int64_t r);
  Var slice_rows(Var a, int64_t r0, int64_t r1);
  Var slice_cols(Var a, int64_t c0, int64_t c1);
  Var concat_cols(const std::vector<Var>& parts);
  Var gather(Var v, std::vector<int64_t> idx);
  Var shift_right(Var a, int64_t k, double fill);
  Var rows_gather(Var table, std::vector<int64_t> ids);
  Var pick_rows(Var a, std::vector<int64_t> idx);
  // Replaces rows at `indices` with the (broadcast) row vector m.
  Var mask_rows_replace(Var x, std::vector<int64_t> indices, Var m);

  // --- linear algebra -------------------------------------------------------

  Var matmul(Var a, Var b);     // [m,k] x [k,n] -> [m,n]
  Var matmul_nt(Var a, Var b);  // [m,k] x [n,k]^T -> [m,n]
  Var linear(Var x, Var w, Var b);  // x:[R,in], w:[in,out], b:[out] or kNoVar
  Var add_bias_rows(Var x, Var b);
  Var rowwise_dot(Var a, Var b);  // [T,D],[T,D] -> [T]

  // --- reductions over rows --------------------------------------------------

  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);

  // --- normalization ---------------------------------------------------------

  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  // Per-frame normalization over (C,H,W) with per-channel affine.
  Var group_norm_frames(Var x, Var gamma, Var beta, double eps = 1e-5);
  // Whole-clip normalization over (C,L) with per-channel affine.
  Var group_norm_seq(Var x, Var gamma, Var beta, double eps = 1e-5);

  // --- convolutions / pooling -------------------------------------------------

  // x:[T,Cin,H,W], w:[Cout,Cin,kt,kh,kw]; temporal stride 1 with symmetric
  // zero padding kt/2, spatial stride/pad as given.
  Var conv3d_stem(Var x, Var w, Var b, int64_t stride_hw, int64_t pad_hw);
  // x:[T,Cin,H,W], w:[Cout,Cin,kh,kw].
  Var conv2d_frames(Var x, Var w, Var b, int64_t stride, int64_t pad);
  // x:[Cin,L], w:[Cout,Cin,k].
  Var conv1d(Var x, Var w, Var b, int64_t stride, int64_t pad);
  Var maxpool2d_frames(Var x, int64_t k, int64_t stride, int64_t pad);
  Var global_avgpool(Var x);  // [T,C,H,W] -> [T,C]

 private:
  struct Node {
    Tensor value;                  // owned unless leaf
    const Tensor* vptr = nullptr;  // value view
    Tensor grad;                   // owned grad unless leaf
    Tensor* gptr = nullptr;
    bool requires_grad = false;
    bool grad_live = false;  // grad buffer has been written
    std::function<void(Tape&)> back;
  };

  Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
  Node& node(Var v) { return nodes_[static_cast<size_t>(v)]; }
  const Node& node(Var v) const { return nodes_[static_cast<size_t>(v)]; }

  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

// Central-difference gradient check utility shared by tests and the
// acceptance suite. Returns the fraction of coordinates whose relative error
// is within `tol`.
struct GradCheckResult {
  int64_t total = 0;
  int64_t within = 0;
  double worst = 0.0;
  double fraction_ok() const { return total == 0 ? 1.0 : double(within) / double(total); }
};

GradCheckResult grad_check(const std::function<double()>& loss_fn,
                           const std::vector<Tensor*>& params,
                           const std::vector<const Tensor*>& analytic_grads,
                           double rel_tol, double fd_eps = 1e-5);

}  // namespace mavis

#endif  // MAVIS_AUTOGRAD_HPP
