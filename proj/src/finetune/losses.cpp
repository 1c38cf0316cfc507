// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/finetune/losses.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace mavis::finetune {

namespace {
constexpr double kNegInf = -1e30;  // dead DP cell; exp underflows to exactly 0
}

Var ctc_loss(Tape& t, Var log_probs, const std::vector<int64_t>& target, int64_t blank) {
  const Tensor& lp = t.val(log_probs);
  if (lp.ndim() != 2) throw std::invalid_argument("ctc_loss: log_probs must be [T, classes]");
  int64_t T = lp.dim(0), C = lp.dim(1);
  if (blank != C - 1) throw std::invalid_argument("ctc_loss: blank must be the last class");
  auto L = static_cast<int64_t>(target.size());
  for (int64_t y : target)
    if (y < 0 || y >= blank)
      throw std::invalid_argument("ctc_loss: target symbol out of vocabulary");

  // Minimum frames: every symbol once plus a separating blank per repeat.
  int64_t repeats = 0;
  for (int64_t i = 1; i < L; ++i)
    if (target[static_cast<size_t>(i)] == target[static_cast<size_t>(i - 1)]) ++repeats;
  if (T < L + repeats) {
    std::cerr << "ctc_loss: target of length " << L << " (+" << repeats
              << " repeats) infeasible in " << T << " frames; loss is +inf\n";
    return t.constant(Tensor::scalar(std::numeric_limits<double>::infinity()));
  }

  // Extended label sequence: blank, y1, blank, y2, ..., blank.
  int64_t S = 2 * L + 1;
  std::vector<int64_t> ext(static_cast<size_t>(S), blank);
  for (int64_t i = 0; i < L; ++i) ext[static_cast<size_t>(2 * i + 1)] = target[static_cast<size_t>(i)];

  // Transition mask for the skip connection s-2 -> s.
  Tensor skip_mask({S});
  for (int64_t s = 0; s < S; ++s) {
    bool allowed = s >= 2 && ext[static_cast<size_t>(s)] != blank &&
                   ext[static_cast<size_t>(s)] != ext[static_cast<size_t>(s - 2)];
    skip_mask.at(s) = allowed ? 0.0 : kNegInf;
  }
  Tensor init_mask({S});
  for (int64_t s = 0; s < S; ++s) init_mask.at(s) = s <= 1 ? 0.0 : kNegInf;

  Var alpha = kNoVar;
  for (int64_t ti = 0; ti < T; ++ti) {
    Var row = t.gather(t.slice_row(log_probs, ti), ext);
    if (ti == 0) {
      alpha = t.add_const_tensor(row, init_mask);
      continue;
    }
    Var stay = alpha;
    Var step1 = t.shift_right(alpha, 1, kNegInf);
    Var step2 = t.add_const_tensor(t.shift_right(alpha, 2, kNegInf), skip_mask);
    alpha = t.add(row, t.logaddexp(t.logaddexp(stay, step1), step2));
  }
  Var tail = t.gather(alpha, {S - 1});
  if (S >= 2) tail = t.logaddexp(tail, t.gather(alpha, {S - 2}));
  return t.neg(tail);
}

double ctc_loss_value(const Tensor& log_probs, const std::vector<int64_t>& target,
                      int64_t blank) {
  Tape t;
  Var lp = t.input(log_probs, false);
  Var loss = ctc_loss(t, lp, target, blank);
  return t.val(loss).data[0];
}

Var attention_loss(Tape& t, Var logits, const std::vector<int64_t>& targets) {
  const Tensor& lg = t.val(logits);
  if (lg.ndim() != 2 || lg.dim(0) != static_cast<int64_t>(targets.size()))
    throw std::invalid_argument("attention_loss: one logits row per target token required");
  Var logp = t.log_softmax_rows(logits);
  Var picked = t.pick_rows(logp, targets);
  return t.neg(t.mean(picked));
}

Var joint_loss(Tape& t, Var ctc, Var attention, double ctc_weight) {
  if (ctc_weight < 0.0 || ctc_weight > 1.0)
    throw std::invalid_argument("joint_loss: ctc_weight must lie in [0,1]");
  return t.add(t.scale(ctc, ctc_weight), t.scale(attention, 1.0 - ctc_weight));
}

double layerwise_lr(double base, int64_t depth_from_top, double decay) {
  if (!(decay > 0.0) || decay > 1.0)
    throw std::invalid_argument("layerwise_lr: decay must lie in (0,1]");
  if (depth_from_top < 0) throw std::invalid_argument("layerwise_lr: negative depth");
  return base * std::pow(decay, double(depth_from_top));
}

int64_t encoder_param_depth(const std::string& name, int64_t transformer_layers) {
  constexpr const char* kLayerPrefix = "transformer.layer";
  if (name.rfind(kLayerPrefix, 0) == 0) {
    size_t pos = std::strlen(kLayerPrefix);
    size_t end = name.find('.', pos);
    int64_t layer = std::stoll(name.substr(pos, end - pos));
    return transformer_layers - 1 - layer;
  }
  if (name.rfind("transformer.final_ln", 0) == 0) return 0;
  // stem, residual stages, projection, positional table: below the deepest layer
  return transformer_layers;
}

}  // namespace mavis::finetune
