// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MAVIS_FINETUNE_LOSSES_HPP
#define MAVIS_FINETUNE_LOSSES_HPP

#include <cstdint>
#include <vector>

#include "mavis/autograd.hpp"

namespace mavis::finetune {

// Negative log marginal over all blank-augmented alignments of `target`
// given per-frame log-probabilities [T, classes] with blank as the LAST
// class (forward algorithm, built from differentiable log-add-exp steps).
// For targets no alignment can produce (too long for T) returns +infinity
// and emits a warning.
Var ctc_loss(Tape& t, Var log_probs, const std::vector<int64_t>& target, int64_t blank);

// Convenience value-only version.
double ctc_loss_value(const Tensor& log_probs, const std::vector<int64_t>& target, int64_t blank);

// Mean per-token negative log-likelihood of `targets` (the reference with
// eos appended) under unnormalized decoder scores [L, vocab].
Var attention_loss(Tape& t, Var logits, const std::vector<int64_t>& targets);

// Combined objective: w*ctc + (1-w)*attention.
Var joint_loss(Tape& t, Var ctc, Var attention, double ctc_weight);

// base * decay^depth_from_top; the topmost encoder layer has depth 0 and the
// convolutional frontend sits below the deepest transformer layer.
double layerwise_lr(double base, int64_t depth_from_top, double decay);

// Depth assignment used for layer-wise decay, by parameter name:
// transformer layer i of L -> L-1-i; the final encoder norm -> 0; everything
// else (stem, residual stages, projection, positions) -> L.
int64_t encoder_param_depth(const std::string& param_name, int64_t transformer_layers);

}  // namespace mavis::finetune

#endif  // MAVIS_FINETUNE_LOSSES_HPP
