// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Student/teacher encoders, cross-modal predictors and the recognition head.
// Every model owns its parameters through a ParamStore so weights can be
// cloned (teachers), EMA-averaged, checkpointed and swapped section-wise.

#ifndef MAVIS_MODEL_MODELS_HPP
#define MAVIS_MODEL_MODELS_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mavis/model/config.hpp"
#include "mavis/nn.hpp"

namespace mavis::model {

// ResNet-style frontend + Transformer over 88x88 grayscale frames.
// Maps [T,88,88] to [T, attention_dim], one embedding per input frame.
class VideoEncoder {
 public:
  VideoEncoder(ParamStore& ps, const EncoderConfig& cfg, Rng& rng);
  Var forward(Tape& t, const Tensor& frames) const;  // frames: [T,88,88]
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  Param* stem_w_;
  Param* stem_b_;
  GroupNormM stem_gn_;
  std::vector<ResBlock2d> blocks_;
  Linear proj_;
  TransformerStack transformer_;
};

// 1-D ResNet over the raw waveform + Transformer. Maps 640*T samples to
// [T, attention_dim]; errors when the input length is not a multiple of 640.
class AudioEncoder {
 public:
  AudioEncoder(ParamStore& ps, const EncoderConfig& cfg, Rng& rng);
  Var forward(Tape& t, const Tensor& samples) const;  // samples: [N]
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  Conv1dM stem_;
  GroupNormM stem_gn_;
  std::vector<ResBlock1d> blocks_;
  Linear proj_;
  TransformerStack transformer_;
};

// Transformer head on top of a student encoder; masked positions are
// replaced by a learned mask token before the blocks. Output lives in the
// target encoder's embedding space (an extra projection is added only when
// the dimensions differ).
class Predictor {
 public:
  Predictor(ParamStore& ps, const PredictorConfig& cfg, Rng& rng);
  Var forward(Tape& t, Var student_seq, const std::vector<int64_t>& masked_frames) const;
  const PredictorConfig& config() const { return cfg_; }

 private:
  PredictorConfig cfg_;
  Param* mask_token_;
  TransformerStack transformer_;
  std::optional<Linear> out_proj_;
};

// Autoregressive Transformer decoder over encoder memory. forward_logits
// returns unnormalized scores [L, vocab]; apply log_softmax for
// distributions.
class AttentionDecoder {
 public:
  AttentionDecoder(ParamStore& ps, const DecoderConfig& cfg, int64_t memory_dim, Rng& rng);
  Var project_memory(Tape& t, Var encoder_out) const;
  Var forward_logits(Tape& t, Var projected_memory, const std::vector<int64_t>& tokens) const;
  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  Param* token_emb_;
  Param* pos_;
  Linear memory_proj_;
  std::vector<DecoderLayer> layers_;
  LayerNormM final_ln_;
  Linear out_;
};

// Linear CTC projection from encoder outputs to vocab+1 classes (blank
// last).
struct CtcHead {
  Linear proj;
  CtcHead() = default;
  CtcHead(ParamStore& ps, int64_t encoder_dim, int64_t ctc_classes, Rng& rng);
  Var forward_log_probs(Tape& t, Var encoder_out) const;  // [T, classes] log-probs
};

// Deep copy of a weight tree for use as an EMA teacher; structurally
// identical, excluded from gradient computation by construction (teachers
// are evaluated with gradients disabled).
ParamStore clone_as_teacher(const ParamStore& student);

}  // namespace mavis::model

#endif  // MAVIS_MODEL_MODELS_HPP
