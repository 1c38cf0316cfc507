// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/model/models.hpp"

namespace mavis::model {

// --- video -------------------------------------------------------------------

VideoEncoder::VideoEncoder(ParamStore& ps, const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.modality != "video")
    throw UserError("VideoEncoder: config modality must be 'video'");
  // 3-D stem: kernel (5,7,7), temporal stride 1, spatial stride 2.
  stem_w_ = ps.create("stem.w", {cfg_.stem_channels, 1, 5, 7, 7});
  init_kaiming(stem_w_, rng, 5 * 7 * 7);
  stem_b_ = ps.create("stem.b", {cfg_.stem_channels}, true);
  init_const(stem_b_, 0.0);
  stem_gn_ = GroupNormM(ps, "stem.gn", cfg_.stem_channels, false);

  int64_t cin = cfg_.stem_channels;
  for (size_t s = 0; s < cfg_.stage_channels.size(); ++s) {
    int64_t cout = cfg_.stage_channels[s];
    for (int64_t b = 0; b < cfg_.blocks_per_stage; ++b) {
      int64_t stride = (s > 0 && b == 0) ? 2 : 1;
      std::string prefix = strfmt("res%zu.%lld", s, (long long)b);
      blocks_.emplace_back(ps, prefix, cin, cout, stride, rng);
      cin = cout;
    }
  }
  proj_ = Linear(ps, "proj", cin, cfg_.attention_dim, rng);
  transformer_ = TransformerStack(ps, "transformer", cfg_.transformer_layers, cfg_.attention_dim,
                                  cfg_.heads, cfg_.ffn_dim, cfg_.max_positions, rng,
                                  cfg_.conv_augmented ? 3 : 0);
}

Var VideoEncoder::forward(Tape& t, const Tensor& frames) const {
  if (frames.ndim() != 3) throw std::invalid_argument("VideoEncoder: input must be [T,H,W]");
  int64_t T = frames.dim(0), H = frames.dim(1), W = frames.dim(2);
  Var x = t.reshape(t.constant(frames), {T, 1, H, W});
  Var wv = t.leaf(&stem_w_->value, &stem_w_->grad, true);
  Var bv = t.leaf(&stem_b_->value, &stem_b_->grad, true);
  x = t.conv3d_stem(x, wv, bv, /*stride_hw=*/2, /*pad_hw=*/3);
  x = t.relu(stem_gn_.forward(t, x));
  x = t.maxpool2d_frames(x, 3, 2, 1);
  for (const auto& b : blocks_) x = b.forward(t, x);
  Var pooled = t.global_avgpool(x);  // [T, C]
  Var h = proj_.forward(t, pooled);
  return transformer_.forward(t, h);
}

// --- audio -------------------------------------------------------------------

AudioEncoder::AudioEncoder(ParamStore& ps, const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.modality != "audio")
    throw UserError("AudioEncoder: config modality must be 'audio'");
  stem_ = Conv1dM(ps, "stem", 1, cfg_.stem_channels, kAudioStemKernel, kAudioStemStride,
                  kAudioStemKernel / 2, rng);
  stem_gn_ = GroupNormM(ps, "stem.gn", cfg_.stem_channels, true);
  int64_t cin = cfg_.stem_channels;
  const auto& strides = audio_stage_strides();
  for (size_t s = 0; s < cfg_.stage_channels.size(); ++s) {
    int64_t cout = cfg_.stage_channels[s];
    for (int64_t b = 0; b < cfg_.blocks_per_stage; ++b) {
      int64_t stride = (b == 0) ? strides[s] : 1;
      std::string prefix = strfmt("res%zu.%lld", s, (long long)b);
      blocks_.emplace_back(ps, prefix, cin, cout, stride, kAudioStageKernel, rng);
      cin = cout;
    }
  }
  proj_ = Linear(ps, "proj", cin, cfg_.attention_dim, rng);
  transformer_ = TransformerStack(ps, "transformer", cfg_.transformer_layers, cfg_.attention_dim,
                                  cfg_.heads, cfg_.ffn_dim, cfg_.max_positions, rng,
                                  cfg_.conv_augmented ? 3 : 0);
}

Var AudioEncoder::forward(Tape& t, const Tensor& samples) const {
  if (samples.ndim() != 1) throw std::invalid_argument("AudioEncoder: input must be [N]");
  int64_t n = samples.dim(0);
  if (n == 0 || n % cfg_.temporal_downsample != 0)
    throw std::invalid_argument(
        strfmt("AudioEncoder: input length %lld is not a positive multiple of %lld",
               (long long)n, (long long)cfg_.temporal_downsample));
  Var x = t.reshape(t.constant(samples), {1, n});
  x = t.relu(stem_gn_.forward(t, stem_.forward(t, x)));
  for (const auto& b : blocks_) x = b.forward(t, x);
  Var seq = t.transpose2d(x);  // [T, C]
  Var h = proj_.forward(t, seq);
  return transformer_.forward(t, h);
}

// --- predictor ----------------------------------------------------------------

Predictor::Predictor(ParamStore& ps, const PredictorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  mask_token_ = ps.create("mask_token", {cfg_.attention_dim}, true);
  init_normal(mask_token_, rng, 0.02);
  transformer_ = TransformerStack(ps, "transformer", cfg_.blocks, cfg_.attention_dim, cfg_.heads,
                                  cfg_.ffn_dim, cfg_.max_positions, rng);
  if (cfg_.target_dim != cfg_.attention_dim)
    out_proj_ = Linear(ps, "out_proj", cfg_.attention_dim, cfg_.target_dim, rng);
}

Var Predictor::forward(Tape& t, Var student_seq, const std::vector<int64_t>& masked_frames) const {
  Var x = student_seq;
  if (cfg_.uses_mask_tokens && !masked_frames.empty()) {
    Var m = t.leaf(&mask_token_->value, &mask_token_->grad, true);
    x = t.mask_rows_replace(x, masked_frames, m);
  }
  x = transformer_.forward(t, x);
  if (out_proj_) x = out_proj_->forward(t, x);
  return x;
}

// --- decoder -----------------------------------------------------------------

AttentionDecoder::AttentionDecoder(ParamStore& ps, const DecoderConfig& cfg, int64_t memory_dim,
                                   Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  token_emb_ = ps.create("token_emb", {cfg_.vocab_size, cfg_.attention_dim});
  init_normal(token_emb_, rng, 0.02);
  pos_ = ps.create("pos", {cfg_.max_positions, cfg_.attention_dim}, true);
  init_normal(pos_, rng, 0.02);
  memory_proj_ = Linear(ps, "memory_proj", memory_dim, cfg_.attention_dim, rng);
  for (int64_t i = 0; i < cfg_.layers; ++i)
    layers_.emplace_back(ps, "layer" + std::to_string(i), cfg_.attention_dim, cfg_.attention_dim,
                         cfg_.heads, cfg_.ffn_dim, rng);
  final_ln_ = LayerNormM(ps, "final_ln", cfg_.attention_dim);
  out_ = Linear(ps, "out", cfg_.attention_dim, cfg_.vocab_size, rng);
}

Var AttentionDecoder::project_memory(Tape& t, Var encoder_out) const {
  return memory_proj_.forward(t, encoder_out);
}

Var AttentionDecoder::forward_logits(Tape& t, Var projected_memory,
                                     const std::vector<int64_t>& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("AttentionDecoder: empty prefix");
  auto L = static_cast<int64_t>(tokens.size());
  if (L > cfg_.max_positions)
    throw std::invalid_argument("AttentionDecoder: prefix longer than max positions");
  Var emb = t.rows_gather(t.leaf(&token_emb_->value, &token_emb_->grad, true), tokens);
  Var pv = t.leaf(&pos_->value, &pos_->grad, true);
  Var x = t.add(emb, t.slice_rows(pv, 0, L));
  for (const auto& layer : layers_) x = layer.forward(t, x, projected_memory);
  x = final_ln_.forward(t, x);
  return out_.forward(t, x);
}

// --- ctc head -----------------------------------------------------------------

CtcHead::CtcHead(ParamStore& ps, int64_t encoder_dim, int64_t ctc_classes, Rng& rng) {
  proj = Linear(ps, "ctc", encoder_dim, ctc_classes, rng);
}

Var CtcHead::forward_log_probs(Tape& t, Var encoder_out) const {
  return t.log_softmax_rows(proj.forward(t, encoder_out));
}

ParamStore clone_as_teacher(const ParamStore& student) { return student.clone(); }

}  // namespace mavis::model
