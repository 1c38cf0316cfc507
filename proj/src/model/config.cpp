// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/model/config.hpp"

#include "mavis/common.hpp"

namespace mavis::model {

void EncoderConfig::validate() const {
  if (modality != "video" && modality != "audio")
    throw UserError("EncoderConfig: modality must be 'video' or 'audio'");
  if (attention_dim % heads != 0)
    throw UserError("EncoderConfig: attention_dim must be divisible by heads");
  if (temporal_downsample < 1) throw UserError("EncoderConfig: temporal_downsample must be >= 1");
  if (modality == "video" && temporal_downsample != 1)
    throw UserError("EncoderConfig: video encoder keeps the frame rate (downsample 1)");
  if (modality == "audio") {
    if (temporal_downsample != 640)
      throw UserError("EncoderConfig: audio encoder must downsample by 640");
    if (stage_channels.size() != audio_stage_strides().size())
      throw UserError("EncoderConfig: audio encoder needs exactly 4 stages (stride plan 5*4*4*4*2)");
  }
  if (stage_channels.empty()) throw UserError("EncoderConfig: need at least one stage");
  if (blocks_per_stage < 1 || transformer_layers < 0 || stem_channels < 1)
    throw UserError("EncoderConfig: bad sizes");
}

void PredictorConfig::validate() const {
  if (blocks < 1) throw UserError("PredictorConfig: blocks must be >= 1");
  if (attention_dim % heads != 0)
    throw UserError("PredictorConfig: attention_dim must be divisible by heads");
}

void DecoderConfig::validate() const {
  if (vocab_size < 2) throw UserError("DecoderConfig: vocab_size must be >= 2");
  if (attention_dim % heads != 0)
    throw UserError("DecoderConfig: attention_dim must be divisible by heads");
  if (layers < 1) throw UserError("DecoderConfig: layers must be >= 1");
}

EncoderConfig video_encoder_paper() {
  EncoderConfig c;
  c.modality = "video";
  c.stem_channels = 64;
  c.stage_channels = {64, 128, 256, 512};
  c.blocks_per_stage = 2;
  c.transformer_layers = 12;
  c.attention_dim = 512;
  c.heads = 8;
  c.ffn_dim = 2048;
  c.temporal_downsample = 1;
  return c;
}

EncoderConfig audio_encoder_paper() {
  EncoderConfig c = video_encoder_paper();
  c.modality = "audio";
  c.temporal_downsample = 640;
  return c;
}

PredictorConfig predictor_paper() {
  PredictorConfig c;
  c.blocks = 2;
  c.attention_dim = 512;
  c.heads = 8;
  c.ffn_dim = 2048;
  c.target_dim = 512;
  return c;
}

DecoderConfig decoder_paper() {
  DecoderConfig c;
  c.layers = 6;
  c.attention_dim = 256;
  c.heads = 4;
  c.ffn_dim = 2048;
  return c;
}

EncoderConfig video_encoder_desk() { return EncoderConfig{}; }

EncoderConfig audio_encoder_desk() {
  EncoderConfig c;
  c.modality = "audio";
  c.stem_channels = 4;
  c.stage_channels = {4, 8, 16, 32};
  c.temporal_downsample = 640;
  return c;
}

PredictorConfig predictor_desk() { return PredictorConfig{}; }

DecoderConfig decoder_desk() { return DecoderConfig{}; }

EncoderConfig video_encoder_micro() {
  EncoderConfig c;
  c.modality = "video";
  c.stem_channels = 2;
  c.stage_channels = {2};
  c.blocks_per_stage = 1;
  c.transformer_layers = 1;
  c.attention_dim = 4;
  c.heads = 2;
  c.ffn_dim = 8;
  c.max_positions = 16;
  return c;
}

EncoderConfig audio_encoder_micro() {
  EncoderConfig c;
  c.modality = "audio";
  c.stem_channels = 2;
  c.stage_channels = {2, 2, 2, 2};
  c.blocks_per_stage = 1;
  c.transformer_layers = 1;
  c.attention_dim = 4;
  c.heads = 2;
  c.ffn_dim = 8;
  c.temporal_downsample = 640;
  c.max_positions = 16;
  return c;
}

PredictorConfig predictor_micro() {
  PredictorConfig c;
  c.blocks = 1;
  c.attention_dim = 4;
  c.heads = 2;
  c.ffn_dim = 8;
  c.max_positions = 16;
  c.target_dim = 4;
  return c;
}

DecoderConfig decoder_micro() {
  DecoderConfig c;
  c.layers = 1;
  c.attention_dim = 4;
  c.heads = 2;
  c.ffn_dim = 8;
  c.max_positions = 32;
  return c;
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"modality", c.modality},
                     {"stem_channels", c.stem_channels},
                     {"stage_channels", c.stage_channels},
                     {"blocks_per_stage", c.blocks_per_stage},
                     {"transformer_layers", c.transformer_layers},
                     {"attention_dim", c.attention_dim},
                     {"heads", c.heads},
                     {"ffn_dim", c.ffn_dim},
                     {"temporal_downsample", c.temporal_downsample},
                     {"max_positions", c.max_positions},
                     {"conv_augmented", c.conv_augmented}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  j.at("modality").get_to(c.modality);
  j.at("stem_channels").get_to(c.stem_channels);
  j.at("stage_channels").get_to(c.stage_channels);
  j.at("blocks_per_stage").get_to(c.blocks_per_stage);
  j.at("transformer_layers").get_to(c.transformer_layers);
  j.at("attention_dim").get_to(c.attention_dim);
  j.at("heads").get_to(c.heads);
  j.at("ffn_dim").get_to(c.ffn_dim);
  j.at("temporal_downsample").get_to(c.temporal_downsample);
  j.at("max_positions").get_to(c.max_positions);
  j.at("conv_augmented").get_to(c.conv_augmented);
}

void to_json(nlohmann::json& j, const PredictorConfig& c) {
  j = nlohmann::json{{"blocks", c.blocks},           {"attention_dim", c.attention_dim},
                     {"heads", c.heads},             {"ffn_dim", c.ffn_dim},
                     {"uses_mask_tokens", c.uses_mask_tokens},
                     {"max_positions", c.max_positions},
                     {"target_dim", c.target_dim}};
}

void from_json(const nlohmann::json& j, PredictorConfig& c) {
  j.at("blocks").get_to(c.blocks);
  j.at("attention_dim").get_to(c.attention_dim);
  j.at("heads").get_to(c.heads);
  j.at("ffn_dim").get_to(c.ffn_dim);
  j.at("uses_mask_tokens").get_to(c.uses_mask_tokens);
  j.at("max_positions").get_to(c.max_positions);
  j.at("target_dim").get_to(c.target_dim);
}

void to_json(nlohmann::json& j, const DecoderConfig& c) {
  j = nlohmann::json{{"layers", c.layers},   {"attention_dim", c.attention_dim},
                     {"heads", c.heads},     {"ffn_dim", c.ffn_dim},
                     {"vocab_size", c.vocab_size}, {"max_positions", c.max_positions}};
}

void from_json(const nlohmann::json& j, DecoderConfig& c) {
  j.at("layers").get_to(c.layers);
  j.at("attention_dim").get_to(c.attention_dim);
  j.at("heads").get_to(c.heads);
  j.at("ffn_dim").get_to(c.ffn_dim);
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("max_positions").get_to(c.max_positions);
}

}  // namespace mavis::model
