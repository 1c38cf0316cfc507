// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MAVIS_MODEL_CONFIG_HPP
#define MAVIS_MODEL_CONFIG_HPP

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mavis::model {

// Waveform downsampling plan: stem stride 5 then stage strides 4,4,4,2
// (product 640). Fixed so the audio encoder always lands on the video frame
// rate.
constexpr int64_t kAudioStemStride = 5;
constexpr int64_t kAudioStemKernel = 11;
constexpr int64_t kAudioStageKernel = 5;
inline const std::vector<int64_t>& audio_stage_strides() {
  static const std::vector<int64_t> s = {4, 4, 4, 2};
  return s;
}

// Encoder frontends: video is a 2-D residual net with a 3-D stem (kernel
// 5x7x7, spatial stride 2) applied per frame; audio is a 1-D residual net
// over the raw waveform whose stride plan (5,4,4,4,2) downsamples by exactly
// 640, aligning audio features with the 25 fps video frames.
struct EncoderConfig {
  std::string modality = "video";  // "video" | "audio"
  int64_t stem_channels = 4;
  std::vector<int64_t> stage_channels = {4, 8, 16, 32};
  int64_t blocks_per_stage = 1;
  int64_t transformer_layers = 2;
  int64_t attention_dim = 64;
  int64_t heads = 4;
  int64_t ffn_dim = 256;
  int64_t temporal_downsample = 1;  // 1 for video, 640 for audio
  int64_t max_positions = 640;
  // Convolution-augmented Transformer variant (adds a temporal-conv sublayer
  // to each encoder block). Plain Transformer by default.
  bool conv_augmented = false;

  void validate() const;
};

struct PredictorConfig {
  int64_t blocks = 2;
  int64_t attention_dim = 64;
  int64_t heads = 4;
  int64_t ffn_dim = 256;
  bool uses_mask_tokens = true;
  int64_t max_positions = 640;
  int64_t target_dim = 64;  // output space (the target encoder's dim)

  void validate() const;
};

struct DecoderConfig {
  int64_t layers = 2;
  int64_t attention_dim = 64;
  int64_t heads = 4;
  int64_t ffn_dim = 256;
  int64_t vocab_size = 0;  // set when the tokenizer is known; >= 2
  int64_t max_positions = 512;

  void validate() const;
};

// --- named presets ------------------------------------------------------------

// Full-scale settings mirroring the reference architecture.
EncoderConfig video_encoder_paper();
EncoderConfig audio_encoder_paper();
PredictorConfig predictor_paper();
DecoderConfig decoder_paper();

// Desk-scale: attention dim 64, 2 layers, 4 heads, ffn 256, reduced widths.
EncoderConfig video_encoder_desk();
EncoderConfig audio_encoder_desk();
PredictorConfig predictor_desk();
DecoderConfig decoder_desk();

// Micro: small enough for exhaustive finite-difference checking.
EncoderConfig video_encoder_micro();
EncoderConfig audio_encoder_micro();
PredictorConfig predictor_micro();
DecoderConfig decoder_micro();

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void to_json(nlohmann::json& j, const PredictorConfig& c);
void from_json(const nlohmann::json& j, PredictorConfig& c);
void to_json(nlohmann::json& j, const DecoderConfig& c);
void from_json(const nlohmann::json& j, DecoderConfig& c);

}  // namespace mavis::model

#endif  // MAVIS_MODEL_CONFIG_HPP
