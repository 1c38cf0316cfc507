// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Video/audio preprocessing, training-time augmentation and the pre-training
// masking strategy. All transforms are pure given an explicit rng handle.

#ifndef MAVIS_DATAPIPE_HPP
#define MAVIS_DATAPIPE_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mavis/common.hpp"
#include "mavis/corpus/manifest.hpp"
#include "mavis/tensor.hpp"

namespace mavis::datapipe {

constexpr int64_t kRoiSize = 96;       // mouth region after preprocessing
constexpr int64_t kCropSize = 88;      // training / evaluation crop
constexpr int64_t kMaskSpanFrames = 3; // frames zeroed per mask start
constexpr int64_t kAudioScale = 640;   // audio samples per video frame

struct VideoClip {
  Tensor frames;  // [T, H, W]
  std::string source_id;
  int64_t length() const { return frames.ndim() == 3 ? frames.dim(0) : 0; }
};

struct AudioClip {
  Tensor samples;  // [N]
  std::string source_id;
};

enum class Modality { kVideo, kAudio };

struct MaskSpec {
  Modality modality = Modality::kVideo;
  std::vector<int64_t> masked_indices;  // sorted, unique
  int64_t span = kMaskSpanFrames;
  double start_prob = 0.2;
};

struct PreprocessStats {
  double mean = 0.0;
  double std = 1.0;
};

// Crops the (96x96) mouth region and standardizes: x' = (x - mean) / std.
// When no crop box is given the centered 96x96 region is used. The crop box
// is [x0,y0,x1,y1) and must be exactly 96x96 inside the raw frame.
VideoClip preprocess_video(const Tensor& raw_frames,
                           const std::optional<std::array<int64_t, 4>>& crop_box,
                           const PreprocessStats& stats, const std::string& source_id = {});

// Dataset mean/std over cropped grayscale pixels, in [0,1] pixel units.
PreprocessStats compute_corpus_stats(const corpus::CorpusManifest& manifest);
void save_stats(const PreprocessStats& stats, const std::filesystem::path& path);
PreprocessStats load_stats(const std::filesystem::path& path);

// Deterministic core of the training augmentation: one crop offset and one
// flip decision applied to every frame of the clip.
VideoClip crop_and_flip(const VideoClip& clip, int64_t off_y, int64_t off_x, bool flip);
// Random 88x88 crop + horizontal flip with probability 0.5 (rng draws:
// off_y, off_x, flip). Audio is never augmented.
VideoClip augment(const VideoClip& clip, Rng& rng);
// Evaluation-time view: center crop, no flip.
VideoClip center_crop(const VideoClip& clip);

// Each frame is independently a mask start with probability start_prob; the
// span starting there is zeroed, clipped at T.
MaskSpec sample_frame_mask(int64_t t_frames, double start_prob, int64_t span, Rng& rng);
// Frame mask -> sample mask: frame f covers samples [f*scale, (f+1)*scale).
MaskSpec derive_audio_mask(const MaskSpec& video_mask, int64_t scale = kAudioScale);

VideoClip apply_mask(const VideoClip& clip, const MaskSpec& mask);
AudioClip apply_mask(const AudioClip& clip, const MaskSpec& mask);

// Pads with zeros or truncates to exactly 640 * t_frames samples.
AudioClip fit_audio_to_frames(AudioClip clip, int64_t t_frames);

// Loads, slices (for split records) and preprocesses one record's media.
struct LoadedClip {
  VideoClip video;   // preprocessed 96x96, standardized
  AudioClip audio;   // raw samples fitted to 640*T
};
LoadedClip load_record(const corpus::UtteranceRecord& record, const PreprocessStats& stats);

}  // namespace mavis::datapipe

#endif  // MAVIS_DATAPIPE_HPP
