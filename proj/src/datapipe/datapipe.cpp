// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/datapipe.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "mavis/media.hpp"

namespace mavis::datapipe {

namespace {

std::array<int64_t, 4> effective_box(const std::optional<std::array<int64_t, 4>>& crop_box,
                                     int64_t h, int64_t w) {
  if (crop_box) return *crop_box;
  if (h < kRoiSize || w < kRoiSize)
    throw std::invalid_argument(
        strfmt("preprocess_video: raw frame %lldx%lld smaller than the %lld mouth region and no "
               "crop box given",
               (long long)h, (long long)w, (long long)kRoiSize));
  int64_t x0 = (w - kRoiSize) / 2;
  int64_t y0 = (h - kRoiSize) / 2;
  return {x0, y0, x0 + kRoiSize, y0 + kRoiSize};
}

}  // namespace

VideoClip preprocess_video(const Tensor& raw_frames,
                           const std::optional<std::array<int64_t, 4>>& crop_box,
                           const PreprocessStats& stats, const std::string& source_id) {
  if (raw_frames.ndim() != 3) throw std::invalid_argument("preprocess_video: need [T,H,W]");
  if (!(stats.std > 0.0)) throw std::invalid_argument("preprocess_video: std must be > 0");
  int64_t T = raw_frames.dim(0), H = raw_frames.dim(1), W = raw_frames.dim(2);
  auto box = effective_box(crop_box, H, W);
  int64_t x0 = box[0], y0 = box[1], x1 = box[2], y1 = box[3];
  if (x1 - x0 != kRoiSize || y1 - y0 != kRoiSize)
    throw std::invalid_argument(strfmt("preprocess_video: crop box must be %lldx%lld",
                                       (long long)kRoiSize, (long long)kRoiSize));
  if (x0 < 0 || y0 < 0 || x1 > W || y1 > H)
    throw std::invalid_argument("preprocess_video: crop box out of bounds");

  VideoClip out;
  out.source_id = source_id;
  out.frames = Tensor({T, kRoiSize, kRoiSize});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t y = 0; y < kRoiSize; ++y)
      for (int64_t x = 0; x < kRoiSize; ++x) {
        double v = raw_frames.data[static_cast<size_t>((t * H + y0 + y) * W + x0 + x)];
        out.frames.data[static_cast<size_t>((t * kRoiSize + y) * kRoiSize + x)] =
            (v - stats.mean) / stats.std;
      }
  return out;
}

PreprocessStats compute_corpus_stats(const corpus::CorpusManifest& manifest) {
  double sum = 0.0, sumsq = 0.0;
  int64_t n = 0;
  PreprocessStats identity;  // crop without standardization
  for (const auto& r : manifest.records) {
    Tensor raw = media::video_to_tensor(media::read_video(r.video_ref));
    VideoClip cropped = preprocess_video(raw, r.crop_box, identity, r.id);
    for (double v : cropped.frames.data) {
      sum += v;
      sumsq += v * v;
      ++n;
    }
  }
  if (n == 0) throw UserError("compute_corpus_stats: empty corpus");
  PreprocessStats s;
  s.mean = sum / double(n);
  s.std = std::sqrt(std::max(1e-12, sumsq / double(n) - s.mean * s.mean));
  return s;
}

void save_stats(const PreprocessStats& stats, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["magic"] = "MVS-STATS1";
  j["mean"] = stats.mean;
  j["std"] = stats.std;
  std::ofstream out(path);
  if (!out) throw UserError("cannot write stats file: " + path.string());
  out << j.dump(2) << "\n";
}

PreprocessStats load_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open stats file: " + path.string());
  nlohmann::json j;
  in >> j;
  if (!j.contains("magic") || j["magic"] != "MVS-STATS1")
    throw UserError("bad stats file magic in " + path.string());
  PreprocessStats s;
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  if (!(s.std > 0.0)) throw UserError("stats file has nonpositive std");
  return s;
}

VideoClip crop_and_flip(const VideoClip& clip, int64_t off_y, int64_t off_x, bool flip) {
  if (clip.frames.dim(1) != kRoiSize || clip.frames.dim(2) != kRoiSize)
    throw std::invalid_argument("crop_and_flip: clip must be 96x96");
  int64_t max_off = kRoiSize - kCropSize;
  if (off_y < 0 || off_y > max_off || off_x < 0 || off_x > max_off)
    throw std::invalid_argument("crop_and_flip: offset out of range");
  int64_t T = clip.length();
  VideoClip out;
  out.source_id = clip.source_id;
  out.frames = Tensor({T, kCropSize, kCropSize});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t y = 0; y < kCropSize; ++y)
      for (int64_t x = 0; x < kCropSize; ++x) {
        int64_t sx = flip ? (off_x + kCropSize - 1 - x) : (off_x + x);
        out.frames.data[static_cast<size_t>((t * kCropSize + y) * kCropSize + x)] =
            clip.frames.data[static_cast<size_t>((t * kRoiSize + off_y + y) * kRoiSize + sx)];
      }
  return out;
}

VideoClip augment(const VideoClip& clip, Rng& rng) {
  int64_t max_off = kRoiSize - kCropSize;
  int64_t off_y = rng.uniform_int(0, max_off);
  int64_t off_x = rng.uniform_int(0, max_off);
  bool flip = rng.bernoulli(0.5);
  return crop_and_flip(clip, off_y, off_x, flip);
}

VideoClip center_crop(const VideoClip& clip) {
  int64_t off = (kRoiSize - kCropSize) / 2;
  return crop_and_flip(clip, off, off, false);
}

MaskSpec sample_frame_mask(int64_t t_frames, double start_prob, int64_t span, Rng& rng) {
  if (t_frames < 1) throw std::invalid_argument("sample_frame_mask: T must be >= 1");
  std::set<int64_t> masked;
  for (int64_t i = 0; i < t_frames; ++i) {
    if (rng.uniform() < start_prob) {
      for (int64_t j = i; j < std::min(t_frames, i + span); ++j) masked.insert(j);
    }
  }
  MaskSpec m;
  m.modality = Modality::kVideo;
  m.span = span;
  m.start_prob = start_prob;
  m.masked_indices.assign(masked.begin(), masked.end());
  return m;
}

MaskSpec derive_audio_mask(const MaskSpec& video_mask, int64_t scale) {
  if (video_mask.modality != Modality::kVideo)
    throw std::invalid_argument("derive_audio_mask: source mask must be video");
  MaskSpec m;
  m.modality = Modality::kAudio;
  m.span = video_mask.span * scale;
  m.start_prob = video_mask.start_prob;
  m.masked_indices.reserve(video_mask.masked_indices.size() * static_cast<size_t>(scale));
  for (int64_t f : video_mask.masked_indices)
    for (int64_t s = f * scale; s < (f + 1) * scale; ++s) m.masked_indices.push_back(s);
  return m;
}

VideoClip apply_mask(const VideoClip& clip, const MaskSpec& mask) {
  if (mask.modality != Modality::kVideo)
    throw std::invalid_argument("apply_mask: modality mismatch (video clip, non-video mask)");
  VideoClip out = clip;
  int64_t T = clip.length();
  int64_t hw = clip.frames.dim(1) * clip.frames.dim(2);
  for (int64_t f : mask.masked_indices) {
    if (f < 0 || f >= T) throw std::out_of_range("apply_mask: frame index out of bounds");
    std::fill_n(out.frames.data.begin() + f * hw, hw, 0.0);
  }
  return out;
}

AudioClip apply_mask(const AudioClip& clip, const MaskSpec& mask) {
  if (mask.modality != Modality::kAudio)
    throw std::invalid_argument("apply_mask: modality mismatch (audio clip, non-audio mask)");
  AudioClip out = clip;
  int64_t n = clip.samples.numel();
  for (int64_t s : mask.masked_indices) {
    if (s < 0 || s >= n) throw std::out_of_range("apply_mask: sample index out of bounds");
    out.samples.data[static_cast<size_t>(s)] = 0.0;
  }
  return out;
}

AudioClip fit_audio_to_frames(AudioClip clip, int64_t t_frames) {
  int64_t want = t_frames * kAudioScale;
  clip.samples.data.resize(static_cast<size_t>(want), 0.0);
  clip.samples.shape = {want};
  return clip;
}

LoadedClip load_record(const corpus::UtteranceRecord& record, const PreprocessStats& stats) {
  Tensor raw = media::video_to_tensor(media::read_video(record.video_ref));
  int64_t total_frames = raw.dim(0);
  auto first = static_cast<int64_t>(std::llround(record.media_offset_s * media::kVideoFps));
  auto want = static_cast<int64_t>(std::llround(record.duration_s * media::kVideoFps));
  first = std::min(first, std::max<int64_t>(0, total_frames - 1));
  int64_t last = std::min(total_frames, first + std::max<int64_t>(1, want));
  int64_t T = last - first;
  Tensor sliced({T, raw.dim(1), raw.dim(2)});
  std::copy(raw.data.begin() + first * raw.dim(1) * raw.dim(2),
            raw.data.begin() + last * raw.dim(1) * raw.dim(2), sliced.data.begin());

  LoadedClip out;
  out.video = preprocess_video(sliced, record.crop_box, stats, record.id);

  std::vector<int16_t> all = media::read_audio(record.audio_ref);
  int64_t s0 = std::min<int64_t>(static_cast<int64_t>(all.size()), first * kAudioScale);
  int64_t s1 = std::min<int64_t>(static_cast<int64_t>(all.size()), last * kAudioScale);
  std::vector<int16_t> cut(all.begin() + s0, all.begin() + s1);
  out.audio.source_id = record.id;
  out.audio.samples = media::audio_to_tensor(cut);
  out.audio = fit_audio_to_frames(std::move(out.audio), T);
  return out;
}

}  // namespace mavis::datapipe
