// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Packed media containers (spec in docs/FORMATS.md):
//   video "MVSV1\n" + u32 T,H,W  + T*H*W bytes, grayscale, 25 fps
//   audio "MVSA1\n" + u32 N      + N int16 LE samples at 16 kHz mono

#ifndef MAVIS_MEDIA_HPP
#define MAVIS_MEDIA_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mavis/tensor.hpp"

namespace mavis::media {

constexpr int64_t kVideoFps = 25;
constexpr int64_t kAudioRate = 16000;
constexpr int64_t kSamplesPerFrame = kAudioRate / kVideoFps;  // 640

struct VideoRaster {
  int64_t height = 0, width = 0;
  std::vector<uint8_t> pixels;  // T*H*W
  int64_t frames() const {
    return height * width == 0 ? 0 : static_cast<int64_t>(pixels.size()) / (height * width);
  }
};

void write_video(const std::filesystem::path& path, const VideoRaster& v);
VideoRaster read_video(const std::filesystem::path& path);

void write_audio(const std::filesystem::path& path, const std::vector<int16_t>& samples);
std::vector<int16_t> read_audio(const std::filesystem::path& path);

// Pixel bytes -> [T,H,W] doubles in [0,1].
Tensor video_to_tensor(const VideoRaster& v);
// int16 -> [-1,1) doubles.
Tensor audio_to_tensor(const std::vector<int16_t>& samples);

}  // namespace mavis::media

#endif  // MAVIS_MEDIA_HPP
