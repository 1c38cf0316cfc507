// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/media.hpp"

#include <cstring>
#include <fstream>

#include "mavis/common.hpp"

namespace mavis::media {

namespace {

constexpr char kVideoMagic[6] = {'M', 'V', 'S', 'V', '1', '\n'};
constexpr char kAudioMagic[6] = {'M', 'V', 'S', 'A', '1', '\n'};

void write_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

}  // namespace

void write_video(const std::filesystem::path& path, const VideoRaster& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write video file: " + path.string());
  out.write(kVideoMagic, sizeof(kVideoMagic));
  write_u32(out, static_cast<uint32_t>(v.frames()));
  write_u32(out, static_cast<uint32_t>(v.height));
  write_u32(out, static_cast<uint32_t>(v.width));
  out.write(reinterpret_cast<const char*>(v.pixels.data()),
            static_cast<std::streamsize>(v.pixels.size()));
}

VideoRaster read_video(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open video file: " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kVideoMagic, 6) != 0)
    throw std::runtime_error("bad video magic in " + path.string());
  uint32_t t = read_u32(in), h = read_u32(in), w = read_u32(in);
  VideoRaster v;
  v.height = h;
  v.width = w;
  v.pixels.resize(size_t(t) * h * w);
  in.read(reinterpret_cast<char*>(v.pixels.data()), static_cast<std::streamsize>(v.pixels.size()));
  if (!in) throw std::runtime_error("truncated video file: " + path.string());
  return v;
}

void write_audio(const std::filesystem::path& path, const std::vector<int16_t>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write audio file: " + path.string());
  out.write(kAudioMagic, sizeof(kAudioMagic));
  write_u32(out, static_cast<uint32_t>(samples.size()));
  for (int16_t s : samples) {
    unsigned char b[2] = {static_cast<unsigned char>(uint16_t(s)),
                          static_cast<unsigned char>(uint16_t(s) >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
}

std::vector<int16_t> read_audio(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open audio file: " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kAudioMagic, 6) != 0)
    throw std::runtime_error("bad audio magic in " + path.string());
  uint32_t n = read_u32(in);
  std::vector<int16_t> samples(n);
  for (uint32_t i = 0; i < n; ++i) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    samples[i] = static_cast<int16_t>(uint16_t(b[0]) | uint16_t(b[1]) << 8);
  }
  if (!in) throw std::runtime_error("truncated audio file: " + path.string());
  return samples;
}

Tensor video_to_tensor(const VideoRaster& v) {
  Tensor t({v.frames(), v.height, v.width});
  for (size_t i = 0; i < v.pixels.size(); ++i) t.data[i] = double(v.pixels[i]) / 255.0;
  return t;
}

Tensor audio_to_tensor(const std::vector<int16_t>& samples) {
  Tensor t({static_cast<int64_t>(samples.size())});
  for (size_t i = 0; i < samples.size(); ++i) t.data[i] = double(samples[i]) / 32768.0;
  return t;
}

}  // namespace mavis::media
