// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/corpus/synthetic.hpp"

#include <cmath>
#include <cstring>

#include "mavis/media.hpp"

namespace mavis::corpus {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

int64_t token_count(double duration_s) {
  double frames = duration_s * double(media::kVideoFps);
  auto n = static_cast<int64_t>(std::llround(frames / double(kSynthFramesPerToken)));
  return std::max<int64_t>(1, n);
}

std::string draw_tokens(Rng& rng, int64_t n) {
  const int64_t alphabet = static_cast<int64_t>(std::strlen(kSynthTokens));
  std::string s;
  s.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    s.push_back(kSynthTokens[static_cast<size_t>(rng.uniform_int(0, alphabet - 1))]);
  return s;
}

// Small deterministic dither so frames are not piecewise constant.
double dither(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  uint64_t x = a * 0x9e3779b97f4a7c15ull ^ b * 0xbf58476d1ce4e5b9ull ^
               c * 0x94d049bb133111ebull ^ d + 0x2545f4914f6cdd1dull;
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  return double(x & 0xffff) / 65535.0;  // [0,1]
}

media::VideoRaster render_video(uint64_t utt_hash, const std::string& tokens) {
  const int64_t canvas = kSynthCanvas;
  const int64_t m = kSynthCropMargin;
  const int64_t region = 96;
  const int64_t alphabet = static_cast<int64_t>(std::strlen(kSynthTokens));
  const int64_t band_h = region / alphabet;  // 12 rows per token band
  int64_t T = static_cast<int64_t>(tokens.size()) * kSynthFramesPerToken;

  media::VideoRaster v;
  v.height = canvas;
  v.width = canvas;
  v.pixels.assign(static_cast<size_t>(T * canvas * canvas), 0);
  for (int64_t f = 0; f < T; ++f) {
    int64_t tok_idx = f / kSynthFramesPerToken;
    int64_t band = tokens[static_cast<size_t>(tok_idx)] - kSynthTokens[0];
    for (int64_t y = 0; y < canvas; ++y) {
      for (int64_t x = 0; x < canvas; ++x) {
        bool in_region = y >= m && y < m + region && x >= m && x < m + region;
        double base = 25.0;
        if (in_region) {
          int64_t ry = y - m;
          if (ry >= band * band_h && ry < (band + 1) * band_h) base = 230.0;
        }
        base += 16.0 * (dither(utt_hash, uint64_t(f), uint64_t(y), uint64_t(x)) - 0.5);
        base = std::min(255.0, std::max(0.0, base));
        v.pixels[static_cast<size_t>((f * canvas + y) * canvas + x)] =
            static_cast<uint8_t>(std::lround(base));
      }
    }
  }
  return v;
}

std::vector<int16_t> render_audio(const std::string& tokens) {
  const int64_t spf = media::kSamplesPerFrame;
  const int64_t per_token = spf * kSynthFramesPerToken;
  std::vector<int16_t> samples;
  samples.reserve(static_cast<size_t>(per_token) * tokens.size());
  for (char c : tokens) {
    int band = c - kSynthTokens[0];
    double freq = 400.0 + 250.0 * double(band);
    for (int64_t i = 0; i < per_token; ++i) {
      double tsec = double(i) / double(media::kAudioRate);
      double val = 0.25 * std::sin(2.0 * kPi * freq * tsec);
      samples.push_back(static_cast<int16_t>(std::lround(val * 32767.0)));
    }
  }
  return samples;
}

UtteranceRecord make_record(const std::string& lang, int64_t index, const std::string& tokens,
                            const fs::path& out_dir) {
  UtteranceRecord r;
  r.id = strfmt("synth-%s-%05lld", lang.c_str(), (long long)index);
  r.lang = lang;
  r.text = tokens;
  int64_t frames = static_cast<int64_t>(tokens.size()) * kSynthFramesPerToken;
  r.duration_s = double(frames) / double(media::kVideoFps);
  r.video_ref = (out_dir / (r.id + ".mvv")).string();
  r.audio_ref = (out_dir / (r.id + ".mva")).string();
  r.crop_box = {{kSynthCropMargin, kSynthCropMargin, kSynthCropMargin + 96, kSynthCropMargin + 96}};
  return r;
}

}  // namespace

CorpusManifest generate_synthetic_corpus(const SyntheticSpec& spec, const fs::path& out_dir,
                                         bool write_media) {
  if (spec.n_utterances < 1) throw UserError("generate_synthetic_corpus: need n >= 1");
  if (spec.languages.empty()) throw UserError("generate_synthetic_corpus: need >= 1 language");
  if (!(spec.min_duration_s > 0.0) || spec.max_duration_s < spec.min_duration_s)
    throw UserError("generate_synthetic_corpus: bad duration range");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw UserError("cannot create output directory " + out_dir.string());

  CorpusManifest m;
  m.name = "synthetic";
  Rng rng(spec.seed);
  for (int64_t i = 0; i < spec.n_utterances; ++i) {
    const std::string& lang = spec.languages[static_cast<size_t>(i) % spec.languages.size()];
    double dur = spec.min_duration_s + rng.uniform() * (spec.max_duration_s - spec.min_duration_s);
    std::string tokens = draw_tokens(rng, token_count(dur));
    UtteranceRecord r = make_record(lang, i, tokens, out_dir);
    if (write_media) {
      media::write_video(r.video_ref, render_video(fnv1a64(r.id), tokens));
      media::write_audio(r.audio_ref, render_audio(tokens));
    }
    m.records.push_back(std::move(r));
  }
  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

CorpusManifest synthesize_manifest_hours(const std::map<std::string, double>& lang_hours,
                                         double min_duration_s, double max_duration_s,
                                         uint64_t seed) {
  CorpusManifest m;
  m.name = "synthetic-hours";
  Rng rng(seed);
  fs::path fake_dir = "unwritten-media";
  int64_t index = 0;
  for (const auto& [lang, hours] : lang_hours) {
    double acc_s = 0.0;
    double target_s = hours * 3600.0;
    while (acc_s < target_s) {
      double dur = min_duration_s + rng.uniform() * (max_duration_s - min_duration_s);
      std::string tokens = draw_tokens(rng, token_count(dur));
      UtteranceRecord r = make_record(lang, index++, tokens, fake_dir);
      acc_s += r.duration_s;
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

}  // namespace mavis::corpus
