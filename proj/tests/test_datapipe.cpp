// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mavis/corpus/synthetic.hpp"
#include "mavis/datapipe.hpp"
#include "mavis/media.hpp"

using namespace mavis;
using namespace mavis::datapipe;
namespace fs = std::filesystem;

namespace {

Tensor const_frames(int64_t t, int64_t h, int64_t w, double v) { return Tensor::full({t, h, w}, v); }

VideoClip make_roi_clip(Rng& rng, int64_t t) {
  VideoClip c;
  c.frames = Tensor({t, kRoiSize, kRoiSize});
  c.frames.fill_normal(rng, 0.0, 1.0);
  return c;
}

}  // namespace

TEST_CASE("preprocess_video standardization identities") {
  PreprocessStats st{0.4, 0.2};
  // constant frames equal to the mean -> all zeros
  Tensor raw = const_frames(2, 104, 104, 0.4);
  VideoClip out = preprocess_video(raw, {{{4, 4, 100, 100}}}, st);
  CHECK(out.frames.dim(1) == 96);
  for (double v : out.frames.data) CHECK(v == doctest::Approx(0.0));

  // mean 0 / std 1 -> crop only
  PreprocessStats id{0.0, 1.0};
  Tensor raw2 = const_frames(1, 104, 104, 0.7);
  VideoClip out2 = preprocess_video(raw2, {{{4, 4, 100, 100}}}, id);
  for (double v : out2.frames.data) CHECK(v == doctest::Approx(0.7));

  // pixel at mean + std -> exactly 1.0
  Tensor raw3 = const_frames(1, 96, 96, 0.4 + 0.2);
  VideoClip out3 = preprocess_video(raw3, std::nullopt, st);
  for (double v : out3.frames.data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("preprocess_video rejects out-of-bounds crop boxes") {
  PreprocessStats st{0.0, 1.0};
  Tensor raw = const_frames(1, 100, 100, 0.5);
  CHECK_THROWS(preprocess_video(raw, {{{10, 10, 106, 106}}}, st));
  CHECK_THROWS(preprocess_video(raw, {{{0, 0, 95, 96}}}, st));  // not 96 wide
}

TEST_CASE("standardization round-trip recovers the cropped input") {
  Rng rng(3);
  Tensor raw({2, 104, 104});
  raw.fill_normal(rng, 0.5, 0.1);
  PreprocessStats st{0.43, 0.21};
  VideoClip out = preprocess_video(raw, {{{4, 4, 100, 100}}}, st);
  for (int64_t t = 0; t < 2; ++t)
    for (int64_t y = 0; y < 96; ++y)
      for (int64_t x = 0; x < 96; ++x) {
        double rec = out.frames.data[(t * 96 + y) * 96 + x] * st.std + st.mean;
        double orig = raw.data[(t * 104 + y + 4) * 104 + x + 4];
        CHECK(std::fabs(rec - orig) < 1e-9);
      }
}

TEST_CASE("crop_and_flip: involution and temporal consistency") {
  Rng rng(17);
  VideoClip clip = make_roi_clip(rng, 4);
  VideoClip once = crop_and_flip(clip, 3, 5, true);
  CHECK(once.frames.dim(1) == kCropSize);
  // flipping the flipped crop recovers the unflipped crop
  VideoClip plain = crop_and_flip(clip, 3, 5, false);
  for (int64_t t = 0; t < 4; ++t)
    for (int64_t y = 0; y < kCropSize; ++y)
      for (int64_t x = 0; x < kCropSize; ++x) {
        double a = once.frames.data[(t * kCropSize + y) * kCropSize + (kCropSize - 1 - x)];
        double b = plain.frames.data[(t * kCropSize + y) * kCropSize + x];
        CHECK(a == b);
      }
  // each output frame equals the same transform of its input frame: frame t
  // of the augmented clip depends only on frame t of the source.
  VideoClip shifted = clip;
  for (int64_t i = 0; i < 96 * 96; ++i) shifted.frames.data[3 * 96 * 96 + i] += 1.0;
  VideoClip aug_a = crop_and_flip(clip, 2, 2, true);
  VideoClip aug_b = crop_and_flip(shifted, 2, 2, true);
  for (int64_t t = 0; t < 3; ++t)
    for (int64_t i = 0; i < kCropSize * kCropSize; ++i)
      CHECK(aug_a.frames.data[t * kCropSize * kCropSize + i] ==
            aug_b.frames.data[t * kCropSize * kCropSize + i]);
}

TEST_CASE("augment flip frequency is 0.5 within binomial bounds") {
  Rng rng(29);
  VideoClip clip = make_roi_clip(rng, 1);
  // mark so flips are detectable: every row increases along x
  for (int64_t y = 0; y < 96; ++y)
    for (int64_t x = 0; x < 96; ++x) clip.frames.data[y * 96 + x] = double(x);
  int flips = 0;
  const int n = 10000;
  Rng arng(101);
  for (int i = 0; i < n; ++i) {
    VideoClip a = augment(clip, arng);
    // flipped iff first row decreasing
    if (a.frames.data[0] > a.frames.data[1]) ++flips;
  }
  double freq = double(flips) / n;
  CHECK(freq == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +- 0.02
  CHECK(std::fabs(freq - 0.5) <= 0.02);
}

TEST_CASE("augment offsets stay within [0,8]^2") {
  Rng rng(31);
  VideoClip clip = make_roi_clip(rng, 2);
  Rng arng(7);
  for (int i = 0; i < 200; ++i) {
    VideoClip a = augment(clip, arng);
    CHECK(a.frames.dim(1) == 88);
    CHECK(a.frames.dim(2) == 88);
  }
}

TEST_CASE("sample_frame_mask: union of spans and degenerate prob") {
  // starts at {2,7} -> masked {2,3,4,7,8,9}
  struct FixedRng {
  };
  // deterministic construction: emulate by hand through the public contract.
  // Probability 0 never masks:
  Rng rng(3);
  MaskSpec none = sample_frame_mask(10, 0.0, 3, rng);
  CHECK(none.masked_indices.empty());
  // Probability 1 masks everything:
  MaskSpec all = sample_frame_mask(10, 1.0, 3, rng);
  CHECK(all.masked_indices.size() == 10);
  // Span union with prob 1 on T=4, span 3: {0,1,2,3}
  MaskSpec u = sample_frame_mask(4, 1.0, 3, rng);
  std::vector<int64_t> want{0, 1, 2, 3};
  CHECK(u.masked_indices == want);
}

TEST_CASE("mask span arithmetic: explicit start set") {
  // Build the documented example through derive semantics: starts {2,7} on
  // T=10 with span 3 give {2,3,4,7,8,9}. Emulated with a biased rng by
  // searching a seed whose start draws hit exactly {2,7}.
  for (uint64_t seed = 0; seed < 20000; ++seed) {
    Rng rng(seed);
    std::vector<int64_t> starts;
    for (int64_t i = 0; i < 10; ++i)
      if (rng.uniform() < 0.2) starts.push_back(i);
    if (starts == std::vector<int64_t>{2, 7}) {
      Rng rng2(seed);
      MaskSpec m = sample_frame_mask(10, 0.2, 3, rng2);
      std::vector<int64_t> want{2, 3, 4, 7, 8, 9};
      CHECK(m.masked_indices == want);
      return;
    }
  }
  FAIL("no seed with starts {2,7} found");
}

TEST_CASE("interior-frame mask probability equals 1 - 0.8^3 = 0.488") {
  Rng rng(12345);
  const int draws = 100000;
  const int64_t T = 12, j = 6;  // interior frame (j >= 2)
  int hit = 0;
  for (int i = 0; i < draws; ++i) {
    MaskSpec m = sample_frame_mask(T, 0.2, 3, rng);
    if (std::binary_search(m.masked_indices.begin(), m.masked_indices.end(), j)) ++hit;
  }
  double p = double(hit) / draws;
  CHECK(std::fabs(p - 0.488) <= 0.01);
}

TEST_CASE("derive_audio_mask maps frames to sample ranges") {
  MaskSpec v;
  v.modality = Modality::kVideo;
  v.masked_indices = {2, 3, 4};
  MaskSpec a = derive_audio_mask(v, 640);
  REQUIRE(a.masked_indices.size() == 3 * 640);
  CHECK(a.masked_indices.front() == 1280);
  CHECK(a.masked_indices.back() == 3199);  // [1280, 3200)
  // contiguity
  for (size_t i = 1; i < a.masked_indices.size(); ++i)
    CHECK(a.masked_indices[i] == a.masked_indices[i - 1] + 1);

  MaskSpec empty;
  empty.modality = Modality::kVideo;
  CHECK(derive_audio_mask(empty).masked_indices.empty());

  // audio/video alignment: dividing back by 640 recovers the video mask
  std::set<int64_t> rec;
  for (int64_t s : a.masked_indices) rec.insert(s / 640);
  CHECK(std::vector<int64_t>(rec.begin(), rec.end()) == v.masked_indices);
}

TEST_CASE("apply_mask changes exactly the masked positions") {
  Rng rng(9);
  VideoClip clip = make_roi_clip(rng, 5);
  MaskSpec empty;
  empty.modality = Modality::kVideo;
  VideoClip same = apply_mask(clip, empty);
  CHECK(same.frames.data == clip.frames.data);

  MaskSpec full;
  full.modality = Modality::kVideo;
  for (int64_t i = 0; i < 5; ++i) full.masked_indices.push_back(i);
  VideoClip zeroed = apply_mask(clip, full);
  for (double v : zeroed.frames.data) CHECK(v == 0.0);

  MaskSpec first;
  first.modality = Modality::kVideo;
  first.masked_indices = {0};
  VideoClip m0 = apply_mask(clip, first);
  int64_t hw = 96 * 96;
  for (int64_t i = 0; i < hw; ++i) CHECK(m0.frames.data[i] == 0.0);
  for (int64_t i = hw; i < 5 * hw; ++i) CHECK(m0.frames.data[i] == clip.frames.data[i]);

  // modality mismatch is an error
  MaskSpec am;
  am.modality = Modality::kAudio;
  CHECK_THROWS(apply_mask(clip, am));
  // out-of-bounds index is an error
  MaskSpec oob;
  oob.modality = Modality::kVideo;
  oob.masked_indices = {99};
  CHECK_THROWS(apply_mask(clip, oob));
}

TEST_CASE("audio fit pads or truncates to 640*T") {
  AudioClip a;
  a.samples = Tensor::full({1000}, 0.5);
  AudioClip padded = fit_audio_to_frames(a, 2);
  CHECK(padded.samples.numel() == 1280);
  CHECK(padded.samples.data[999] == 0.5);
  CHECK(padded.samples.data[1000] == 0.0);
  AudioClip cut = fit_audio_to_frames(a, 1);
  CHECK(cut.samples.numel() == 640);
}

TEST_CASE("corpus stats persist and load next to the manifest") {
  corpus::SyntheticSpec spec;
  spec.n_utterances = 4;
  spec.languages = {"aa"};
  spec.seed = 3;
  fs::path dir = fs::temp_directory_path() / "mavis-test-stats";
  fs::remove_all(dir);
  corpus::CorpusManifest m = corpus::generate_synthetic_corpus(spec, dir);
  PreprocessStats st = compute_corpus_stats(m);
  CHECK(st.std > 0.0);
  save_stats(st, dir / "manifest.stats.json");
  PreprocessStats st2 = load_stats(dir / "manifest.stats.json");
  CHECK(st2.mean == doctest::Approx(st.mean));
  CHECK(st2.std == doctest::Approx(st.std));

  // standardized corpus has ~zero mean / unit variance by construction
  double sum = 0.0, sumsq = 0.0;
  int64_t n = 0;
  for (const auto& r : m.records) {
    LoadedClip lc = load_record(r, st);
    for (double v : lc.video.frames.data) {
      sum += v;
      sumsq += v * v;
      ++n;
    }
    CHECK(lc.audio.samples.numel() == 640 * lc.video.length());
  }
  CHECK(std::fabs(sum / n) < 1e-6);
  CHECK(sumsq / n == doctest::Approx(1.0).epsilon(1e-6));
}
