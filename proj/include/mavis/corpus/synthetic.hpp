// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic audio-visual corpus. Every utterance carries a
// latent token string; each token is rendered as a horizontal-band pattern in
// the video (flip-invariant, so horizontal-flip augmentation cannot alias
// tokens) and a fixed-frequency tone in the audio, with the transcript being
// the token string itself. Token identity is therefore recoverable from
// either modality.

#ifndef MAVIS_CORPUS_SYNTHETIC_HPP
#define MAVIS_CORPUS_SYNTHETIC_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mavis/corpus/manifest.hpp"

namespace mavis::corpus {

constexpr const char* kSynthTokens = "abcdefgh";
constexpr int64_t kSynthFramesPerToken = 2;
// Rendered canvas is slightly larger than the 96x96 mouth region so the crop
// boxes in the manifest do real work.
constexpr int64_t kSynthCanvas = 104;
constexpr int64_t kSynthCropMargin = 4;

struct SyntheticSpec {
  int64_t n_utterances = 10;
  std::vector<std::string> languages = {"aa"};
  double min_duration_s = 0.6;
  double max_duration_s = 1.2;
  uint64_t seed = 0;
};

// Writes media files and a manifest.jsonl under out_dir; byte-identical
// across runs with identical arguments.
CorpusManifest generate_synthetic_corpus(const SyntheticSpec& spec,
                                         const std::filesystem::path& out_dir,
                                         bool write_media = true);

// Manifest-only synthesis sized by per-language hour targets (media refs are
// named but not written). Used where only durations and tags matter.
CorpusManifest synthesize_manifest_hours(const std::map<std::string, double>& lang_hours,
                                         double min_duration_s, double max_duration_s,
                                         uint64_t seed);

}  // namespace mavis::corpus

#endif  // MAVIS_CORPUS_SYNTHETIC_HPP
