// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MAVIS_CORPUS_MANIFEST_HPP
#define MAVIS_CORPUS_MANIFEST_HPP

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mavis/common.hpp"

namespace mavis::corpus {

// One audio-video(-text) clip. Media refs are stored resolved (absolute).
struct UtteranceRecord {
  std::string id;
  std::string video_ref;
  std::string audio_ref;
  double duration_s = 0.0;
  std::string lang;  // ISO-639-1 style tag
  std::optional<std::string> text;
  std::optional<std::array<int64_t, 4>> crop_box;  // [x0, y0, x1, y1), pixels
  // Offset of this record inside its media file, nonzero for records produced
  // by split_long_utterances.
  double media_offset_s = 0.0;
};

struct CorpusManifest {
  std::string name;
  std::vector<UtteranceRecord> records;

  double total_hours() const;
  bool empty() const { return records.empty(); }
};

// Parses a line-delimited manifest. Malformed records are errors (never
// silently dropped); messages carry the 1-based line number and field name.
// If allowed_languages is nonempty, any other tag is rejected.
CorpusManifest load_manifest(const std::filesystem::path& path,
                             const std::vector<std::string>& allowed_languages = {});

// Writes records one JSON object per line with fixed field order
// (id, video, audio, duration_s, lang, text, crop_box). Media refs are
// relativized against the output directory when possible. Serialization is
// byte-deterministic for identical manifests.
void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

std::map<std::string, double> hours_by_language(const CorpusManifest& manifest);

// Splits every record longer than max_duration_s into ceil(d/max) equal
// segments. Split segments get ids "<id>#t<offset>" carrying the media
// offset, keep language and crop box, and drop the transcript (a text span
// cannot be attributed to a time span without an alignment).
CorpusManifest split_long_utterances(const CorpusManifest& manifest, double max_duration_s = 24.0);

// Random sample of `hours` hours of one language, without replacement:
// records are shuffled by seed and accumulated greedily until the budget is
// first crossed, so the result overshoots by at most one clip. Requesting
// all available hours (or more, up to rounding) returns every record of the
// language; requesting more is an error stating available vs requested.
CorpusManifest sample_hours(const CorpusManifest& manifest, const std::string& language,
                            double hours, uint64_t seed);

}  // namespace mavis::corpus

#endif  // MAVIS_CORPUS_MANIFEST_HPP
