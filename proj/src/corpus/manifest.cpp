// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/corpus/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mavis::corpus {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

double CorpusManifest::total_hours() const {
  double s = 0.0;
  for (const auto& r : records) s += r.duration_s;
  return s / 3600.0;
}

namespace {

[[noreturn]] void line_error(size_t line_no, const std::string& what) {
  throw UserError(strfmt("manifest line %zu: %s", line_no, what.c_str()));
}

std::string require_string(const ordered_json& j, const char* field, size_t line_no) {
  if (!j.contains(field) || !j[field].is_string())
    line_error(line_no, strfmt("missing or non-string field '%s'", field));
  return j[field].get<std::string>();
}

}  // namespace

CorpusManifest load_manifest(const fs::path& path,
                             const std::vector<std::string>& allowed_languages) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open manifest: " + path.string());
  fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

  CorpusManifest m;
  m.name = path.stem().string();
  std::set<std::string> seen_ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      line_error(line_no, std::string("parse failure: ") + e.what());
    }
    UtteranceRecord r;
    r.id = require_string(j, "id", line_no);
    if (seen_ids.count(r.id)) line_error(line_no, "duplicate id '" + r.id + "'");
    seen_ids.insert(r.id);

    std::string video = require_string(j, "video", line_no);
    std::string audio = require_string(j, "audio", line_no);
    r.video_ref = fs::path(video).is_absolute() ? video : (base / video).lexically_normal().string();
    r.audio_ref = fs::path(audio).is_absolute() ? audio : (base / audio).lexically_normal().string();

    if (!j.contains("duration_s") || !j["duration_s"].is_number())
      line_error(line_no, "missing or non-numeric field 'duration_s'");
    r.duration_s = j["duration_s"].get<double>();
    if (!(r.duration_s > 0.0) || !std::isfinite(r.duration_s))
      line_error(line_no, strfmt("nonpositive duration for id '%s'", r.id.c_str()));

    r.lang = require_string(j, "lang", line_no);
    if (!allowed_languages.empty() &&
        std::find(allowed_languages.begin(), allowed_languages.end(), r.lang) ==
            allowed_languages.end())
      line_error(line_no, "language '" + r.lang + "' not in the configured language set");

    if (j.contains("text") && !j["text"].is_null()) {
      if (!j["text"].is_string()) line_error(line_no, "field 'text' must be a string or null");
      r.text = j["text"].get<std::string>();
    }
    if (j.contains("crop_box") && !j["crop_box"].is_null()) {
      const auto& cb = j["crop_box"];
      if (!cb.is_array() || cb.size() != 4)
        line_error(line_no, "field 'crop_box' must be an array of 4 integers");
      std::array<int64_t, 4> box{};
      for (size_t k = 0; k < 4; ++k) {
        if (!cb[k].is_number_integer()) line_error(line_no, "crop_box entries must be integers");
        box[k] = cb[k].get<int64_t>();
      }
      r.crop_box = box;
    }
    if (j.contains("media_offset_s") && j["media_offset_s"].is_number())
      r.media_offset_s = j["media_offset_s"].get<double>();
    m.records.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const CorpusManifest& manifest, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write manifest: " + path.string());
  fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

  auto relativize = [&](const std::string& ref) -> std::string {
    std::error_code ec;
    fs::path rel = fs::relative(ref, base, ec);
    if (ec || rel.empty() || rel.string().rfind("..", 0) == 0) return ref;
    return rel.string();
  };

  for (const auto& r : manifest.records) {
    ordered_json j;
    j["id"] = r.id;
    j["video"] = relativize(r.video_ref);
    j["audio"] = relativize(r.audio_ref);
    j["duration_s"] = r.duration_s;
    j["lang"] = r.lang;
    if (r.text) j["text"] = *r.text;
    if (r.crop_box)
      j["crop_box"] = {(*r.crop_box)[0], (*r.crop_box)[1], (*r.crop_box)[2], (*r.crop_box)[3]};
    if (r.media_offset_s != 0.0) j["media_offset_s"] = r.media_offset_s;
    out << j.dump() << "\n";
  }
}

std::map<std::string, double> hours_by_language(const CorpusManifest& manifest) {
  std::map<std::string, double> acc;
  for (const auto& r : manifest.records) acc[r.lang] += r.duration_s;
  for (auto& [k, v] : acc) v /= 3600.0;
  return acc;
}

CorpusManifest split_long_utterances(const CorpusManifest& manifest, double max_duration_s) {
  if (!(max_duration_s > 0.0)) throw UserError("split_long_utterances: max_duration must be > 0");
  CorpusManifest out;
  out.name = manifest.name;
  for (const auto& r : manifest.records) {
    if (r.duration_s <= max_duration_s) {
      out.records.push_back(r);
      continue;
    }
    auto n_seg = static_cast<int64_t>(std::ceil(r.duration_s / max_duration_s));
    double seg = r.duration_s / double(n_seg);
    for (int64_t k = 0; k < n_seg; ++k) {
      UtteranceRecord s = r;
      double offset = seg * double(k);
      s.id = strfmt("%s#t%.3f", r.id.c_str(), offset);
      s.duration_s = seg;
      s.media_offset_s = r.media_offset_s + offset;
      s.text.reset();  // no alignment to attribute a text span to a segment
      out.records.push_back(std::move(s));
    }
  }
  return out;
}

CorpusManifest sample_hours(const CorpusManifest& manifest, const std::string& language,
                            double hours, uint64_t seed) {
  if (hours < 0.0) throw UserError("sample_hours: negative hour budget");
  CorpusManifest out;
  out.name = manifest.name + "/sample-" + language;
  if (hours == 0.0) return out;

  std::vector<const UtteranceRecord*> pool;
  double available_h = 0.0;
  for (const auto& r : manifest.records) {
    if (r.lang == language) {
      pool.push_back(&r);
      available_h += r.duration_s / 3600.0;
    }
  }
  constexpr double kTolH = 1e-9;
  if (hours > available_h + kTolH)
    throw UserError(strfmt("sample_hours: %s has %.6f h available, requested %.6f h",
                           language.c_str(), available_h, hours));
  if (hours >= available_h - kTolH) {
    for (const auto* r : pool) out.records.push_back(*r);
    return out;
  }

  Rng rng(seed);
  rng.shuffle(pool);
  double acc_h = 0.0;
  for (const auto* r : pool) {
    out.records.push_back(*r);
    acc_h += r->duration_s / 3600.0;
    if (acc_h >= hours) break;  // stop at first crossing of the budget
  }
  return out;
}

}  // namespace mavis::corpus
