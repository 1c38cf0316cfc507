// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mavis/corpus/manifest.hpp"
#include "mavis/corpus/sampling.hpp"
#include "mavis/corpus/synthetic.hpp"

using namespace mavis;
using namespace mavis::corpus;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("mavis-test-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void append_records(CorpusManifest& m, const std::string& lang, int n, double dur_s) {
  for (int i = 0; i < n; ++i) {
    UtteranceRecord r;
    r.id = lang + "-" + std::to_string(m.records.size());
    r.lang = lang;
    r.duration_s = dur_s;
    r.video_ref = "/media/" + r.id + ".mvv";
    r.audio_ref = "/media/" + r.id + ".mva";
    m.records.push_back(std::move(r));
  }
}

// AVSpeech-shaped manifest: per-language totals from the pre-training corpus
// statistics, as 15-minute clips.
CorpusManifest avspeech_shaped() {
  CorpusManifest m;
  m.name = "avspeech-shaped";
  append_records(m, "en", 1333 * 4, 900.0);
  append_records(m, "pt", 337 * 4, 900.0);
  append_records(m, "es", 204 * 4, 900.0);
  append_records(m, "fr", 117 * 4, 900.0);
  append_records(m, "it", 68 * 4, 900.0);
  append_records(m, "zh", 65 * 4, 900.0);
  return m;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("load_manifest parses a well-formed file") {
  fs::path dir = temp_dir("manifest-ok");
  std::ofstream out(dir / "m.jsonl");
  out << R"({"id":"a","video":"a.mvv","audio":"a.mva","duration_s":1.5,"lang":"aa","text":"abc"})" << "\n";
  out << R"({"id":"b","video":"b.mvv","audio":"b.mva","duration_s":2.0,"lang":"bb"})" << "\n";
  out << R"({"id":"c","video":"c.mvv","audio":"c.mva","duration_s":0.5,"lang":"aa","crop_box":[4,4,100,100]})" << "\n";
  out.close();
  CorpusManifest m = load_manifest(dir / "m.jsonl");
  REQUIRE(m.records.size() == 3);
  CHECK(m.records[0].text.value() == "abc");
  CHECK_FALSE(m.records[1].text.has_value());
  CHECK(m.records[2].crop_box.value()[2] == 100);
  // relative media refs resolve against the manifest directory
  CHECK(m.records[0].video_ref == (dir / "a.mvv").string());
}

TEST_CASE("load_manifest rejects duplicate ids naming the id") {
  fs::path dir = temp_dir("manifest-dup");
  std::ofstream out(dir / "m.jsonl");
  out << R"({"id":"x","video":"v","audio":"a","duration_s":1.0,"lang":"aa"})" << "\n";
  out << R"({"id":"x","video":"v","audio":"a","duration_s":1.0,"lang":"aa"})" << "\n";
  out.close();
  CHECK_THROWS_WITH_AS(load_manifest(dir / "m.jsonl"),
                       doctest::Contains("duplicate id 'x'"), UserError);
}

TEST_CASE("load_manifest rejects nonpositive duration with line number") {
  fs::path dir = temp_dir("manifest-dur");
  std::ofstream out(dir / "m.jsonl");
  out << R"({"id":"x","video":"v","audio":"a","duration_s":-1.0,"lang":"aa"})" << "\n";
  out.close();
  try {
    load_manifest(dir / "m.jsonl");
    FAIL("expected error");
  } catch (const UserError& e) {
    CHECK(std::string(e.what()).find("nonpositive duration") != std::string::npos);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("load_manifest rejects malformed json naming the line") {
  fs::path dir = temp_dir("manifest-bad");
  std::ofstream out(dir / "m.jsonl");
  out << R"({"id":"ok","video":"v","audio":"a","duration_s":1.0,"lang":"aa"})" << "\n";
  out << "{not json}" << "\n";
  out.close();
  CHECK_THROWS_WITH_AS(load_manifest(dir / "m.jsonl"), doctest::Contains("line 2"), UserError);
}

TEST_CASE("hours_by_language matches the pre-training corpus statistics") {
  CorpusManifest m = avspeech_shaped();
  auto h = hours_by_language(m);
  CHECK(h.at("en") == doctest::Approx(1333.0));
  CHECK(h.at("pt") == doctest::Approx(337.0));
  CHECK(h.at("es") == doctest::Approx(204.0));
  CHECK(h.at("fr") == doctest::Approx(117.0));
  CHECK(h.at("it") == doctest::Approx(68.0));
  CHECK(h.at("zh") == doctest::Approx(65.0));
}

TEST_CASE("hours_by_language: empty manifest and simple arithmetic") {
  CorpusManifest empty;
  CHECK(hours_by_language(empty).empty());
  CorpusManifest m;
  append_records(m, "en", 2, 1800.0);  // two 30-minute records
  auto h = hours_by_language(m);
  CHECK(h.size() == 1);
  CHECK(h.at("en") == doctest::Approx(1.0));
}

TEST_CASE("split_long_utterances splits into equal segments") {
  CorpusManifest m;
  append_records(m, "aa", 1, 30.0);
  CorpusManifest s = split_long_utterances(m, 24.0);
  REQUIRE(s.records.size() == 2);
  CHECK(s.records[0].duration_s == doctest::Approx(15.0));
  CHECK(s.records[1].duration_s == doctest::Approx(15.0));
  CHECK(s.records[1].media_offset_s == doctest::Approx(15.0));
  CHECK(s.records[0].id != s.records[1].id);

  CorpusManifest m2;
  append_records(m2, "aa", 1, 20.0);
  CHECK(split_long_utterances(m2, 24.0).records.size() == 1);
  CHECK(split_long_utterances(m2, 24.0).records[0].id == m2.records[0].id);

  CorpusManifest m3;
  append_records(m3, "aa", 1, 50.0);
  CorpusManifest s3 = split_long_utterances(m3, 24.0);
  REQUIRE(s3.records.size() == 3);
  for (const auto& r : s3.records) {
    CHECK(r.duration_s <= 24.0);
    CHECK(r.duration_s == doctest::Approx(50.0 / 3.0));
  }
}

TEST_CASE("split conserves total duration within 1e-6 h") {
  Rng rng(5);
  CorpusManifest m;
  for (int i = 0; i < 50; ++i) {
    UtteranceRecord r;
    r.id = "u" + std::to_string(i);
    r.lang = "aa";
    r.duration_s = 1.0 + rng.uniform() * 80.0;
    m.records.push_back(r);
  }
  CorpusManifest s = split_long_utterances(m, 24.0);
  CHECK(std::fabs(s.total_hours() - m.total_hours()) < 1e-6);
  for (const auto& r : s.records) CHECK(r.duration_s <= 24.0 + 1e-12);
}

TEST_CASE("sample_hours: budget, zero, insufficiency") {
  CorpusManifest m = avspeech_shaped();
  CorpusManifest s = sample_hours(m, "es", 30.0, 11);
  auto h = hours_by_language(s);
  CHECK(h.size() == 1);
  CHECK(h.at("es") >= 30.0);
  CHECK(h.at("es") <= 30.0 + 900.0 / 3600.0);  // within one clip

  CHECK(sample_hours(m, "es", 0.0, 11).records.empty());

  try {
    sample_hours(m, "zh", 300.0, 11);
    FAIL("expected error");
  } catch (const UserError& e) {
    std::string w = e.what();
    CHECK(w.find("available") != std::string::npos);
    CHECK(w.find("requested") != std::string::npos);
  }
}

TEST_CASE("sample_hours is deterministic and without replacement") {
  CorpusManifest m = avspeech_shaped();
  CorpusManifest a = sample_hours(m, "fr", 12.0, 42);
  CorpusManifest b = sample_hours(m, "fr", 12.0, 42);
  REQUIRE(a.records.size() == b.records.size());
  std::set<std::string> ids;
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].id == b.records[i].id);
    CHECK(ids.insert(a.records[i].id).second);  // no duplicates
  }
  CorpusManifest c = sample_hours(m, "fr", 12.0, 43);
  bool differs = c.records.size() != a.records.size();
  for (size_t i = 0; !differs && i < a.records.size(); ++i)
    differs = a.records[i].id != c.records[i].id;
  CHECK(differs);
}

TEST_CASE("plan_multilingual_re reproduces the 542/791 split") {
  CorpusManifest m = avspeech_shaped();
  SamplingPlan p = plan_multilingual_re(m, 1333.0, 3);
  CHECK(p.per_language_hours.at("en") == doctest::Approx(542.0));
  double others = 0.0;
  for (const auto& [lang, h] : p.per_language_hours)
    if (lang != "en") others += h;
  CHECK(others == doctest::Approx(791.0));

  CorpusManifest only_en;
  append_records(only_en, "en", 40, 900.0);
  SamplingPlan p2 = plan_multilingual_re(only_en, 10.0, 3);
  CHECK(p2.per_language_hours.at("en") == doctest::Approx(10.0));
  CHECK(p2.per_language_hours.size() == 1);

  CHECK_THROWS_AS(plan_multilingual_re(m, 700.0, 3), UserError);
}

TEST_CASE("RE identity: full-budget plan includes every record") {
  CorpusManifest m = avspeech_shaped();
  SamplingPlan p = plan_multilingual_re(m, m.total_hours(), 3);
  CorpusManifest mat = materialize_plan(m, p);
  CHECK(mat.records.size() == m.records.size());
}

TEST_CASE("plan_multilingual_mh splits hours equally") {
  std::vector<std::string> langs = {"en", "it", "pt", "fr", "es", "zh"};
  SamplingPlan p = plan_multilingual_mh(langs, 204.0);
  for (const auto& l : langs) CHECK(p.per_language_hours.at(l) == doctest::Approx(34.0));
  SamplingPlan p30 = plan_multilingual_mh(langs, 30.0);
  for (const auto& l : langs) CHECK(p30.per_language_hours.at(l) == doctest::Approx(5.0));
  SamplingPlan p1 = plan_multilingual_mh({"es"}, 30.0);
  CHECK(p1.per_language_hours.at("es") == doctest::Approx(30.0));
}

TEST_CASE("plan_exclude_language zeroes the excluded language") {
  CorpusManifest m = avspeech_shaped();
  SamplingPlan p = plan_exclude_language(m, "pt", 1333.0, 9);
  CHECK(p.per_language_hours.count("pt") == 0);
  CHECK(p.per_language_hours.at("es") == doctest::Approx(204.0));
  CHECK(p.per_language_hours.at("en") == doctest::Approx(1333.0 - 791.0 + 337.0));
  CorpusManifest mat = materialize_plan(m, p);
  for (const auto& r : mat.records) CHECK(r.lang != "pt");

  // excluding an absent language degenerates to plan_multilingual_re
  SamplingPlan pa = plan_exclude_language(m, "xx", 1333.0, 9);
  SamplingPlan pre = plan_multilingual_re(m, 1333.0, 9);
  CHECK(pa.per_language_hours == pre.per_language_hours);
  CHECK_FALSE(pa.excluded.has_value());

  // excluding English with the rest short of the budget is an error
  CHECK_THROWS_AS(plan_exclude_language(m, "en", 1333.0, 9), UserError);
}

TEST_CASE("budget property: achieved within one clip of planned, per language") {
  CorpusManifest m = avspeech_shaped();
  double max_clip_h = 900.0 / 3600.0;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    SamplingPlan p = plan_multilingual_mh({"en", "pt", "es", "fr", "it", "zh"}, 120.0, seed);
    CorpusManifest mat = materialize_plan(m, p);
    auto h = hours_by_language(mat);
    for (const auto& [lang, planned] : p.per_language_hours)
      CHECK(std::fabs(h.at(lang) - planned) <= max_clip_h);
  }
}

TEST_CASE("materialization is deterministic byte-for-byte after serialization") {
  CorpusManifest m = avspeech_shaped();
  SamplingPlan p = plan_multilingual_re(m, 900.0, 21);
  fs::path dir = temp_dir("determinism");
  CorpusManifest a = materialize_plan(m, p);
  save_manifest(a, dir / "a.jsonl");
  CorpusManifest b = materialize_plan(m, p);
  save_manifest(b, dir / "b.jsonl");
  CHECK(read_file(dir / "a.jsonl") == read_file(dir / "b.jsonl"));
  CHECK(!read_file(dir / "a.jsonl").empty());
}

TEST_CASE("synthetic corpus: determinism, duration range, language keys") {
  SyntheticSpec spec;
  spec.n_utterances = 10;
  spec.languages = {"aa", "bb"};
  spec.seed = 7;
  fs::path d1 = temp_dir("synth1");
  fs::path d2 = temp_dir("synth2");
  CorpusManifest m1 = generate_synthetic_corpus(spec, d1);
  CorpusManifest m2 = generate_synthetic_corpus(spec, d2);
  REQUIRE(m1.records.size() == 10);
  CHECK(read_file(d1 / "manifest.jsonl") == read_file(d2 / "manifest.jsonl"));
  for (const auto& r : m1.records) {
    fs::path v1 = r.video_ref;
    fs::path v2 = d2 / v1.filename();
    CHECK(read_file(v1) == read_file(v2));
    CHECK(!read_file(v1).empty());
  }
  auto h = hours_by_language(m1);
  CHECK(h.size() == 2);
  CHECK(h.count("aa") == 1);
  CHECK(h.count("bb") == 1);

  // round-trip through the serialized manifest
  CorpusManifest loaded = load_manifest(d1 / "manifest.jsonl");
  REQUIRE(loaded.records.size() == m1.records.size());
  CHECK(loaded.records[3].text == m1.records[3].text);

  // long-clip composition: anything over the cap is split under it
  SyntheticSpec long_spec;
  long_spec.n_utterances = 4;
  long_spec.languages = {"aa"};
  long_spec.min_duration_s = 24.5;
  long_spec.max_duration_s = 30.0;
  long_spec.seed = 3;
  CorpusManifest lm = generate_synthetic_corpus(long_spec, temp_dir("synth-long"), false);
  CorpusManifest split = split_long_utterances(lm, 24.0);
  for (const auto& r : split.records) CHECK(r.duration_s <= 24.0);
  CHECK(std::fabs(split.total_hours() - lm.total_hours()) < 1e-6);
}

TEST_CASE("synthesize_manifest_hours hits per-language totals") {
  std::map<std::string, double> targets = {{"aa", 0.2}, {"bb", 0.1}};
  CorpusManifest m = synthesize_manifest_hours(targets, 2.0, 6.0, 5);
  auto h = hours_by_language(m);
  for (const auto& [lang, target] : targets) {
    CHECK(h.at(lang) >= target);
    CHECK(h.at(lang) <= target + 6.0 / 3600.0);
  }
}
