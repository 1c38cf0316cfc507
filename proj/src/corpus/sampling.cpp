// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/corpus/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace mavis::corpus {

namespace {

constexpr double kTolH = 1e-9;

double sum_hours(const std::map<std::string, double>& m) {
  double s = 0.0;
  for (const auto& [k, v] : m) s += v;
  return s;
}

uint64_t language_seed(uint64_t seed, const std::string& lang) {
  uint64_t x = seed ^ fnv1a64(lang);
  return splitmix64(x);
}

}  // namespace

std::string to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::kMonolingual: return "monolingual";
    case SamplingStrategy::kMultilingualAll: return "multilingual_all";
    case SamplingStrategy::kMultilingualRe: return "multilingual_re";
    case SamplingStrategy::kMultilingualMh: return "multilingual_mh";
    case SamplingStrategy::kLowResource: return "low_resource";
    case SamplingStrategy::kExcludeLanguage: return "exclude_language";
    case SamplingStrategy::kPair: return "pair";
  }
  return "?";
}

SamplingPlan plan_monolingual(const CorpusManifest& manifest, const std::string& language,
                              double hours, uint64_t seed) {
  auto avail = hours_by_language(manifest);
  auto it = avail.find(language);
  if (it == avail.end())
    throw UserError("plan_monolingual: language '" + language + "' not in manifest");
  if (hours > it->second + kTolH)
    throw UserError(strfmt("plan_monolingual: %s has %.6f h, requested %.6f h", language.c_str(),
                           it->second, hours));
  SamplingPlan p;
  p.strategy = SamplingStrategy::kMonolingual;
  p.target_hours = hours;
  p.per_language_hours[language] = hours;
  p.seed = seed;
  return p;
}

SamplingPlan plan_multilingual_all(const CorpusManifest& manifest, uint64_t seed) {
  SamplingPlan p;
  p.strategy = SamplingStrategy::kMultilingualAll;
  p.per_language_hours = hours_by_language(manifest);
  p.target_hours = sum_hours(p.per_language_hours);
  p.seed = seed;
  return p;
}

SamplingPlan plan_multilingual_re(const CorpusManifest& manifest, double total_hours,
                                  uint64_t seed) {
  if (!(total_hours > 0.0)) throw UserError("plan_multilingual_re: total_hours must be > 0");
  auto avail = hours_by_language(manifest);
  double non_en = 0.0;
  for (const auto& [lang, h] : avail)
    if (lang != "en") non_en += h;
  if (non_en > total_hours + kTolH)
    throw UserError(strfmt(
        "plan_multilingual_re: non-English data (%.6f h) exceeds the total budget (%.6f h)",
        non_en, total_hours));
  SamplingPlan p;
  p.strategy = SamplingStrategy::kMultilingualRe;
  p.target_hours = total_hours;
  p.seed = seed;
  for (const auto& [lang, h] : avail)
    if (lang != "en") p.per_language_hours[lang] = h;
  double en_fill = total_hours - non_en;
  if (avail.count("en")) {
    if (en_fill > avail.at("en") + kTolH)
      throw UserError(strfmt("plan_multilingual_re: English fill needs %.6f h, only %.6f h available",
                             en_fill, avail.at("en")));
    p.per_language_hours["en"] = en_fill;
  } else if (en_fill > kTolH) {
    throw UserError("plan_multilingual_re: no English data to fill the remaining budget");
  }
  return p;
}

SamplingPlan plan_multilingual_mh(const std::vector<std::string>& languages, double total_hours,
                                  uint64_t seed) {
  if (languages.empty()) throw UserError("plan_multilingual_mh: empty language list");
  if (!(total_hours > 0.0)) throw UserError("plan_multilingual_mh: total_hours must be > 0");
  SamplingPlan p;
  p.strategy = SamplingStrategy::kMultilingualMh;
  p.target_hours = total_hours;
  p.seed = seed;
  double share = total_hours / double(languages.size());
  for (const auto& lang : languages) p.per_language_hours[lang] = share;
  return p;
}

SamplingPlan plan_low_resource(const std::map<std::string, double>& lang_hours, uint64_t seed) {
  SamplingPlan p;
  p.strategy = SamplingStrategy::kLowResource;
  p.per_language_hours = lang_hours;
  p.target_hours = sum_hours(lang_hours);
  p.seed = seed;
  return p;
}

SamplingPlan plan_exclude_language(const CorpusManifest& manifest, const std::string& excluded,
                                   double total_hours, uint64_t seed) {
  auto avail = hours_by_language(manifest);
  if (excluded == "en") {
    double others = 0.0;
    for (const auto& [lang, h] : avail)
      if (lang != "en") others += h;
    if (std::fabs(others - total_hours) > kTolH)
      throw UserError(strfmt(
          "plan_exclude_language: excluding 'en' leaves %.6f h with no fill language for a "
          "%.6f h budget",
          others, total_hours));
  }
  CorpusManifest filtered;
  filtered.name = manifest.name;
  for (const auto& r : manifest.records)
    if (r.lang != excluded) filtered.records.push_back(r);
  SamplingPlan p = plan_multilingual_re(filtered, total_hours, seed);
  p.strategy = SamplingStrategy::kExcludeLanguage;
  if (avail.count(excluded)) p.excluded = excluded;
  return p;
}

SamplingPlan plan_pair(const CorpusManifest& manifest, const std::string& base_language,
                       const std::string& added_language, double added_hours, uint64_t seed) {
  auto avail = hours_by_language(manifest);
  if (!avail.count(base_language))
    throw UserError("plan_pair: base language '" + base_language + "' not in manifest");
  if (!avail.count(added_language))
    throw UserError("plan_pair: added language '" + added_language + "' not in manifest");
  if (added_hours > avail.at(added_language) + kTolH)
    throw UserError(strfmt("plan_pair: %s has %.6f h, requested %.6f h", added_language.c_str(),
                           avail.at(added_language), added_hours));
  SamplingPlan p;
  p.strategy = SamplingStrategy::kPair;
  p.per_language_hours[base_language] = avail.at(base_language);
  p.per_language_hours[added_language] = added_hours;
  p.target_hours = sum_hours(p.per_language_hours);
  p.seed = seed;
  return p;
}

CorpusManifest materialize_plan(const CorpusManifest& manifest, const SamplingPlan& plan) {
  CorpusManifest out;
  out.name = manifest.name + "/" + to_string(plan.strategy);
  for (const auto& [lang, hours] : plan.per_language_hours) {
    if (hours <= kTolH) continue;
    CorpusManifest part = sample_hours(manifest, lang, hours, language_seed(plan.seed, lang));
    for (auto& r : part.records) out.records.push_back(std::move(r));
  }
  if (plan.excluded) {
    for (const auto& r : out.records)
      if (r.lang == *plan.excluded)
        throw std::logic_error("materialize_plan: excluded language leaked into the sample");
  }
  return out;
}

}  // namespace mavis::corpus
