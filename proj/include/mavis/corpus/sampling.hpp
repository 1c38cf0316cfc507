// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hour-budget sampling plans over a corpus manifest: monolingual pools,
// all-languages pools, reduced-English pools (all non-English data topped up
// with English to a fixed total), matched-hours pools (equal shares per
// language), leave-one-language-out pools, and base+added language pairs.

#ifndef MAVIS_CORPUS_SAMPLING_HPP
#define MAVIS_CORPUS_SAMPLING_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mavis/corpus/manifest.hpp"

namespace mavis::corpus {

enum class SamplingStrategy {
  kMonolingual,
  kMultilingualAll,
  kMultilingualRe,
  kMultilingualMh,
  kLowResource,
  kExcludeLanguage,
  kPair,
};

std::string to_string(SamplingStrategy s);

struct SamplingPlan {
  SamplingStrategy strategy = SamplingStrategy::kMultilingualAll;
  double target_hours = 0.0;
  std::map<std::string, double> per_language_hours;
  std::optional<std::string> excluded;
  uint64_t seed = 0;
};

// All hours of a single language (target_hours <= available).
SamplingPlan plan_monolingual(const CorpusManifest& manifest, const std::string& language,
                              double hours, uint64_t seed);

// Every record of every language.
SamplingPlan plan_multilingual_all(const CorpusManifest& manifest, uint64_t seed);

// All non-English data, then English samples fill the remainder up to
// total_hours. Errors when non-English data alone exceeds the total.
SamplingPlan plan_multilingual_re(const CorpusManifest& manifest, double total_hours,
                                  uint64_t seed);

// Equal per-language shares: total_hours / |languages| each.
SamplingPlan plan_multilingual_mh(const std::vector<std::string>& languages, double total_hours,
                                  uint64_t seed = 0);

// Explicit per-language hour map (low-resource style pools).
SamplingPlan plan_low_resource(const std::map<std::string, double>& lang_hours, uint64_t seed);

// Zero hours of `excluded`; all other non-English data; English fills to
// total_hours. Excluding a language absent from the manifest degenerates to
// plan_multilingual_re.
SamplingPlan plan_exclude_language(const CorpusManifest& manifest, const std::string& excluded,
                                   double total_hours, uint64_t seed);

// Base language hours plus a sampled slice of one added language.
SamplingPlan plan_pair(const CorpusManifest& manifest, const std::string& base_language,
                       const std::string& added_language, double added_hours, uint64_t seed);

// Draws the plan's per-language budgets from the manifest (greedy random
// accumulation per language, deterministic in plan.seed). Record order is
// language-sorted then sample order.
CorpusManifest materialize_plan(const CorpusManifest& manifest, const SamplingPlan& plan);

}  // namespace mavis::corpus

#endif  // MAVIS_CORPUS_SAMPLING_HPP
