// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Label tokenization: a character inventory for Mandarin, byte-pair-merged
// subword units (default inventory 1000) for other languages. Unit ids are
// 0..U-1; specials follow (unk=U, sos=U+1, eos=U+2). The CTC class space is
// units+unk plus a trailing blank, so blank is always indexed last.

#ifndef MAVIS_FINETUNE_TOKENIZER_HPP
#define MAVIS_FINETUNE_TOKENIZER_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "mavis/common.hpp"

namespace mavis::finetune {

enum class TokenizerKind { kCharacter, kSubword };

class Tokenizer {
 public:
  // Mandarin uses characters; everything else subword units.
  static TokenizerKind default_kind_for(const std::string& language);

  // Learns the inventory from training transcripts. Character kind: sorted
  // unique code points. Subword kind: all seen code points plus greedy
  // highest-frequency pair merges until the inventory reaches vocab_size or
  // no pair repeats; encoding is greedy longest match, so encode-decode is
  // the identity on any text covered by the seen code points.
  static Tokenizer train(const std::vector<std::string>& transcripts,
                         const std::string& language, TokenizerKind kind,
                         int64_t vocab_size = 1000);

  std::vector<int64_t> encode(const std::string& text) const;
  std::string decode(const std::vector<int64_t>& ids) const;

  int64_t unit_count() const { return static_cast<int64_t>(units_.size()); }
  int64_t unk_id() const { return unit_count(); }
  int64_t sos_id() const { return unit_count() + 1; }
  int64_t eos_id() const { return unit_count() + 2; }
  // Decoder distribution covers units + unk + sos + eos.
  int64_t decoder_vocab() const { return unit_count() + 3; }
  // CTC classes: units + unk + blank (blank last).
  int64_t ctc_classes() const { return unit_count() + 2; }
  int64_t ctc_blank() const { return unit_count() + 1; }

  const std::vector<std::string>& units() const { return units_; }
  const std::string& language() const { return language_; }
  TokenizerKind kind() const { return kind_; }

  void save(const std::filesystem::path& path) const;
  static Tokenizer load(const std::filesystem::path& path);

 private:
  TokenizerKind kind_ = TokenizerKind::kCharacter;
  std::string language_;
  std::vector<std::string> units_;
  std::unordered_set<std::string> unit_set_;
  int64_t max_unit_len_ = 1;  // bytes, for greedy matching
  void finish_init();
};

}  // namespace mavis::finetune

#endif  // MAVIS_FINETUNE_TOKENIZER_HPP
