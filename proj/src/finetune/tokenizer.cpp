// Copyright 2026 The Mavis Authors
// SPDX-License-Identifier: Apache-2.0

#include "mavis/finetune/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

namespace mavis::finetune {

namespace {

// Splits a UTF-8 string into code-point substrings (invalid bytes pass
// through as single-byte units).
std::vector<std::string> utf8_split(const std::string& s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    size_t len = 1;
    if ((c & 0x80) == 0x00) len = 1;
    else if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    if (i + len > s.size()) len = 1;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

constexpr const char* kUnkGlyph = "\xEF\xBF\xBD";  // U+FFFD

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else out += c;
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      out += (s[i] == 'n') ? '\n' : s[i];
    } else {
      out += s[i];
    }
  }
  return out;
}

}  // namespace

TokenizerKind Tokenizer::default_kind_for(const std::string& language) {
  return language == "zh" ? TokenizerKind::kCharacter : TokenizerKind::kSubword;
}

void Tokenizer::finish_init() {
  max_unit_len_ = 1;
  unit_set_ = std::unordered_set<std::string>(units_.begin(), units_.end());
  for (const auto& u : units_)
    max_unit_len_ = std::max<int64_t>(max_unit_len_, static_cast<int64_t>(u.size()));
}

Tokenizer Tokenizer::train(const std::vector<std::string>& transcripts,
                           const std::string& language, TokenizerKind kind, int64_t vocab_size) {
  if (transcripts.empty()) throw UserError("Tokenizer::train: empty transcript corpus");
  Tokenizer tok;
  tok.kind_ = kind;
  tok.language_ = language;

  std::set<std::string> chars;
  for (const auto& text : transcripts)
    for (auto& cp : utf8_split(text)) chars.insert(cp);

  if (kind == TokenizerKind::kCharacter) {
    tok.units_.assign(chars.begin(), chars.end());
    tok.finish_init();
    return tok;
  }

  // Subword: byte-pair merges over code-point sequences. Unit ids index a
  // growing string table; every seen code point stays in the inventory so
  // decoding remains exact.
  std::vector<std::string> table(chars.begin(), chars.end());
  std::map<std::string, int32_t> table_index;
  for (size_t i = 0; i < table.size(); ++i) table_index[table[i]] = static_cast<int32_t>(i);
  std::vector<std::vector<int32_t>> seqs;
  seqs.reserve(transcripts.size());
  for (const auto& text : transcripts) {
    std::vector<int32_t> seq;
    for (auto& cp : utf8_split(text)) seq.push_back(table_index[cp]);
    seqs.push_back(std::move(seq));
  }

  while (static_cast<int64_t>(table.size()) < vocab_size) {
    std::map<std::pair<int32_t, int32_t>, int64_t> pair_count;
    for (const auto& seq : seqs)
      for (size_t i = 0; i + 1 < seq.size(); ++i)
        pair_count[{seq[i], seq[i + 1]}] += 1;
    // best pair: highest count, ties by lexicographically smallest merge
    int64_t best_count = 1;
    std::pair<int32_t, int32_t> best{-1, -1};
    std::string best_str;
    for (const auto& [pr, cnt] : pair_count) {
      if (cnt < 2) continue;
      std::string merged = table[static_cast<size_t>(pr.first)] +
                           table[static_cast<size_t>(pr.second)];
      if (cnt > best_count || (cnt == best_count && (best.first < 0 || merged < best_str))) {
        best_count = cnt;
        best = pr;
        best_str = merged;
      }
    }
    if (best.first < 0) break;  // nothing repeats: inventory saturated
    auto new_id = static_cast<int32_t>(table.size());
    table.push_back(best_str);
    for (auto& seq : seqs) {
      std::vector<int32_t> out;
      out.reserve(seq.size());
      for (size_t i = 0; i < seq.size(); ++i) {
        if (i + 1 < seq.size() && seq[i] == best.first && seq[i + 1] == best.second) {
          out.push_back(new_id);
          ++i;
        } else {
          out.push_back(seq[i]);
        }
      }
      seq = std::move(out);
    }
  }

  std::sort(table.begin(), table.end());
  tok.units_ = std::move(table);
  tok.finish_init();
  return tok;
}

std::vector<int64_t> Tokenizer::encode(const std::string& text) const {
  std::vector<int64_t> out;
  size_t i = 0;
  while (i < text.size()) {
    size_t best_len = 0;
    for (size_t len = std::min<size_t>(static_cast<size_t>(max_unit_len_), text.size() - i);
         len >= 1; --len) {
      if (unit_set_.count(text.substr(i, len))) {
        best_len = len;
        break;
      }
    }
    if (best_len == 0) {
      // unknown code point: consume one code point as <unk>
      out.push_back(unk_id());
      i += utf8_split(text.substr(i, 4)).front().size();
      continue;
    }
    std::string unit = text.substr(i, best_len);
    auto it = std::lower_bound(units_.begin(), units_.end(), unit);
    out.push_back(static_cast<int64_t>(it - units_.begin()));
    i += best_len;
  }
  return out;
}

std::string Tokenizer::decode(const std::vector<int64_t>& ids) const {
  std::string out;
  for (int64_t id : ids) {
    if (id >= 0 && id < unit_count()) out += units_[static_cast<size_t>(id)];
    else if (id == unk_id()) out += kUnkGlyph;
    // sos/eos decode to nothing
  }
  return out;
}

void Tokenizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write tokenizer: " + path.string());
  out << "MVST1\n";
  out << "kind " << (kind_ == TokenizerKind::kCharacter ? "character" : "subword") << "\n";
  out << "language " << language_ << "\n";
  out << "specials unk=" << unk_id() << " sos=" << sos_id() << " eos=" << eos_id()
      << " ctc_blank=" << ctc_blank() << "\n";
  out << "units " << units_.size() << "\n";
  for (const auto& u : units_) out << escape(u) << "\n";
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open tokenizer: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "MVST1") throw UserError("bad tokenizer magic in " + path.string());
  Tokenizer tok;
  std::getline(in, line);
  if (line == "kind character") tok.kind_ = TokenizerKind::kCharacter;
  else if (line == "kind subword") tok.kind_ = TokenizerKind::kSubword;
  else throw UserError("bad tokenizer kind line: " + line);
  std::getline(in, line);
  if (line.rfind("language ", 0) != 0) throw UserError("bad tokenizer language line");
  tok.language_ = line.substr(9);
  std::getline(in, line);  // specials line (derived, informational)
  std::getline(in, line);
  if (line.rfind("units ", 0) != 0) throw UserError("bad tokenizer units line");
  size_t n = std::stoull(line.substr(6));
  tok.units_.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw UserError("truncated tokenizer file");
    tok.units_.push_back(unescape(line));
  }
  tok.finish_init();
  return tok;
}

}  // namespace mavis::finetune
