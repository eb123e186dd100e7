// Character vocabulary. Tokens are Unicode scalar values plus the reserved
// CLS/SEP/PAD/UNK markers; ids are stable across builds because characters
// are sorted by code point.
#pragma once

#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "spancrf/types.hpp"
#include "spancrf/utf8.hpp"

namespace spancrf {

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kNumReserved = 4;

  Vocab() = default;

  // chars must be sorted by code point and duplicate free.
  explicit Vocab(std::vector<char32_t> chars) : chars_(std::move(chars)) {
    for (std::size_t i = 0; i < chars_.size(); ++i) {
      ids_.emplace(chars_[i], kNumReserved + static_cast<int>(i));
    }
  }

  int size() const { return kNumReserved + static_cast<int>(chars_.size()); }
  const std::vector<char32_t>& chars() const { return chars_; }

  int id_of(char32_t c) const {
    auto it = ids_.find(c);
    return it == ids_.end() ? kUnk : it->second;
  }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, int> ids_;
};

inline Vocab build_vocab(const std::vector<Record>& records) {
  std::set<char32_t> seen;
  for (const Record& record : records) {
    for (char32_t c : utf8_decode(record.subject)) seen.insert(c);
    for (char32_t c : utf8_decode(record.text)) seen.insert(c);
  }
  return Vocab(std::vector<char32_t>(seen.begin(), seen.end()));
}

}  // namespace spancrf
