// Templated synthetic dataset: subject-conditioned cause phrases covering
// the five event types, with small prefix/suffix variation so span
// boundaries are non-trivial but learnable at desk scale.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "spancrf/rng.hpp"
#include "spancrf/types.hpp"
#include "spancrf/utf8.hpp"

namespace testsupport {

using namespace spancrf;

inline std::string fill_subject(const std::string& pattern, const std::string& subject) {
  const std::size_t pos = pattern.find("{}");
  return pattern.substr(0, pos) + subject + pattern.substr(pos + 2);
}

inline std::vector<Record> make_synthetic_records(int count, std::uint64_t seed) {
  static const std::array<std::string, 10> subjects = {
      "Lumio", "Fizzup", "Nexa",  "Brewly", "Glowie",
      "Zenty", "Krispa", "Velora", "Tando",  "Mirel",
  };
  static const std::array<std::vector<std::string>, kNumEventTypes> phrases = {{
      // consumer_attention
      {"saw the {} ad again", "keep seeing {} everywhere", "noticed {} on my feed"},
      // consumer_interest
      {"love reading {} reviews", "curious about the new {}", "keep checking {} posts"},
      // consumer_needs
      {"really need {} for work", "could use {} for travel", "need {} for dry skin"},
      // consumer_purchase
      {"bought {} yesterday", "ordered {} online", "just paid for {} twice"},
      // consumer_use
      {"use {} every morning", "been using {} all week", "apply {} before bed"},
  }};
  static const std::array<std::string, 4> prefixes = {"", "fyi ", "btw ", "ok so "};
  static const std::array<std::string, 3> puncts = {".", "!", "?"};

  Rng rng(seed);
  std::vector<Record> records;
  records.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::string& subject =
        subjects[static_cast<std::size_t>(uniform_below(rng, subjects.size()))];
    const int type_index = static_cast<int>(uniform_below(rng, kNumEventTypes));
    const auto& pool = phrases[static_cast<std::size_t>(type_index)];
    const std::string phrase = fill_subject(
        pool[static_cast<std::size_t>(uniform_below(rng, pool.size()))], subject);
    const std::string& prefix =
        prefixes[static_cast<std::size_t>(uniform_below(rng, prefixes.size()))];
    const std::string& punct =
        puncts[static_cast<std::size_t>(uniform_below(rng, puncts.size()))];

    Record record;
    record.id = std::to_string(10000 + i);
    record.subject = subject;
    record.text = prefix + phrase + punct;
    const int start = static_cast<int>(utf8_length(prefix));
    const int end = start + static_cast<int>(utf8_length(phrase));
    record.gold_spans.push_back(
        Span{static_cast<EventType>(type_index), start, end});
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace testsupport
