// Core domain types: the five consumer event types, character spans and
// dataset records.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "spancrf/errors.hpp"

namespace spancrf {

// Canonical ordering is fixed; label layout, ensemble tie-breaks and file
// formats all depend on it.
enum class EventType : int {
  kConsumerAttention = 0,
  kConsumerInterest = 1,
  kConsumerNeeds = 2,
  kConsumerPurchase = 3,
  kConsumerUse = 4,
};

inline constexpr int kNumEventTypes = 5;

inline constexpr std::array<EventType, kNumEventTypes> kAllEventTypes = {
    EventType::kConsumerAttention, EventType::kConsumerInterest,
    EventType::kConsumerNeeds, EventType::kConsumerPurchase,
    EventType::kConsumerUse,
};

inline const std::string& event_type_name(EventType t) {
  static const std::array<std::string, kNumEventTypes> names = {
      "consumer_attention", "consumer_interest", "consumer_needs",
      "consumer_purchase", "consumer_use",
  };
  return names[static_cast<int>(t)];
}

inline EventType parse_event_type(const std::string& name) {
  for (EventType t : kAllEventTypes) {
    if (event_type_name(t) == name) return t;
  }
  throw DataError("unknown event type: " + name);
}

// Half-open character interval [start, end) into a record's text, in Unicode
// scalar offsets.
struct Span {
  EventType event_type;
  int start = 0;
  int end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span& a, const Span& b) {
    if (auto c = a.start <=> b.start; c != 0) return c;
    if (auto c = a.end <=> b.end; c != 0) return c;
    return static_cast<int>(a.event_type) <=> static_cast<int>(b.event_type);
  }
};

struct Record {
  std::string id;
  std::string subject;
  std::string text;
  std::vector<Span> gold_spans;
};

}  // namespace spancrf
