// BIO label alphabet over event types and the span <-> label-sequence
// conversions. Label 0 is O; each event type t contributes B_t and I_t in
// canonical order, so the alphabet has 2 * |types| + 1 entries.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "spancrf/errors.hpp"
#include "spancrf/types.hpp"

namespace spancrf {

using LabelSequence = std::vector<int>;

class Tagset {
 public:
  Tagset() = default;
  explicit Tagset(std::vector<EventType> event_types)
      : event_types_(std::move(event_types)) {}

  int size() const { return 2 * static_cast<int>(event_types_.size()) + 1; }
  const std::vector<EventType>& event_types() const { return event_types_; }

  static constexpr int kOutside = 0;

  int b_label(int type_index) const { return 1 + 2 * type_index; }
  int i_label(int type_index) const { return 2 + 2 * type_index; }

  bool is_b(int label) const { return label > 0 && label % 2 == 1; }
  bool is_i(int label) const { return label > 0 && label % 2 == 0; }

  // Event type index for a B/I label; -1 for O.
  int type_index(int label) const { return label == 0 ? -1 : (label - 1) / 2; }

  EventType event_type(int label) const {
    return event_types_[static_cast<std::size_t>(type_index(label))];
  }

  std::string label_name(int label) const {
    if (label == kOutside) return "O";
    const std::string& type = event_type_name(event_type(label));
    return (is_b(label) ? "B_" : "I_") + type;
  }

 private:
  std::vector<EventType> event_types_;
};

inline Tagset build_tagset(const std::vector<EventType>& event_types) {
  if (event_types.empty()) throw DataError("tagset needs at least one event type");
  for (std::size_t i = 0; i < event_types.size(); ++i) {
    for (std::size_t j = i + 1; j < event_types.size(); ++j) {
      if (event_types[i] == event_types[j]) {
        throw DataError("duplicate event type in tagset: " +
                        event_type_name(event_types[i]));
      }
    }
  }
  return Tagset(event_types);
}

inline Tagset default_tagset() {
  return build_tagset({kAllEventTypes.begin(), kAllEventTypes.end()});
}

// BIO legality of label bigrams: I_t may only follow B_t or I_t of the same
// type. Everything else is allowed.
inline bool allowed_transition(int from, int to, const Tagset& tagset) {
  if (!tagset.is_i(to)) return true;
  return (tagset.is_b(from) || tagset.is_i(from)) &&
         tagset.type_index(from) == tagset.type_index(to);
}

// Legality at position 0: a sequence cannot open with a continuation label.
inline bool allowed_start(int label, const Tagset& tagset) {
  return !tagset.is_i(label);
}

inline LabelSequence encode_spans(int text_len, const std::vector<Span>& spans,
                                  const Tagset& tagset) {
  LabelSequence labels(static_cast<std::size_t>(text_len), Tagset::kOutside);
  std::vector<Span> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  int prev_end = 0;
  for (const Span& span : sorted) {
    if (span.start < 0 || span.start >= span.end || span.end > text_len) {
      throw DataError("span out of bounds: [" + std::to_string(span.start) +
                      ", " + std::to_string(span.end) + ") in text of length " +
                      std::to_string(text_len));
    }
    if (span.start < prev_end) {
      throw DataError("overlapping spans at position " + std::to_string(span.start));
    }
    prev_end = span.end;
    const int type = static_cast<int>(span.event_type);
    labels[static_cast<std::size_t>(span.start)] = tagset.b_label(type);
    for (int p = span.start + 1; p < span.end; ++p) {
      labels[static_cast<std::size_t>(p)] = tagset.i_label(type);
    }
  }
  return labels;
}

// Total decoding: maximal B_t (I_t)* runs become spans. A dangling I_t (one
// not continuing a same-type span) is repaired to B_t, so every label
// sequence decodes to a valid non-overlapping span set.
inline std::vector<Span> decode_labels(const LabelSequence& labels,
                                       const Tagset& tagset) {
  std::vector<Span> spans;
  int open_type = -1;
  int open_start = -1;
  const int n = static_cast<int>(labels.size());
  auto close = [&](int end) {
    if (open_type >= 0) {
      spans.push_back(Span{tagset.event_types()[static_cast<std::size_t>(open_type)],
                           open_start, end});
      open_type = -1;
    }
  };
  for (int p = 0; p < n; ++p) {
    const int label = labels[static_cast<std::size_t>(p)];
    if (label == Tagset::kOutside) {
      close(p);
    } else if (tagset.is_b(label)) {
      close(p);
      open_type = tagset.type_index(label);
      open_start = p;
    } else {  // I_t: continue a same-type run, otherwise repair to B_t
      if (open_type != tagset.type_index(label)) {
        close(p);
        open_type = tagset.type_index(label);
        open_start = p;
      }
    }
  }
  close(n);
  return spans;
}

}  // namespace spancrf
