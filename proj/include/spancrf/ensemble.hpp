// Position-stacking ensemble over cross-validation predictions: binarize
// each fold's spans to a character mask, sum the masks, keep positions
// reaching the threshold, then rebuild typed spans from the kept runs with a
// per-fold majority vote on the event type.
#pragma once

#include <algorithm>
#include <vector>

#include "spancrf/errors.hpp"
#include "spancrf/types.hpp"

namespace spancrf {

inline std::vector<std::uint8_t> binarize_positions(const std::vector<Span>& spans,
                                                    int text_len) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(text_len), 0);
  for (const Span& span : spans) {
    if (span.start < 0 || span.end > text_len) {
      throw DataError("span out of bounds while binarizing positions");
    }
    for (int p = span.start; p < span.end; ++p) {
      mask[static_cast<std::size_t>(p)] = 1;
    }
  }
  return mask;
}

inline std::vector<std::uint8_t> stack_and_threshold(
    const std::vector<std::vector<std::uint8_t>>& masks, int n_threshold) {
  if (masks.empty()) throw DataError("no fold masks to stack");
  if (n_threshold < 1 || n_threshold > static_cast<int>(masks.size())) {
    throw DataError("threshold must be between 1 and the number of folds");
  }
  const std::size_t len = masks.front().size();
  for (const auto& mask : masks) {
    if (mask.size() != len) throw DataError("fold masks have mismatched lengths");
  }
  std::vector<std::uint8_t> kept(len, 0);
  for (std::size_t p = 0; p < len; ++p) {
    int count = 0;
    for (const auto& mask : masks) count += mask[p];
    kept[p] = count >= n_threshold ? 1 : 0;
  }
  return kept;
}

// Maximal kept runs become candidate spans. Each fold votes once per
// candidate with the type of its largest-overlap span; ties between types
// fall back to canonical event-type order. Candidates no fold overlaps are
// dropped.
inline std::vector<Span> reconstruct_spans(
    const std::vector<std::uint8_t>& kept,
    const std::vector<std::vector<Span>>& fold_spans) {
  std::vector<Span> result;
  const int len = static_cast<int>(kept.size());
  int run_start = -1;
  for (int p = 0; p <= len; ++p) {
    const bool on = p < len && kept[static_cast<std::size_t>(p)] != 0;
    if (on && run_start < 0) run_start = p;
    if (!on && run_start >= 0) {
      const int run_end = p;
      std::vector<int> votes(kNumEventTypes, 0);
      int total_votes = 0;
      for (const auto& spans : fold_spans) {
        int best_overlap = 0;
        const Span* best_span = nullptr;
        for (const Span& span : spans) {
          const int overlap = std::min(span.end, run_end) - std::max(span.start, run_start);
          if (overlap > best_overlap) {
            best_overlap = overlap;
            best_span = &span;
          }
        }
        if (best_span != nullptr) {
          ++votes[static_cast<std::size_t>(best_span->event_type)];
          ++total_votes;
        }
      }
      if (total_votes > 0) {
        int winner = 0;
        for (int t = 1; t < kNumEventTypes; ++t) {
          if (votes[static_cast<std::size_t>(t)] > votes[static_cast<std::size_t>(winner)]) {
            winner = t;
          }
        }
        result.push_back(Span{static_cast<EventType>(winner), run_start, run_end});
      }
      run_start = -1;
    }
  }
  return result;
}

// Full per-record pipeline over one record's fold predictions.
inline std::vector<Span> ensemble_record(const std::vector<std::vector<Span>>& fold_spans,
                                         int text_len, int n_threshold) {
  std::vector<std::vector<std::uint8_t>> masks;
  masks.reserve(fold_spans.size());
  for (const auto& spans : fold_spans) {
    masks.push_back(binarize_positions(spans, text_len));
  }
  return reconstruct_spans(stack_and_threshold(masks, n_threshold), fold_spans);
}

}  // namespace spancrf
