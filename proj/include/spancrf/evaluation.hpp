// Span-level precision / recall / F1 with micro-aggregation over global
// counts. A predicted span is correct only on an exact (event_type, start,
// end) match against a not-yet-matched gold span; boundary-only matching
// ignores the event type.
#pragma once

#include <vector>

#include "spancrf/errors.hpp"
#include "spancrf/types.hpp"

namespace spancrf {

struct MatchCounts {
  int correct = 0;
  int predicted = 0;
  int gold = 0;

  MatchCounts& operator+=(const MatchCounts& other) {
    correct += other.correct;
    predicted += other.predicted;
    gold += other.gold;
    return *this;
  }
};

inline int match_spans(const std::vector<Span>& pred, const std::vector<Span>& gold,
                       bool boundary_only = false) {
  std::vector<bool> used(gold.size(), false);
  int correct = 0;
  for (const Span& p : pred) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (used[g]) continue;
      const bool match = boundary_only
                             ? (p.start == gold[g].start && p.end == gold[g].end)
                             : (p == gold[g]);
      if (match) {
        used[g] = true;
        ++correct;
        break;
      }
    }
  }
  return correct;
}

inline MatchCounts count_matches(const std::vector<Span>& pred,
                                 const std::vector<Span>& gold,
                                 bool boundary_only = false) {
  MatchCounts counts;
  counts.correct = match_spans(pred, gold, boundary_only);
  counts.predicted = static_cast<int>(pred.size());
  counts.gold = static_cast<int>(gold.size());
  return counts;
}

struct Metrics {
  int correct = 0;
  int predicted = 0;
  int gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Zero-denominator conventions: an empty side scores 0 against a non-empty
// one; two empty sides count as vacuously perfect.
inline Metrics compute_metrics(int correct, int predicted, int gold) {
  if (correct < 0 || predicted < 0 || gold < 0) {
    throw DataError("negative metric counts");
  }
  if (correct > predicted || correct > gold) {
    throw DataError("correct count exceeds predicted or gold count");
  }
  Metrics m;
  m.correct = correct;
  m.predicted = predicted;
  m.gold = gold;
  if (predicted == 0 && gold == 0) {
    m.precision = m.recall = m.f1 = 1.0;
    return m;
  }
  m.precision = predicted > 0 ? static_cast<double>(correct) / predicted : 0.0;
  m.recall = gold > 0 ? static_cast<double>(correct) / gold : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

inline Metrics compute_metrics(const MatchCounts& counts) {
  return compute_metrics(counts.correct, counts.predicted, counts.gold);
}

}  // namespace spancrf
