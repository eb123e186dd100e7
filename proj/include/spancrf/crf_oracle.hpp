// Exhaustive-enumeration reference for the CRF: exact argmax, partition and
// pairwise marginals over all L^n label sequences. Used for differential
// testing; it deliberately recomputes path scores with its own direct loops
// instead of reusing the dynamic programs it is meant to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spancrf/crf.hpp"
#include "spancrf/linalg.hpp"

namespace spancrf {

struct OracleResult {
  LabelSequence best;
  double best_score = kNegInf;
  double log_partition = kNegInf;
  Vector position0_marginals;         // L
  std::vector<Matrix> pair_marginals;  // index i >= 1: P(y_{i-1}, y_i), L x L
};

namespace detail {

inline double oracle_path_score(const LabelSequence& y, const Emissions& z,
                                const CrfParams& params, const TransitionMask& mask) {
  const int L = params.num_labels;
  if (!mask.start(y[0])) return kNegInf;
  double score;
  if (params.mode == CrfMode::kLiteral) {
    score = params.start_bias[y[0]];
    for (int j = 0; j < params.feat_dim; ++j) {
      score += params.start_weights(y[0], j) * z.features(0, j);
    }
  } else {
    score = params.start_scores[y[0]] + z.label_scores(0, y[0]);
  }
  for (std::size_t i = 1; i < y.size(); ++i) {
    const int prev = y[i - 1];
    const int cur = y[i];
    if (!mask.transition(prev, cur)) return kNegInf;
    if (params.mode == CrfMode::kLiteral) {
      score += params.pair_bias(prev, cur);
      for (int j = 0; j < params.feat_dim; ++j) {
        score += params.pair_weights(prev * L + cur, j) *
                 z.features(static_cast<Eigen::Index>(i), j);
      }
    } else {
      score += params.transitions(prev, cur) +
               z.label_scores(static_cast<Eigen::Index>(i), cur);
    }
  }
  return score;
}

// Prefers the lower label at the latest differing position, matching the
// Viterbi backtracking tie-break.
inline bool oracle_tie_prefers(const LabelSequence& candidate, const LabelSequence& best) {
  for (std::size_t i = candidate.size(); i-- > 0;) {
    if (candidate[i] != best[i]) return candidate[i] < best[i];
  }
  return false;
}

}  // namespace detail

inline OracleResult brute_force_oracle(const Emissions& z, const CrfParams& params,
                                       const TransitionMask& mask) {
  const Eigen::Index n = z.length();
  const int L = params.num_labels;
  if (n < 1) throw DataError("oracle needs at least one position");
  if (std::pow(static_cast<double>(L), static_cast<double>(n)) > 1e6) {
    throw DataError("oracle instance too large: L^n exceeds 10^6");
  }

  const std::size_t total = static_cast<std::size_t>(
      std::llround(std::pow(static_cast<double>(L), static_cast<double>(n))));
  std::vector<double> scores(total, kNegInf);

  OracleResult result;
  LabelSequence y(static_cast<std::size_t>(n), 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const double score = detail::oracle_path_score(y, z, params, mask);
    scores[idx] = score;
    if (score != kNegInf &&
        (result.best.empty() || score > result.best_score ||
         (score == result.best_score && detail::oracle_tie_prefers(y, result.best)))) {
      result.best_score = score;
      result.best = y;
    }
    // odometer increment, last position fastest
    for (Eigen::Index p = n - 1; p >= 0; --p) {
      auto& v = y[static_cast<std::size_t>(p)];
      if (++v < L) break;
      v = 0;
    }
  }
  if (result.best_score == kNegInf) {
    throw NumericError("no legal label sequence (all paths masked)");
  }

  double max_score = kNegInf;
  for (double s : scores) max_score = std::max(max_score, s);
  double acc = 0.0;
  for (double s : scores) {
    if (s != kNegInf) acc += std::exp(s - max_score);
  }
  result.log_partition = max_score + std::log(acc);

  result.position0_marginals = Vector::Zero(L);
  result.pair_marginals.assign(static_cast<std::size_t>(n), Matrix::Zero(L, L));
  std::fill(y.begin(), y.end(), 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const double s = scores[idx];
    if (s != kNegInf) {
      const double p = std::exp(s - result.log_partition);
      result.position0_marginals[y[0]] += p;
      for (Eigen::Index i = 1; i < n; ++i) {
        result.pair_marginals[static_cast<std::size_t>(i)](
            y[static_cast<std::size_t>(i - 1)], y[static_cast<std::size_t>(i)]) += p;
      }
    }
    for (Eigen::Index p = n - 1; p >= 0; --p) {
      auto& v = y[static_cast<std::size_t>(p)];
      if (++v < L) break;
      v = 0;
    }
  }
  return result;
}

}  // namespace spancrf
