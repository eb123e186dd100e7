// Linear-chain CRF over per-position emission inputs: sequence scoring,
// log-partition via the forward algorithm, gradients via forward-backward
// marginals and constrained Viterbi decoding. Everything runs in log space.
//
// Two parameterizations:
//   literal    - a weight vector and bias per ordered label pair, applied to
//                the raw feature row z_i (plus start weights for position 0).
//   factorized - per-label emission scores computed upstream plus an L x L
//                transition matrix and a start vector.
#pragma once

#include <string>
#include <vector>

#include "spancrf/linalg.hpp"
#include "spancrf/rng.hpp"
#include "spancrf/tagscheme.hpp"

namespace spancrf {

enum class CrfMode { kLiteral, kFactorized };

inline std::string crf_mode_name(CrfMode mode) {
  return mode == CrfMode::kLiteral ? "literal" : "factorized";
}

inline CrfMode parse_crf_mode(const std::string& name) {
  if (name == "literal") return CrfMode::kLiteral;
  if (name == "factorized") return CrfMode::kFactorized;
  throw DataError("unknown crf mode: " + name);
}

// Transition legality. Disallowed entries contribute -inf to path scores.
struct TransitionMask {
  int num_labels = 0;
  std::vector<std::uint8_t> allowed;        // L*L, row-major [from * L + to]
  std::vector<std::uint8_t> start_allowed;  // L

  bool transition(int from, int to) const {
    return allowed[static_cast<std::size_t>(from * num_labels + to)] != 0;
  }
  bool start(int label) const {
    return start_allowed[static_cast<std::size_t>(label)] != 0;
  }

  static TransitionMask none(int num_labels) {
    TransitionMask mask;
    mask.num_labels = num_labels;
    mask.allowed.assign(static_cast<std::size_t>(num_labels * num_labels), 1);
    mask.start_allowed.assign(static_cast<std::size_t>(num_labels), 1);
    return mask;
  }

  static TransitionMask bio(const Tagset& tagset) {
    const int L = tagset.size();
    TransitionMask mask = none(L);
    for (int from = 0; from < L; ++from) {
      for (int to = 0; to < L; ++to) {
        mask.allowed[static_cast<std::size_t>(from * L + to)] =
            allowed_transition(from, to, tagset) ? 1 : 0;
      }
    }
    for (int label = 0; label < L; ++label) {
      mask.start_allowed[static_cast<std::size_t>(label)] =
          allowed_start(label, tagset) ? 1 : 0;
    }
    return mask;
  }
};

// Per-position CRF inputs. Literal mode consumes `features` (n x d_feat);
// factorized mode consumes `label_scores` (n x L). The unused matrix may be
// empty.
struct Emissions {
  Matrix features;
  Matrix label_scores;

  Eigen::Index length() const {
    return features.rows() > 0 ? features.rows() : label_scores.rows();
  }
};

struct CrfParams {
  CrfMode mode = CrfMode::kLiteral;
  int num_labels = 0;
  int feat_dim = 0;

  // literal mode: row (y_prev * L + y) of pair_weights is the weight vector
  // for that label pair; position 0 uses start_weights / start_bias.
  Matrix pair_weights;   // (L*L) x d_feat
  Matrix pair_bias;      // L x L
  Matrix start_weights;  // L x d_feat
  Vector start_bias;     // L

  // factorized mode
  Matrix transitions;   // L x L
  Vector start_scores;  // L

  static CrfParams literal(int num_labels, int feat_dim) {
    CrfParams p;
    p.mode = CrfMode::kLiteral;
    p.num_labels = num_labels;
    p.feat_dim = feat_dim;
    p.pair_weights = Matrix::Zero(num_labels * num_labels, feat_dim);
    p.pair_bias = Matrix::Zero(num_labels, num_labels);
    p.start_weights = Matrix::Zero(num_labels, feat_dim);
    p.start_bias = Vector::Zero(num_labels);
    return p;
  }

  static CrfParams factorized(int num_labels) {
    CrfParams p;
    p.mode = CrfMode::kFactorized;
    p.num_labels = num_labels;
    p.transitions = Matrix::Zero(num_labels, num_labels);
    p.start_scores = Vector::Zero(num_labels);
    return p;
  }

  CrfParams zeros_like() const {
    return mode == CrfMode::kLiteral ? literal(num_labels, feat_dim)
                                     : factorized(num_labels);
  }

  // Weight matrices get a small uniform init, biases and transition scores
  // start at zero.
  void init(Rng& rng) {
    if (mode == CrfMode::kLiteral) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, feat_dim)));
      for (Eigen::Index i = 0; i < pair_weights.rows(); ++i) {
        for (Eigen::Index j = 0; j < pair_weights.cols(); ++j) {
          pair_weights(i, j) = uniform_range(rng, -bound, bound);
        }
      }
      for (Eigen::Index i = 0; i < start_weights.rows(); ++i) {
        for (Eigen::Index j = 0; j < start_weights.cols(); ++j) {
          start_weights(i, j) = uniform_range(rng, -bound, bound);
        }
      }
    }
  }
};

namespace detail {

inline void check_emissions(const Emissions& z, const CrfParams& params) {
  const Eigen::Index n = z.length();
  if (n < 1) throw DataError("crf input must have at least one position");
  if (params.mode == CrfMode::kLiteral) {
    if (z.features.rows() != n || z.features.cols() != params.feat_dim) {
      throw DataError("crf feature matrix shape mismatch");
    }
  } else if (z.label_scores.rows() != n || z.label_scores.cols() != params.num_labels) {
    throw DataError("crf label score matrix shape mismatch");
  }
}

}  // namespace detail

// Position scores with the mask folded in: start[y] is the score of label y
// at position 0; trans[i](y_prev, y) the pairwise score at position i >= 1.
// Masked entries are -inf, so every downstream quantity (partition, Viterbi,
// marginals) respects the constraint with no special cases.
struct Lattice {
  Vector start;
  std::vector<Matrix> trans;  // index 0 unused

  Eigen::Index length() const { return static_cast<Eigen::Index>(trans.size()); }
};

inline Lattice build_lattice(const Emissions& z, const CrfParams& params,
                             const TransitionMask& mask) {
  detail::check_emissions(z, params);
  const Eigen::Index n = z.length();
  const int L = params.num_labels;
  Lattice lattice;
  lattice.trans.resize(static_cast<std::size_t>(n));

  if (params.mode == CrfMode::kLiteral) {
    lattice.start = params.start_weights * z.features.row(0).transpose() + params.start_bias;
    for (Eigen::Index i = 1; i < n; ++i) {
      Vector flat = params.pair_weights * z.features.row(i).transpose();
      Matrix m(L, L);
      for (int from = 0; from < L; ++from) {
        for (int to = 0; to < L; ++to) {
          m(from, to) = flat[from * L + to] + params.pair_bias(from, to);
        }
      }
      lattice.trans[static_cast<std::size_t>(i)] = std::move(m);
    }
  } else {
    lattice.start = z.label_scores.row(0).transpose() + params.start_scores;
    for (Eigen::Index i = 1; i < n; ++i) {
      Matrix m = params.transitions;
      m.rowwise() += z.label_scores.row(i);
      lattice.trans[static_cast<std::size_t>(i)] = std::move(m);
    }
  }

  for (int y = 0; y < L; ++y) {
    if (!mask.start(y)) lattice.start[y] = kNegInf;
  }
  for (Eigen::Index i = 1; i < n; ++i) {
    Matrix& m = lattice.trans[static_cast<std::size_t>(i)];
    for (int from = 0; from < L; ++from) {
      for (int to = 0; to < L; ++to) {
        if (!mask.transition(from, to)) m(from, to) = kNegInf;
      }
    }
  }
  return lattice;
}

// Unnormalized log score of one label sequence, computed directly from the
// parameters. Returns -inf when the sequence uses a masked transition.
inline double sequence_score(const Emissions& z, const LabelSequence& y,
                             const CrfParams& params, const TransitionMask& mask) {
  detail::check_emissions(z, params);
  const Eigen::Index n = z.length();
  if (static_cast<Eigen::Index>(y.size()) != n) {
    throw DataError("label sequence length " + std::to_string(y.size()) +
                    " does not match " + std::to_string(n) + " emission rows");
  }
  for (int label : y) {
    if (label < 0 || label >= params.num_labels) {
      throw DataError("label index " + std::to_string(label) + " out of range");
    }
  }
  if (!mask.start(y[0])) return kNegInf;
  double score = 0.0;
  if (params.mode == CrfMode::kLiteral) {
    score += params.start_weights.row(y[0]).dot(z.features.row(0)) + params.start_bias[y[0]];
  } else {
    score += z.label_scores(0, y[0]) + params.start_scores[y[0]];
  }
  const int L = params.num_labels;
  for (Eigen::Index i = 1; i < n; ++i) {
    const int prev = y[static_cast<std::size_t>(i - 1)];
    const int cur = y[static_cast<std::size_t>(i)];
    if (!mask.transition(prev, cur)) return kNegInf;
    if (params.mode == CrfMode::kLiteral) {
      score += params.pair_weights.row(prev * L + cur).dot(z.features.row(i)) +
               params.pair_bias(prev, cur);
    } else {
      score += z.label_scores(i, cur) + params.transitions(prev, cur);
    }
  }
  return score;
}

namespace detail {

inline Matrix forward_lattice(const Lattice& lattice, int L) {
  const Eigen::Index n = lattice.length();
  Matrix alpha(n, L);
  alpha.row(0) = lattice.start.transpose();
  Vector work(L);
  for (Eigen::Index i = 1; i < n; ++i) {
    const Matrix& m = lattice.trans[static_cast<std::size_t>(i)];
    for (int to = 0; to < L; ++to) {
      work = alpha.row(i - 1).transpose() + m.col(to);
      alpha(i, to) = log_sum_exp(work);
    }
  }
  return alpha;
}

inline Matrix backward_lattice(const Lattice& lattice, int L) {
  const Eigen::Index n = lattice.length();
  Matrix beta = Matrix::Zero(n, L);
  Vector work(L);
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    const Matrix& m = lattice.trans[static_cast<std::size_t>(i + 1)];
    for (int from = 0; from < L; ++from) {
      work = m.row(from).transpose() + beta.row(i + 1).transpose();
      beta(i, from) = log_sum_exp(work);
    }
  }
  return beta;
}

}  // namespace detail

inline double log_partition_lattice(const Lattice& lattice, int L) {
  const Matrix alpha = detail::forward_lattice(lattice, L);
  const double log_z = log_sum_exp(alpha.row(alpha.rows() - 1).transpose());
  if (log_z == kNegInf) throw NumericError("no legal label sequence (all paths masked)");
  if (!std::isfinite(log_z)) throw NumericError("log partition is not finite");
  return log_z;
}

// log sum_y exp(sequence_score(z, y)) over all label sequences.
inline double log_partition(const Emissions& z, const CrfParams& params,
                            const TransitionMask& mask) {
  return log_partition_lattice(build_lattice(z, params, mask), params.num_labels);
}

struct ViterbiResult {
  LabelSequence labels;
  double score = 0.0;
};

// Highest-scoring legal sequence. Ties are broken toward the lower label
// index at the latest differing position: the strictly-greater comparisons
// below keep the lowest-index argmax at every backtracking step.
inline ViterbiResult viterbi_decode(const Emissions& z, const CrfParams& params,
                                    const TransitionMask& mask) {
  const Lattice lattice = build_lattice(z, params, mask);
  const Eigen::Index n = lattice.length();
  const int L = params.num_labels;

  Matrix delta(n, L);
  std::vector<std::vector<int>> backptr(static_cast<std::size_t>(n),
                                        std::vector<int>(static_cast<std::size_t>(L), 0));
  delta.row(0) = lattice.start.transpose();
  for (Eigen::Index i = 1; i < n; ++i) {
    const Matrix& m = lattice.trans[static_cast<std::size_t>(i)];
    for (int to = 0; to < L; ++to) {
      double best = kNegInf;
      int best_from = 0;
      for (int from = 0; from < L; ++from) {
        const double cand = delta(i - 1, from) + m(from, to);
        if (cand > best) {
          best = cand;
          best_from = from;
        }
      }
      delta(i, to) = best;
      backptr[static_cast<std::size_t>(i)][static_cast<std::size_t>(to)] = best_from;
    }
  }

  double best = kNegInf;
  int best_label = 0;
  for (int y = 0; y < L; ++y) {
    if (delta(n - 1, y) > best) {
      best = delta(n - 1, y);
      best_label = y;
    }
  }
  if (best == kNegInf) throw NumericError("no legal label sequence (all paths masked)");

  ViterbiResult result;
  result.score = best;
  result.labels.assign(static_cast<std::size_t>(n), 0);
  result.labels[static_cast<std::size_t>(n - 1)] = best_label;
  for (Eigen::Index i = n - 1; i >= 1; --i) {
    best_label = backptr[static_cast<std::size_t>(i)][static_cast<std::size_t>(best_label)];
    result.labels[static_cast<std::size_t>(i - 1)] = best_label;
  }
  return result;
}

// Gradient of the negative log-likelihood for one sequence, accumulated into
// `grad`. d_input receives dNLL w.r.t. the consumed emission matrix
// (features in literal mode, label_scores in factorized mode). Returns the
// sequence NLL.
inline double crf_nll_backward(const Emissions& z, const LabelSequence& gold,
                               const CrfParams& params, const TransitionMask& mask,
                               CrfParams& grad, Matrix& d_input,
                               const std::string& context = "sequence") {
  const double gold_score = sequence_score(z, gold, params, mask);
  if (gold_score == kNegInf) {
    throw DataError(context + ": gold label sequence is masked");
  }
  const Lattice lattice = build_lattice(z, params, mask);
  const Eigen::Index n = lattice.length();
  const int L = params.num_labels;

  const Matrix alpha = detail::forward_lattice(lattice, L);
  const Matrix beta = detail::backward_lattice(lattice, L);
  const double log_z = log_sum_exp(alpha.row(n - 1).transpose());
  if (!std::isfinite(log_z)) throw NumericError(context + ": log partition is not finite");

  // Position-0 marginals minus the gold indicator.
  Vector d_start(L);
  for (int y = 0; y < L; ++y) {
    const double lp = lattice.start[y] + beta(0, y) - log_z;
    d_start[y] = (lp == kNegInf ? 0.0 : std::exp(lp)) - (gold[0] == y ? 1.0 : 0.0);
  }

  const bool literal = params.mode == CrfMode::kLiteral;
  d_input = literal ? Matrix::Zero(n, params.feat_dim) : Matrix::Zero(n, L);

  if (literal) {
    grad.start_bias += d_start;
    grad.start_weights += d_start * z.features.row(0);
    d_input.row(0) += (params.start_weights.transpose() * d_start).transpose();
  } else {
    grad.start_scores += d_start;
    d_input.row(0) += d_start.transpose();
  }

  Matrix d_trans(L, L);
  Vector flat(L * L);
  for (Eigen::Index i = 1; i < n; ++i) {
    const Matrix& m = lattice.trans[static_cast<std::size_t>(i)];
    for (int from = 0; from < L; ++from) {
      for (int to = 0; to < L; ++to) {
        const double lp = alpha(i - 1, from) + m(from, to) + beta(i, to) - log_z;
        d_trans(from, to) = lp == kNegInf ? 0.0 : std::exp(lp);
      }
    }
    d_trans(gold[static_cast<std::size_t>(i - 1)], gold[static_cast<std::size_t>(i)]) -= 1.0;

    if (literal) {
      grad.pair_bias += d_trans;
      for (int from = 0; from < L; ++from) {
        for (int to = 0; to < L; ++to) flat[from * L + to] = d_trans(from, to);
      }
      grad.pair_weights += flat * z.features.row(i);
      d_input.row(i) += (params.pair_weights.transpose() * flat).transpose();
    } else {
      grad.transitions += d_trans;
      d_input.row(i) += d_trans.colwise().sum();
    }
  }
  return log_z - gold_score;
}

struct CrfExample {
  Emissions z;
  LabelSequence y;
};

// Sum over the batch of log p(y | z); always <= 0.
inline double log_likelihood(const std::vector<CrfExample>& batch,
                             const CrfParams& params, const TransitionMask& mask) {
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double gold = sequence_score(batch[i].z, batch[i].y, params, mask);
    if (gold == kNegInf) {
      throw DataError("batch item " + std::to_string(i) + ": gold label sequence is masked");
    }
    total += gold - log_partition(batch[i].z, params, mask);
  }
  return total;
}

struct CrfGradients {
  CrfParams params;              // dNLL / dCrfParams, summed over the batch
  std::vector<Matrix> d_inputs;  // per item, dNLL w.r.t. the emission input
  double nll = 0.0;
};

inline CrfGradients gradients(const std::vector<CrfExample>& batch,
                              const CrfParams& params, const TransitionMask& mask) {
  CrfGradients out;
  out.params = params.zeros_like();
  out.d_inputs.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.nll += crf_nll_backward(batch[i].z, batch[i].y, params, mask, out.params,
                                out.d_inputs[i], "batch item " + std::to_string(i));
  }
  return out;
}

}  // namespace spancrf
