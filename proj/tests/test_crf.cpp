#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "spancrf/crf.hpp"
#include "spancrf/crf_oracle.hpp"
#include "support/crf_fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace spancrf;
using Catch::Matchers::WithinAbs;

namespace {

EncoderParams empty_encoder;  // CRF-only traversal partner

std::vector<ParamRef> crf_refs(CrfParams& params) {
  std::vector<ParamRef> refs;
  collect_param_refs(empty_encoder, params, refs);
  return refs;
}

}  // namespace

TEST_CASE("sequence_score fixtures") {
  SECTION("all parameters zero score 0 for every sequence") {
    const CrfParams params = CrfParams::literal(3, 2);
    Emissions z;
    z.features = Matrix::Random(4, 2);
    const TransitionMask mask = TransitionMask::none(3);
    REQUIRE(sequence_score(z, {0, 1, 2, 1}, params, mask) == 0.0);
    REQUIRE(sequence_score(z, {2, 2, 2, 2}, params, mask) == 0.0);
  }

  SECTION("single position uses start parameters only") {
    CrfParams params = CrfParams::literal(2, 2);
    params.start_bias << 0.5, -0.5;
    Emissions z;
    z.features = Matrix::Ones(1, 2);
    const TransitionMask mask = TransitionMask::none(2);
    REQUIRE_THAT(sequence_score(z, {0}, params, mask), WithinAbs(0.5, 1e-12));
    REQUIRE_THAT(sequence_score(z, {1}, params, mask), WithinAbs(-0.5, 1e-12));
  }

  SECTION("pairwise weight applied to the current position's features") {
    CrfParams params = CrfParams::literal(2, 1);
    params.pair_weights(0 * 2 + 1, 0) = 1.0;  // W[A][B]
    params.pair_bias(0, 1) = 0.1;
    Emissions z;
    z.features = Matrix(2, 1);
    z.features << 2.0, 3.0;
    const TransitionMask mask = TransitionMask::none(2);
    REQUIRE_THAT(sequence_score(z, {0, 1}, params, mask), WithinAbs(3.1, 1e-12));
  }

  SECTION("length mismatch is an error") {
    const CrfParams params = CrfParams::literal(2, 1);
    Emissions z;
    z.features = Matrix::Zero(2, 1);
    REQUIRE_THROWS_AS(sequence_score(z, {0}, params, TransitionMask::none(2)), DataError);
  }

  SECTION("masked transition scores -inf") {
    const Tagset tagset = default_tagset();
    const CrfParams params = CrfParams::literal(tagset.size(), 1);
    Emissions z;
    z.features = Matrix::Zero(2, 1);
    const TransitionMask mask = TransitionMask::bio(tagset);
    REQUIRE(sequence_score(z, {0, tagset.i_label(0)}, params, mask) == kNegInf);
    REQUIRE(sequence_score(z, {tagset.i_label(0), 0}, params, mask) == kNegInf);
  }
}

TEST_CASE("log_partition fixtures") {
  SECTION("uniform paths") {
    CrfParams params = CrfParams::literal(2, 1);
    Emissions z;
    z.features = Matrix::Zero(2, 1);
    REQUIRE_THAT(log_partition(z, params, TransitionMask::none(2)),
                 WithinAbs(std::log(4.0), 1e-12));

    CrfParams params3 = CrfParams::literal(3, 1);
    Emissions z1;
    z1.features = Matrix::Zero(1, 1);
    REQUIRE_THAT(log_partition(z1, params3, TransitionMask::none(3)),
                 WithinAbs(std::log(3.0), 1e-12));
  }

  SECTION("matches enumeration on a seeded random instance") {
    Rng rng(2024);
    const CrfParams params = testsupport::random_crf_params(rng, 3, 2, CrfMode::kLiteral);
    const Emissions z = testsupport::random_emissions(rng, 4, 2, 3, CrfMode::kLiteral);
    const TransitionMask mask = TransitionMask::none(3);
    const OracleResult oracle = brute_force_oracle(z, params, mask);
    const double dp = log_partition(z, params, mask);
    REQUIRE(std::abs(dp - oracle.log_partition) <=
            1e-10 * std::max(1.0, std::abs(oracle.log_partition)));
  }

  SECTION("all paths masked is an error") {
    const CrfParams params = CrfParams::literal(2, 1);
    Emissions z;
    z.features = Matrix::Zero(1, 1);
    TransitionMask mask = TransitionMask::none(2);
    mask.start_allowed = {0, 0};
    REQUIRE_THROWS_AS(log_partition(z, params, mask), NumericError);
  }
}

TEST_CASE("log_likelihood fixtures") {
  SECTION("uniform distribution over two labels") {
    const CrfParams params = CrfParams::literal(2, 1);
    Emissions z;
    z.features = Matrix::Zero(1, 1);
    const std::vector<CrfExample> batch = {{z, {0}}};
    REQUIRE_THAT(log_likelihood(batch, params, TransitionMask::none(2)),
                 WithinAbs(std::log(0.5), 1e-12));
  }

  SECTION("additive over the batch") {
    Rng rng(7);
    const CrfParams params = testsupport::random_crf_params(rng, 3, 2, CrfMode::kLiteral);
    const Emissions z = testsupport::random_emissions(rng, 3, 2, 3, CrfMode::kLiteral);
    const TransitionMask mask = TransitionMask::none(3);
    const std::vector<CrfExample> one = {{z, {0, 2, 1}}};
    const std::vector<CrfExample> two = {{z, {0, 2, 1}}, {z, {0, 2, 1}}};
    REQUIRE_THAT(log_likelihood(two, params, mask),
                 WithinAbs(2.0 * log_likelihood(one, params, mask), 1e-12));
  }

  SECTION("matches the enumerated probability") {
    Rng rng(11);
    const CrfParams params = testsupport::random_crf_params(rng, 3, 2, CrfMode::kFactorized);
    const Emissions z = testsupport::random_emissions(rng, 4, 2, 3, CrfMode::kFactorized);
    const TransitionMask mask = TransitionMask::none(3);
    const LabelSequence gold = {1, 0, 2, 2};
    const OracleResult oracle = brute_force_oracle(z, params, mask);
    const double expected =
        detail::oracle_path_score(gold, z, params, mask) - oracle.log_partition;
    const std::vector<CrfExample> batch = {{z, gold}};
    REQUIRE_THAT(log_likelihood(batch, params, mask), WithinAbs(expected, 1e-10));
  }

  SECTION("never positive") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      const auto inst = testsupport::random_instance(rng);
      const LabelSequence gold =
          testsupport::random_legal_sequence(rng, inst.n, inst.num_labels, inst.mask);
      const std::vector<CrfExample> batch = {{inst.z, gold}};
      REQUIRE(log_likelihood(batch, inst.params, inst.mask) <= 1e-12);
    }
  }

  SECTION("zero when the gold path is the unique legal path") {
    Rng rng(19);
    const CrfParams params = testsupport::random_crf_params(rng, 2, 1, CrfMode::kLiteral);
    const Emissions z = testsupport::random_emissions(rng, 3, 1, 2, CrfMode::kLiteral);
    TransitionMask mask = TransitionMask::none(2);
    mask.start_allowed = {1, 0};
    mask.allowed = {1, 0, 1, 1};  // from label 0 only to label 0
    const std::vector<CrfExample> batch = {{z, {0, 0, 0}}};
    REQUIRE(log_likelihood(batch, params, mask) == 0.0);
  }

  SECTION("out-of-range label is an error") {
    const CrfParams params = CrfParams::literal(2, 1);
    Emissions z;
    z.features = Matrix::Zero(2, 1);
    REQUIRE_THROWS_AS(sequence_score(z, {0, 5}, params, TransitionMask::none(2)),
                      DataError);
  }

  SECTION("masked gold is an error naming the item") {
    const Tagset tagset = default_tagset();
    const CrfParams params = CrfParams::literal(tagset.size(), 1);
    Emissions z;
    z.features = Matrix::Zero(2, 1);
    const std::vector<CrfExample> batch = {{z, {0, tagset.i_label(0)}}};
    REQUIRE_THROWS_WITH(log_likelihood(batch, params, TransitionMask::bio(tagset)),
                        Catch::Matchers::ContainsSubstring("batch item 0"));
  }
}

TEST_CASE("gradient fixtures") {
  SECTION("uniform two-step chain, gold (A, A)") {
    const CrfParams params = CrfParams::literal(2, 1);
    Emissions z;
    z.features = Matrix::Zero(2, 1);
    const std::vector<CrfExample> batch = {{z, {0, 0}}};
    const CrfGradients g = gradients(batch, params, TransitionMask::none(2));
    // pairwise marginal 1/4 minus the gold indicator
    REQUIRE_THAT(g.params.pair_bias(0, 0), WithinAbs(0.25 - 1.0, 1e-12));
    REQUIRE_THAT(g.params.pair_bias(0, 1), WithinAbs(0.25, 1e-12));
    REQUIRE_THAT(g.params.start_bias[0], WithinAbs(0.5 - 1.0, 1e-12));
    REQUIRE_THAT(g.params.start_bias[1], WithinAbs(0.5, 1e-12));
  }

  SECTION("bias gradients sum to zero per position") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const auto inst = testsupport::random_instance(rng);
      const LabelSequence gold =
          testsupport::random_legal_sequence(rng, inst.n, inst.num_labels, inst.mask);
      const std::vector<CrfExample> batch = {{inst.z, gold}};
      const CrfGradients g = gradients(batch, inst.params, inst.mask);
      if (inst.mode == CrfMode::kLiteral) {
        REQUIRE_THAT(g.params.start_bias.sum() + g.params.pair_bias.sum(),
                     WithinAbs(0.0, 1e-9));
      } else {
        REQUIRE_THAT(g.params.start_scores.sum() + g.params.transitions.sum(),
                     WithinAbs(0.0, 1e-9));
      }
    }
  }

  SECTION("matches central finite differences") {
    Rng rng(23);
    for (int trial = 0; trial < 4; ++trial) {
      auto inst = testsupport::random_instance(rng, 5, 4, 3);
      const LabelSequence gold =
          testsupport::random_legal_sequence(rng, inst.n, inst.num_labels, inst.mask);
      const std::vector<CrfExample> batch = {{inst.z, gold}};
      CrfGradients g = gradients(batch, inst.params, inst.mask);

      const auto loss = [&] { return -log_likelihood(batch, inst.params, inst.mask); };
      // parameters are shared between `batch` construction and the closure via
      // inst.params; perturb through refs
      auto param_refs = crf_refs(inst.params);
      auto grad_refs = crf_refs(g.params);
      const auto report = testsupport::check_gradients(param_refs, grad_refs, loss, 1e-5);
      INFO("worst: " << report.worst_name << "[" << report.worst_index << "]");
      REQUIRE(report.max_rel_error <= 1e-5);

      // d_input against finite differences over the consumed emission matrix
      Matrix& input = inst.mode == CrfMode::kLiteral ? inst.z.features : inst.z.label_scores;
      const auto input_loss = [&] {
        const std::vector<CrfExample> fresh = {{inst.z, gold}};
        return -log_likelihood(fresh, inst.params, inst.mask);
      };
      double worst = 0.0;
      for (Eigen::Index c = 0; c < input.size(); ++c) {
        const double numeric =
            testsupport::central_difference(input_loss, input.data() + c, 1e-5);
        worst = std::max(worst,
                         testsupport::relative_error(g.d_inputs[0].data()[c], numeric));
      }
      REQUIRE(worst <= 1e-5);
    }
  }
}

TEST_CASE("viterbi fixtures") {
  SECTION("per-position argmax when transitions vanish") {
    CrfParams params = CrfParams::factorized(2);
    Emissions z;
    z.label_scores = Matrix(2, 2);
    z.label_scores << 1.0, 0.0, 0.0, 1.0;
    const ViterbiResult best = viterbi_decode(z, params, TransitionMask::none(2));
    REQUIRE(best.labels == LabelSequence{0, 1});
    REQUIRE_THAT(best.score, WithinAbs(2.0, 1e-12));
  }

  SECTION("transition weight flips the winner") {
    CrfParams params = CrfParams::factorized(2);
    params.transitions(0, 0) = 1.5;
    Emissions z;
    z.label_scores = Matrix(2, 2);
    z.label_scores << 1.0, 0.0, 0.0, 1.0;
    const ViterbiResult best = viterbi_decode(z, params, TransitionMask::none(2));
    REQUIRE(best.labels == LabelSequence{0, 0});
    REQUIRE_THAT(best.score, WithinAbs(2.5, 1e-12));
  }

  SECTION("ties prefer the lower label at the latest differing position") {
    const CrfParams params = CrfParams::literal(2, 1);
    Emissions z;
    z.features = Matrix::Zero(2, 1);
    const ViterbiResult best = viterbi_decode(z, params, TransitionMask::none(2));
    REQUIRE(best.labels == LabelSequence{0, 0});
  }

  SECTION("single position") {
    CrfParams params = CrfParams::factorized(3);
    Emissions z;
    z.label_scores = Matrix(1, 3);
    z.label_scores << 0.0, 2.0, 1.0;
    const ViterbiResult best = viterbi_decode(z, params, TransitionMask::none(3));
    REQUIRE(best.labels == LabelSequence{1});
    REQUIRE_THAT(best.score, WithinAbs(2.0, 1e-12));
  }

  SECTION("no legal path is an error") {
    const CrfParams params = CrfParams::literal(2, 1);
    Emissions z;
    z.features = Matrix::Zero(1, 1);
    TransitionMask mask = TransitionMask::none(2);
    mask.start_allowed = {0, 0};
    REQUIRE_THROWS_AS(viterbi_decode(z, params, mask), NumericError);
  }

  SECTION("constrained decoding never emits a forbidden pair") {
    const Tagset tagset = default_tagset();
    const TransitionMask mask = TransitionMask::bio(tagset);
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 1 + static_cast<int>(uniform_below(rng, 6));
      CrfParams params =
          testsupport::random_crf_params(rng, tagset.size(), 1, CrfMode::kFactorized);
      const Emissions z =
          testsupport::random_emissions(rng, n, 1, tagset.size(), CrfMode::kFactorized);
      const ViterbiResult best = viterbi_decode(z, params, mask);
      REQUIRE(allowed_start(best.labels[0], tagset));
      for (std::size_t i = 1; i < best.labels.size(); ++i) {
        REQUIRE(allowed_transition(best.labels[i - 1], best.labels[i], tagset));
      }
    }
  }
}

TEST_CASE("brute force oracle basics") {
  SECTION("uniform two-step chain") {
    const CrfParams params = CrfParams::literal(2, 1);
    Emissions z;
    z.features = Matrix::Zero(2, 1);
    const OracleResult oracle = brute_force_oracle(z, params, TransitionMask::none(2));
    REQUIRE_THAT(oracle.log_partition, WithinAbs(std::log(4.0), 1e-12));
    REQUIRE(oracle.best == LabelSequence{0, 0});  // tie-break
    REQUIRE_THAT(oracle.position0_marginals.sum(), WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(oracle.pair_marginals[1].sum(), WithinAbs(1.0, 1e-12));
  }

  SECTION("instance too large") {
    const CrfParams params = CrfParams::literal(5, 1);
    Emissions z;
    z.features = Matrix::Zero(12, 1);
    REQUIRE_THROWS_AS(brute_force_oracle(z, params, TransitionMask::none(5)), DataError);
  }
}

TEST_CASE("viterbi agrees with the oracle on random instances") {
  Rng rng(97);
  for (int trial = 0; trial < 60; ++trial) {
    const auto inst = testsupport::random_instance(rng);
    const OracleResult oracle = brute_force_oracle(inst.z, inst.params, inst.mask);
    const ViterbiResult best = viterbi_decode(inst.z, inst.params, inst.mask);
    REQUIRE(std::abs(best.score - oracle.best_score) <= 1e-10);
    REQUIRE(best.labels == oracle.best);
    const double dp = log_partition(inst.z, inst.params, inst.mask);
    REQUIRE(std::abs(dp - oracle.log_partition) <=
            1e-10 * std::max(1.0, std::abs(oracle.log_partition)));
  }
}

TEST_CASE("forward-backward marginals match the oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = testsupport::random_instance(rng, 5, 4, 3);
    const LabelSequence gold =
        testsupport::random_legal_sequence(rng, inst.n, inst.num_labels, inst.mask);
    const std::vector<CrfExample> batch = {{inst.z, gold}};
    const CrfGradients g = gradients(batch, inst.params, inst.mask);
    const OracleResult oracle = brute_force_oracle(inst.z, inst.params, inst.mask);

    // bias-like gradients are exactly (marginal - gold indicator)
    Matrix expected_pairs = Matrix::Zero(inst.num_labels, inst.num_labels);
    for (int i = 1; i < inst.n; ++i) {
      expected_pairs += oracle.pair_marginals[static_cast<std::size_t>(i)];
      expected_pairs(gold[static_cast<std::size_t>(i - 1)],
                     gold[static_cast<std::size_t>(i)]) -= 1.0;
    }
    Vector expected_start = oracle.position0_marginals;
    expected_start[gold[0]] -= 1.0;
    if (inst.mode == CrfMode::kLiteral) {
      REQUIRE((g.params.pair_bias - expected_pairs).cwiseAbs().maxCoeff() <= 1e-9);
      REQUIRE((g.params.start_bias - expected_start).cwiseAbs().maxCoeff() <= 1e-9);
    } else {
      REQUIRE((g.params.transitions - expected_pairs).cwiseAbs().maxCoeff() <= 1e-9);
      REQUIRE((g.params.start_scores - expected_start).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("shift invariance in factorized mode") {
  Rng rng(211);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(uniform_below(rng, 4));
    const int L = 2 + static_cast<int>(uniform_below(rng, 3));
    const CrfParams params = testsupport::random_crf_params(rng, L, 1, CrfMode::kFactorized);
    Emissions z = testsupport::random_emissions(rng, n, 1, L, CrfMode::kFactorized);
    const TransitionMask mask = TransitionMask::none(L);

    const double log_z = log_partition(z, params, mask);
    const ViterbiResult best = viterbi_decode(z, params, mask);
    const LabelSequence probe =
        testsupport::random_legal_sequence(rng, n, L, mask);
    const double log_p = sequence_score(z, probe, params, mask) - log_z;

    const int shifted_pos = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n)));
    const double c = 0.7;
    z.label_scores.row(shifted_pos).array() += c;

    const double log_z2 = log_partition(z, params, mask);
    REQUIRE_THAT(log_z2, WithinAbs(log_z + c, 1e-9));
    const double log_p2 = sequence_score(z, probe, params, mask) - log_z2;
    REQUIRE_THAT(log_p2, WithinAbs(log_p, 1e-9));
    const ViterbiResult best2 = viterbi_decode(z, params, mask);
    REQUIRE(best2.labels == best.labels);
  }
}

TEST_CASE("normalization via enumeration") {
  Rng rng(307);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = testsupport::random_instance(rng, 5, 4, 3);
    const double log_z = log_partition(inst.z, inst.params, inst.mask);
    // enumerate all sequences through sequence_score (the non-DP route)
    LabelSequence y(static_cast<std::size_t>(inst.n), 0);
    double total = 0.0;
    const std::size_t count = static_cast<std::size_t>(
        std::llround(std::pow(inst.num_labels, inst.n)));
    for (std::size_t idx = 0; idx < count; ++idx) {
      const double s = sequence_score(inst.z, y, inst.params, inst.mask);
      if (s != kNegInf) total += std::exp(s - log_z);
      for (int p = inst.n - 1; p >= 0; --p) {
        auto& v = y[static_cast<std::size_t>(p)];
        if (++v < inst.num_labels) break;
        v = 0;
      }
    }
    REQUIRE_THAT(total, WithinAbs(1.0, 1e-9));
  }
}
