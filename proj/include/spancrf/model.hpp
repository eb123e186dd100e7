// The end-to-end model: vocabulary, tagset, encoder and CRF, with a flat
// parameter traversal used by the optimizer, serialization and tests.
#pragma once

#include <string>
#include <vector>

#include "spancrf/corpus.hpp"
#include "spancrf/crf.hpp"
#include "spancrf/encoder.hpp"
#include "spancrf/tagscheme.hpp"
#include "spancrf/vocab.hpp"

namespace spancrf {

enum class ParamGroup { kEncoder, kCrf };

// View into one parameter tensor. `decay` marks weight matrices subject to
// L2 regularization; biases, layer-norm parameters and start/transition
// biases are exempt.
struct ParamRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index size = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  ParamGroup group = ParamGroup::kEncoder;
  bool decay = false;
};

inline void collect_param_refs(EncoderParams& enc, CrfParams& crf,
                               std::vector<ParamRef>& out) {
  auto add_mat = [&](const std::string& name, Matrix& m, ParamGroup group, bool decay) {
    if (m.size() > 0) {
      out.push_back({name, m.data(), m.size(), m.rows(), m.cols(), group, decay});
    }
  };
  auto add_vec = [&](const std::string& name, Vector& v, ParamGroup group, bool decay) {
    if (v.size() > 0) {
      out.push_back({name, v.data(), v.size(), v.size(), 1, group, decay});
    }
  };

  add_mat("encoder.token_embed", enc.token_embed, ParamGroup::kEncoder, true);
  add_mat("encoder.pos_embed", enc.pos_embed, ParamGroup::kEncoder, true);
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    const std::string prefix = "encoder.layer" + std::to_string(l) + ".";
    auto& layer = enc.layers[l];
    add_mat(prefix + "wq", layer.wq, ParamGroup::kEncoder, true);
    add_vec(prefix + "bq", layer.bq, ParamGroup::kEncoder, false);
    add_mat(prefix + "wk", layer.wk, ParamGroup::kEncoder, true);
    add_vec(prefix + "bk", layer.bk, ParamGroup::kEncoder, false);
    add_mat(prefix + "wv", layer.wv, ParamGroup::kEncoder, true);
    add_vec(prefix + "bv", layer.bv, ParamGroup::kEncoder, false);
    add_mat(prefix + "wo", layer.wo, ParamGroup::kEncoder, true);
    add_vec(prefix + "bo", layer.bo, ParamGroup::kEncoder, false);
    add_vec(prefix + "ln1_gamma", layer.ln1_gamma, ParamGroup::kEncoder, false);
    add_vec(prefix + "ln1_beta", layer.ln1_beta, ParamGroup::kEncoder, false);
    add_mat(prefix + "w1", layer.w1, ParamGroup::kEncoder, true);
    add_vec(prefix + "b1", layer.b1, ParamGroup::kEncoder, false);
    add_mat(prefix + "w2", layer.w2, ParamGroup::kEncoder, true);
    add_vec(prefix + "b2", layer.b2, ParamGroup::kEncoder, false);
    add_vec(prefix + "ln2_gamma", layer.ln2_gamma, ParamGroup::kEncoder, false);
    add_vec(prefix + "ln2_beta", layer.ln2_beta, ParamGroup::kEncoder, false);
  }
  add_mat("encoder.out_proj", enc.out_proj, ParamGroup::kEncoder, true);
  add_vec("encoder.out_bias", enc.out_bias, ParamGroup::kEncoder, false);

  add_mat("crf.pair_weights", crf.pair_weights, ParamGroup::kCrf, true);
  add_mat("crf.pair_bias", crf.pair_bias, ParamGroup::kCrf, false);
  add_mat("crf.start_weights", crf.start_weights, ParamGroup::kCrf, true);
  add_vec("crf.start_bias", crf.start_bias, ParamGroup::kCrf, false);
  add_mat("crf.transitions", crf.transitions, ParamGroup::kCrf, true);
  add_vec("crf.start_scores", crf.start_scores, ParamGroup::kCrf, false);
}

// Width of the encoder output projection: the label count in factorized
// mode, d_feat in literal mode when it differs from d_model, otherwise none.
inline int encoder_proj_dim(const EncoderConfig& cfg, CrfMode mode, int num_labels) {
  if (mode == CrfMode::kFactorized) return num_labels;
  return cfg.feature_dim() != cfg.d_model ? cfg.feature_dim() : 0;
}

struct Model {
  Vocab vocab;
  Tagset tagset;
  EncoderConfig encoder_config;
  CrfMode crf_mode = CrfMode::kLiteral;
  EncoderParams encoder;
  CrfParams crf;

  std::vector<ParamRef> param_refs() {
    std::vector<ParamRef> refs;
    collect_param_refs(encoder, crf, refs);
    return refs;
  }

  static Model init(Vocab vocab, Tagset tagset, const EncoderConfig& cfg,
                    CrfMode mode, std::uint64_t seed) {
    Model model;
    model.vocab = std::move(vocab);
    model.tagset = std::move(tagset);
    model.encoder_config = cfg;
    model.crf_mode = mode;
    const int num_labels = model.tagset.size();
    Rng rng(seed);
    model.encoder = EncoderParams::init(cfg, model.vocab.size(),
                                        encoder_proj_dim(cfg, mode, num_labels), rng);
    model.crf = mode == CrfMode::kLiteral
                    ? CrfParams::literal(num_labels, cfg.feature_dim())
                    : CrfParams::factorized(num_labels);
    model.crf.init(rng);
    return model;
  }
};

// Mirror of a model's parameters, zero-initialized; used for gradients.
struct Gradients {
  EncoderParams encoder;
  CrfParams crf;

  static Gradients zeros_like(const Model& model) {
    Gradients g;
    g.encoder = EncoderParams::zeros(
        model.encoder_config, model.vocab.size(),
        encoder_proj_dim(model.encoder_config, model.crf_mode, model.tagset.size()));
    g.crf = model.crf.zeros_like();
    return g;
  }

  std::vector<ParamRef> param_refs() {
    std::vector<ParamRef> refs;
    collect_param_refs(encoder, crf, refs);
    return refs;
  }
};

struct ForwardResult {
  EncoderCache cache;
  Emissions emissions;
};

inline ForwardResult forward_emissions(const Model& model, const ModelInput& input) {
  ForwardResult result;
  const Matrix h0 = embed(input.tokens, model.encoder);
  const Matrix h_out =
      encode_stack(h0, model.encoder, model.encoder_config, result.cache);
  result.emissions = project_emissions(h_out, input, model.encoder, model.crf_mode);
  return result;
}

// Viterbi under the BIO transition mask, mapped back to character spans.
inline std::vector<Span> predict_spans(const Model& model, const std::string& subject,
                                       const std::string& text) {
  const ModelInput input =
      build_input(subject, text, model.vocab, model.encoder_config.max_len);
  if (input.n_taggable() == 0) return {};
  const ForwardResult fwd = forward_emissions(model, input);
  const TransitionMask mask = TransitionMask::bio(model.tagset);
  const ViterbiResult best = viterbi_decode(fwd.emissions, model.crf, mask);
  return decode_labels(best.labels, model.tagset);
}

inline std::vector<Span> predict_spans(const Model& model, const Record& record) {
  return predict_spans(model, record.subject, record.text);
}

}  // namespace spancrf
