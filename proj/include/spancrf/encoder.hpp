// Randomly initialized transformer encoder: learned token + position
// embeddings feeding a stack of identical blocks (multi-head self-attention,
// position-wise feed-forward, residual connections, post-layer-norm), plus
// the projection from hidden states to per-label emission scores. Forward
// passes cache every intermediate needed by the hand-written backward pass.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spancrf/corpus.hpp"
#include "spancrf/crf.hpp"
#include "spancrf/linalg.hpp"
#include "spancrf/rng.hpp"
#include "spancrf/vocab.hpp"

namespace spancrf {

struct EncoderConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int max_len = 512;
  int d_feat = 0;  // feature width fed to the literal CRF; 0 means d_model

  int feature_dim() const { return d_feat > 0 ? d_feat : d_model; }

  void validate() const {
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_len < 4 ||
        d_feat < 0) {
      throw DataError("encoder config values must be positive (max_len >= 4)");
    }
    if (d_model % n_heads != 0) {
      throw DataError("d_model must be divisible by n_heads");
    }
  }
};

inline constexpr double kLayerNormEps = 1e-5;

struct EncoderParams {
  struct Layer {
    Matrix wq, wk, wv, wo;        // d x d
    Vector bq, bk, bv, bo;        // d
    Vector ln1_gamma, ln1_beta;   // d
    Matrix w1;                    // d x d_ff
    Vector b1;                    // d_ff
    Matrix w2;                    // d_ff x d
    Vector b2;                    // d
    Vector ln2_gamma, ln2_beta;   // d
  };

  Matrix token_embed;  // vocab x d
  Matrix pos_embed;    // max_len x d
  std::vector<Layer> layers;
  // Output projection: d x L in factorized mode, d x d_feat when the literal
  // CRF consumes a feature width other than d_model, 0 x 0 otherwise.
  Matrix out_proj;
  Vector out_bias;

  static EncoderParams zeros(const EncoderConfig& cfg, int vocab_size, int proj_dim) {
    cfg.validate();
    EncoderParams p;
    p.token_embed = Matrix::Zero(vocab_size, cfg.d_model);
    p.pos_embed = Matrix::Zero(cfg.max_len, cfg.d_model);
    p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& layer : p.layers) {
      layer.wq = Matrix::Zero(cfg.d_model, cfg.d_model);
      layer.wk = Matrix::Zero(cfg.d_model, cfg.d_model);
      layer.wv = Matrix::Zero(cfg.d_model, cfg.d_model);
      layer.wo = Matrix::Zero(cfg.d_model, cfg.d_model);
      layer.bq = Vector::Zero(cfg.d_model);
      layer.bk = Vector::Zero(cfg.d_model);
      layer.bv = Vector::Zero(cfg.d_model);
      layer.bo = Vector::Zero(cfg.d_model);
      layer.ln1_gamma = Vector::Zero(cfg.d_model);
      layer.ln1_beta = Vector::Zero(cfg.d_model);
      layer.w1 = Matrix::Zero(cfg.d_model, cfg.d_ff);
      layer.b1 = Vector::Zero(cfg.d_ff);
      layer.w2 = Matrix::Zero(cfg.d_ff, cfg.d_model);
      layer.b2 = Vector::Zero(cfg.d_model);
      layer.ln2_gamma = Vector::Zero(cfg.d_model);
      layer.ln2_beta = Vector::Zero(cfg.d_model);
    }
    if (proj_dim > 0) {
      p.out_proj = Matrix::Zero(cfg.d_model, proj_dim);
      p.out_bias = Vector::Zero(proj_dim);
    }
    return p;
  }

  // Weight matrices ~ U(-1/sqrt(d_model), +1/sqrt(d_model)); biases and
  // layer-norm offsets zero; layer-norm scales one.
  static EncoderParams init(const EncoderConfig& cfg, int vocab_size, int proj_dim,
                            Rng& rng) {
    EncoderParams p = zeros(cfg, vocab_size, proj_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    auto fill = [&](Matrix& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          m(i, j) = uniform_range(rng, -bound, bound);
        }
      }
    };
    fill(p.token_embed);
    fill(p.pos_embed);
    for (auto& layer : p.layers) {
      fill(layer.wq);
      fill(layer.wk);
      fill(layer.wv);
      fill(layer.wo);
      layer.ln1_gamma.setOnes();
      fill(layer.w1);
      fill(layer.w2);
      layer.ln2_gamma.setOnes();
    }
    if (p.out_proj.size() > 0) fill(p.out_proj);
    return p;
  }
};

// h_0: row i = token embedding of token i plus position embedding of i.
inline Matrix embed(const std::vector<int>& tokens, const EncoderParams& params) {
  const Eigen::Index n = static_cast<Eigen::Index>(tokens.size());
  if (n > params.pos_embed.rows()) {
    throw DataError("input of length " + std::to_string(n) +
                    " exceeds positional table of " +
                    std::to_string(params.pos_embed.rows()));
  }
  Matrix h0(n, params.token_embed.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    h0.row(i) = params.token_embed.row(tokens[static_cast<std::size_t>(i)]) +
                params.pos_embed.row(i);
  }
  return h0;
}

namespace detail {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;  // 1/sqrt(2*pi)
  return cdf + x * pdf;
}

struct LayerNormCache {
  Matrix xhat;      // normalized rows
  Vector inv_std;   // per row
};

inline Matrix layer_norm(const Matrix& x, const Vector& gamma, const Vector& beta,
                         LayerNormCache& cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  cache.xhat.resize(n, d);
  cache.inv_std.resize(n);
  Matrix out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[i] = inv_std;
    cache.xhat.row(i) = ((x.row(i).array() - mean) * inv_std).matrix();
    out.row(i) = cache.xhat.row(i).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
  return out;
}

inline Matrix layer_norm_backward(const Matrix& d_out, const LayerNormCache& cache,
                                  const Vector& gamma, Vector& d_gamma, Vector& d_beta) {
  const Eigen::Index n = d_out.rows();
  const Eigen::Index d = d_out.cols();
  Matrix d_x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    d_gamma += d_out.row(i).cwiseProduct(cache.xhat.row(i)).transpose();
    d_beta += d_out.row(i).transpose();
    const Eigen::RowVectorXd d_xhat = d_out.row(i).cwiseProduct(gamma.transpose());
    const double mean_dxhat = d_xhat.mean();
    const double mean_dxhat_xhat = d_xhat.cwiseProduct(cache.xhat.row(i)).mean();
    d_x.row(i) =
        (cache.inv_std[i] *
         (d_xhat.array() - mean_dxhat - cache.xhat.row(i).array() * mean_dxhat_xhat))
            .matrix();
  }
  return d_x;
}

struct BlockCache {
  Matrix x;                        // block input
  Matrix q, k, v;                  // n x d
  std::vector<Matrix> attn;        // per head, n x n softmax weights
  Matrix ctx;                      // n x d, heads concatenated
  LayerNormCache ln1;
  Matrix x1;                       // output of first layer norm
  Matrix ff_pre;                   // n x d_ff, pre-activation
  Matrix ff_act;                   // n x d_ff, gelu output
  LayerNormCache ln2;
};

}  // namespace detail

struct EncoderCache {
  Matrix h0;
  std::vector<detail::BlockCache> blocks;
  Matrix h_out;
};

// Applies the block stack. `valid` marks real tokens; padded positions are
// excluded from attention so they cannot influence valid rows. An empty mask
// means all positions are valid.
inline Matrix encode_stack(const Matrix& h0, const EncoderParams& params,
                           const EncoderConfig& cfg, EncoderCache& cache,
                           const std::vector<std::uint8_t>& valid = {}) {
  require_finite(h0, "encoder input h_0");
  const Eigen::Index n = h0.rows();
  const int heads = cfg.n_heads;
  const Eigen::Index dh = cfg.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.h0 = h0;
  cache.blocks.assign(params.layers.size(), {});
  Matrix x = h0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    auto& bc = cache.blocks[l];
    bc.x = x;

    bc.q = (x * layer.wq).rowwise() + layer.bq.transpose();
    bc.k = (x * layer.wk).rowwise() + layer.bk.transpose();
    bc.v = (x * layer.wv).rowwise() + layer.bv.transpose();

    bc.attn.assign(static_cast<std::size_t>(heads), Matrix());
    bc.ctx.resize(n, cfg.d_model);
    for (int h = 0; h < heads; ++h) {
      const auto qh = bc.q.middleCols(h * dh, dh);
      const auto kh = bc.k.middleCols(h * dh, dh);
      const auto vh = bc.v.middleCols(h * dh, dh);
      Matrix scores = qh * kh.transpose() * scale;
      if (!valid.empty()) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (!valid[static_cast<std::size_t>(j)]) scores.col(j).setConstant(kNegInf);
        }
      }
      Matrix& attn = bc.attn[static_cast<std::size_t>(h)];
      attn.resize(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = scores.row(i).maxCoeff();
        attn.row(i) = (scores.row(i).array() - m).exp().matrix();
        attn.row(i) /= attn.row(i).sum();
      }
      bc.ctx.middleCols(h * dh, dh) = attn * vh;
    }

    Matrix attn_out = (bc.ctx * layer.wo).rowwise() + layer.bo.transpose();
    bc.x1 = detail::layer_norm(bc.x + attn_out, layer.ln1_gamma, layer.ln1_beta, bc.ln1);

    bc.ff_pre = (bc.x1 * layer.w1).rowwise() + layer.b1.transpose();
    bc.ff_act = bc.ff_pre.unaryExpr([](double v) { return detail::gelu(v); });
    Matrix ff_out = (bc.ff_act * layer.w2).rowwise() + layer.b2.transpose();
    x = detail::layer_norm(bc.x1 + ff_out, layer.ln2_gamma, layer.ln2_beta, bc.ln2);

    if (!x.allFinite()) {
      throw NumericError("encoder layer " + std::to_string(l + 1) +
                         " produced non-finite values");
    }
  }
  cache.h_out = x;
  return x;
}

namespace detail {

inline Matrix gather_taggable_rows(const Matrix& h_out, const ModelInput& input) {
  Matrix rows(input.n_taggable(), h_out.cols());
  int row = 0;
  for (std::size_t i = 0; i < input.taggable.size(); ++i) {
    if (input.taggable[i]) rows.row(row++) = h_out.row(static_cast<Eigen::Index>(i));
  }
  return rows;
}

}  // namespace detail

// Selects the taggable (text) rows of h_N as CRF features. Factorized mode
// additionally projects them to per-label scores; literal mode applies the
// feature projection when one is configured (d_feat != d_model).
inline Emissions project_emissions(const Matrix& h_out, const ModelInput& input,
                                   const EncoderParams& params, CrfMode mode) {
  Emissions emissions;
  const Matrix rows = detail::gather_taggable_rows(h_out, input);
  if (mode == CrfMode::kFactorized) {
    emissions.features = rows;
    emissions.label_scores =
        (emissions.features * params.out_proj).rowwise() + params.out_bias.transpose();
  } else if (params.out_proj.size() > 0) {
    emissions.features = (rows * params.out_proj).rowwise() + params.out_bias.transpose();
  } else {
    emissions.features = rows;
  }
  return emissions;
}

// Backward through projection, block stack and embeddings. d_emissions is
// dLoss w.r.t. the matrix the CRF consumed (features in literal mode,
// label_scores in factorized mode). Gradients accumulate into `grad`.
inline void encoder_backward(const EncoderParams& params, const EncoderConfig& cfg,
                             const EncoderCache& cache, const ModelInput& input,
                             const Matrix& d_emissions, EncoderParams& grad) {
  const Eigen::Index n = cache.h0.rows();
  const int heads = cfg.n_heads;
  const Eigen::Index dh = cfg.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix d_rows;
  if (params.out_proj.size() > 0) {
    const Matrix rows = detail::gather_taggable_rows(cache.h_out, input);
    grad.out_proj += rows.transpose() * d_emissions;
    grad.out_bias += d_emissions.colwise().sum().transpose();
    d_rows = d_emissions * params.out_proj.transpose();
  } else {
    d_rows = d_emissions;
  }

  Matrix d_x = Matrix::Zero(n, cfg.d_model);
  int row = 0;
  for (std::size_t i = 0; i < input.taggable.size(); ++i) {
    if (input.taggable[i]) {
      d_x.row(static_cast<Eigen::Index>(i)) = d_rows.row(row++);
    }
  }

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    const auto& bc = cache.blocks[l];
    auto& gl = grad.layers[l];

    // layer norm 2 over (x1 + ff_out)
    Matrix d_resid2 =
        detail::layer_norm_backward(d_x, bc.ln2, layer.ln2_gamma, gl.ln2_gamma, gl.ln2_beta);
    Matrix d_x1 = d_resid2;
    // feed-forward
    gl.w2 += bc.ff_act.transpose() * d_resid2;
    gl.b2 += d_resid2.colwise().sum().transpose();
    Matrix d_act = d_resid2 * layer.w2.transpose();
    Matrix d_pre =
        d_act.cwiseProduct(bc.ff_pre.unaryExpr([](double v) { return detail::gelu_grad(v); }));
    gl.w1 += bc.x1.transpose() * d_pre;
    gl.b1 += d_pre.colwise().sum().transpose();
    d_x1 += d_pre * layer.w1.transpose();

    // layer norm 1 over (x + attn_out)
    Matrix d_resid1 =
        detail::layer_norm_backward(d_x1, bc.ln1, layer.ln1_gamma, gl.ln1_gamma, gl.ln1_beta);
    Matrix d_block_in = d_resid1;  // residual branch
    // output projection
    gl.wo += bc.ctx.transpose() * d_resid1;
    gl.bo += d_resid1.colwise().sum().transpose();
    Matrix d_ctx = d_resid1 * layer.wo.transpose();

    Matrix d_q(n, cfg.d_model), d_k(n, cfg.d_model), d_v(n, cfg.d_model);
    for (int h = 0; h < heads; ++h) {
      const Matrix& attn = bc.attn[static_cast<std::size_t>(h)];
      const auto qh = bc.q.middleCols(h * dh, dh);
      const auto kh = bc.k.middleCols(h * dh, dh);
      const auto vh = bc.v.middleCols(h * dh, dh);
      const auto d_ctx_h = d_ctx.middleCols(h * dh, dh);

      Matrix d_attn = d_ctx_h * vh.transpose();
      d_v.middleCols(h * dh, dh) = attn.transpose() * d_ctx_h;
      // softmax backward per row: a .* (da - (da . a))
      Matrix d_scores(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dot = d_attn.row(i).dot(attn.row(i));
        d_scores.row(i) =
            (attn.row(i).array() * (d_attn.row(i).array() - dot)).matrix();
      }
      d_q.middleCols(h * dh, dh) = d_scores * kh * scale;
      d_k.middleCols(h * dh, dh) = d_scores.transpose() * qh * scale;
    }

    gl.wq += bc.x.transpose() * d_q;
    gl.wk += bc.x.transpose() * d_k;
    gl.wv += bc.x.transpose() * d_v;
    gl.bq += d_q.colwise().sum().transpose();
    gl.bk += d_k.colwise().sum().transpose();
    gl.bv += d_v.colwise().sum().transpose();
    d_block_in += d_q * layer.wq.transpose() + d_k * layer.wk.transpose() +
                  d_v * layer.wv.transpose();
    d_x = std::move(d_block_in);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    grad.token_embed.row(input.tokens[static_cast<std::size_t>(i)]) += d_x.row(i);
    grad.pos_embed.row(i) += d_x.row(i);
  }
}

}  // namespace spancrf
