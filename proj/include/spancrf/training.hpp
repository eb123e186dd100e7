// End-to-end maximum-likelihood training of encoder + CRF, and k-fold
// cross-validation with out-of-fold and full-dataset predictions.
//
// Determinism contract: batch gradients are computed per sequence (possibly
// on several threads) and reduced in record order before the single
// optimizer step, so a fixed seed yields a bit-identical model at any
// thread count.
#pragma once

#include <memory>
#include <numeric>
#include <thread>
#include <vector>

#include "spancrf/adam.hpp"
#include "spancrf/config.hpp"
#include "spancrf/corpus.hpp"
#include "spancrf/crf.hpp"
#include "spancrf/evaluation.hpp"
#include "spancrf/logging.hpp"
#include "spancrf/model.hpp"

namespace spancrf {

struct EpochStats {
  int epoch = 0;
  double mean_nll = 0.0;
  double l2_term = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> trace;
};

namespace detail {

struct PreparedExample {
  ModelInput input;
  LabelSequence gold;
};

inline std::vector<PreparedExample> prepare_examples(const std::vector<Record>& records,
                                                     const Model& model) {
  std::vector<PreparedExample> examples;
  examples.reserve(records.size());
  for (const Record& record : records) {
    PreparedExample ex;
    ex.input = build_input(record.subject, record.text, model.vocab,
                           model.encoder_config.max_len);
    const int n_text = ex.input.n_taggable();
    for (const Span& span : record.gold_spans) {
      if (span.end > n_text) {
        throw DataError("record " + record.id + ": gold span [" +
                        std::to_string(span.start) + ", " + std::to_string(span.end) +
                        ") is not encodable after truncation to " +
                        std::to_string(n_text) + " tokens");
      }
    }
    ex.gold = encode_spans(n_text, record.gold_spans, model.tagset);
    examples.push_back(std::move(ex));
  }
  return examples;
}

// Forward + backward for one sequence; returns its NLL.
inline double sequence_backward(const Model& model, const PreparedExample& ex,
                                const TransitionMask& mask, Gradients& grads) {
  const ForwardResult fwd = forward_emissions(model, ex.input);
  Matrix d_emissions;
  const double nll = crf_nll_backward(fwd.emissions, ex.gold, model.crf, mask,
                                      grads.crf, d_emissions);
  encoder_backward(model.encoder, model.encoder_config, fwd.cache, ex.input,
                   d_emissions, grads.encoder);
  return nll;
}

inline void add_scaled(Gradients& into, Gradients& from, double scale) {
  const auto dst = into.param_refs();
  const auto src = from.param_refs();
  for (std::size_t r = 0; r < dst.size(); ++r) {
    for (Eigen::Index i = 0; i < dst[r].size; ++i) {
      dst[r].data[i] += scale * src[r].data[i];
    }
  }
}

inline void scale_params(Gradients& grads, double scale) {
  for (const ParamRef& ref : grads.param_refs()) {
    for (Eigen::Index i = 0; i < ref.size; ++i) ref.data[i] *= scale;
  }
}

}  // namespace detail

struct BatchStats {
  double mean_nll = 0.0;
  std::size_t counted = 0;  // sequences with at least one taggable position
};

// Mean NLL over one batch plus gradients, reduced in batch order.
inline BatchStats batch_gradients(const Model& model,
                                  const std::vector<const detail::PreparedExample*>& batch,
                                  const TransitionMask& mask, int threads,
                                  Gradients& grads) {
  std::vector<const detail::PreparedExample*> usable;
  for (const auto* ex : batch) {
    if (ex->input.n_taggable() > 0) usable.push_back(ex);
  }
  if (usable.empty()) return {};

  // Per-sequence partials reduced in batch order keep the result
  // bit-identical at any thread count.
  double total_nll = 0.0;
  if (threads <= 1 || usable.size() == 1) {
    for (const auto* ex : usable) {
      Gradients partial = Gradients::zeros_like(model);
      total_nll += detail::sequence_backward(model, *ex, mask, partial);
      detail::add_scaled(grads, partial, 1.0);
    }
  } else {
    const std::size_t n_workers = std::min<std::size_t>(
        static_cast<std::size_t>(threads), usable.size());
    std::vector<std::unique_ptr<Gradients>> partials(usable.size());
    std::vector<double> nlls(usable.size(), 0.0);
    std::vector<std::exception_ptr> errors(n_workers);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < usable.size(); i += n_workers) {
            partials[i] = std::make_unique<Gradients>(Gradients::zeros_like(model));
            nlls[i] = detail::sequence_backward(model, *usable[i], mask, *partials[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& worker : workers) worker.join();
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
    for (std::size_t i = 0; i < usable.size(); ++i) {
      detail::add_scaled(grads, *partials[i], 1.0);
      total_nll += nlls[i];
    }
  }

  const double inv = 1.0 / static_cast<double>(usable.size());
  detail::scale_params(grads, inv);
  return {total_nll * inv, usable.size()};
}

inline TrainResult train(const std::vector<Record>& records, const RunConfig& config,
                         const Tagset& tagset, const Vocab& vocab) {
  config.train.validate();
  config.encoder.validate();
  if (records.empty()) throw DataError("training set is empty");

  Model model = Model::init(vocab, tagset, config.encoder, config.crf_mode,
                            config.train.seed);
  const std::vector<detail::PreparedExample> examples =
      detail::prepare_examples(records, model);

  const TransitionMask mask = config.constrained_train
                                  ? TransitionMask::bio(model.tagset)
                                  : TransitionMask::none(model.tagset.size());

  TrainState state(std::move(model));
  state.shuffle_rng.seed(config.train.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
    shuffle_in_place(order, state.shuffle_rng);
    double epoch_nll = 0.0;
    std::size_t counted = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.train.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(config.train.batch_size));
      std::vector<const detail::PreparedExample*> batch;
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(&examples[order[i]]);
      }
      Gradients grads = Gradients::zeros_like(state.model);
      const BatchStats stats =
          batch_gradients(state.model, batch, mask, config.threads, grads);
      if (stats.counted == 0) continue;
      adam_step(state, grads, config.train);
      epoch_nll += stats.mean_nll * static_cast<double>(stats.counted);
      counted += stats.counted;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_nll = counted > 0 ? epoch_nll / static_cast<double>(counted) : 0.0;
    stats.l2_term = l2_penalty(state.model, config.train.l2_coeff);
    result.trace.push_back(stats);
    log::debug("epoch " + std::to_string(epoch) + " mean_nll " +
               std::to_string(stats.mean_nll));
  }
  result.model = std::move(state.model);
  return result;
}

struct FoldPredictions {
  int fold_id = 0;
  std::vector<std::vector<Span>> spans;  // one entry per record, in input order
};

struct CvResult {
  std::vector<FoldSplit> folds;
  std::vector<Model> models;
  std::vector<std::vector<EpochStats>> traces;
  // Each fold model's predictions on every record (for ensemble stacking).
  std::vector<FoldPredictions> full_predictions;
  // For each record, the prediction of the one fold that held it out.
  std::vector<std::vector<Span>> out_of_fold;
  std::vector<Metrics> fold_metrics;  // on each fold's validation split
};

inline CvResult cross_validate(const std::vector<Record>& records, int k,
                               const RunConfig& config, const Tagset& tagset,
                               const Vocab& vocab) {
  CvResult result;
  result.folds = kfold_split(records, k, config.train.seed);
  result.out_of_fold.resize(records.size());

  for (int f = 0; f < k; ++f) {
    const FoldSplit& fold = result.folds[static_cast<std::size_t>(f)];
    std::vector<Record> train_records;
    train_records.reserve(fold.train.size());
    for (int idx : fold.train) {
      train_records.push_back(records[static_cast<std::size_t>(idx)]);
    }
    RunConfig fold_config = config;
    fold_config.train.seed = config.train.seed + static_cast<std::uint64_t>(f);
    log::info("fold " + std::to_string(f) + ": training on " +
              std::to_string(train_records.size()) + " records");
    TrainResult trained = train(train_records, fold_config, tagset, vocab);

    FoldPredictions preds;
    preds.fold_id = f;
    preds.spans.reserve(records.size());
    for (const Record& record : records) {
      preds.spans.push_back(predict_spans(trained.model, record));
    }

    MatchCounts counts;
    for (int idx : fold.valid) {
      const auto& pred = preds.spans[static_cast<std::size_t>(idx)];
      const auto& gold = records[static_cast<std::size_t>(idx)].gold_spans;
      counts.correct += match_spans(pred, gold);
      counts.predicted += static_cast<int>(pred.size());
      counts.gold += static_cast<int>(gold.size());
      result.out_of_fold[static_cast<std::size_t>(idx)] = pred;
    }
    result.fold_metrics.push_back(compute_metrics(counts));
    log::info("fold " + std::to_string(f) + ": validation f1 " +
              std::to_string(result.fold_metrics.back().f1));

    result.full_predictions.push_back(std::move(preds));
    result.traces.push_back(std::move(trained.trace));
    result.models.push_back(std::move(trained.model));
  }
  return result;
}

}  // namespace spancrf
