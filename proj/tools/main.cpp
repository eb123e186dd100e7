// spancrf command line: train / predict / evaluate / cv / ensemble.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spancrf/config.hpp"
#include "spancrf/corpus.hpp"
#include "spancrf/ensemble.hpp"
#include "spancrf/evaluation.hpp"
#include "spancrf/jsonl_io.hpp"
#include "spancrf/logging.hpp"
#include "spancrf/model.hpp"
#include "spancrf/serialize.hpp"
#include "spancrf/training.hpp"

namespace {

namespace fs = std::filesystem;
using namespace spancrf;

struct CommonArgs {
  std::string data_path;
  std::string config_path;
  std::string out_path;
  std::string model_path;
  std::string subject_field = "subject";
  bool keep_first_overlap = false;
  std::string crf_mode;
  bool constrained_train = false;
  int folds = 5;
  int threshold = 3;
  bool boundary_only = false;
  int threads = 0;  // 0: keep config value
  std::optional<std::uint64_t> seed;
};

RunConfig resolve_config(const CommonArgs& args, bool crf_mode_set,
                         bool constrained_set) {
  RunConfig config;
  if (!args.config_path.empty()) config = load_run_config(args.config_path);
  if (args.seed.has_value()) config.train.seed = *args.seed;
  if (crf_mode_set) config.crf_mode = parse_crf_mode(args.crf_mode);
  if (constrained_set) config.constrained_train = true;
  if (args.threads > 0) config.threads = args.threads;
  config.train.validate();
  config.encoder.validate();
  return config;
}

std::vector<Record> load_records(const CommonArgs& args) {
  LoadOptions options;
  options.subject_field = args.subject_field;
  options.keep_first_overlap = args.keep_first_overlap;
  return load_dataset(args.data_path, options);
}

int run_train(const CommonArgs& args, bool crf_mode_set, bool constrained_set) {
  const RunConfig config = resolve_config(args, crf_mode_set, constrained_set);
  const std::vector<Record> records = load_records(args);
  const Vocab vocab = build_vocab(records);
  const Tagset tagset = default_tagset();
  log::info("training on " + std::to_string(records.size()) + " records, vocab size " +
            std::to_string(vocab.size()));
  TrainResult result = train(records, config, tagset, vocab);
  for (const EpochStats& stats : result.trace) {
    nlohmann::json line{{"epoch", stats.epoch},
                        {"mean_nll", stats.mean_nll},
                        {"l2_term", stats.l2_term}};
    std::cout << line.dump() << "\n";
  }
  save_model(result.model, config, args.out_path);
  log::info("wrote model to " + args.out_path);
  return 0;
}

int run_predict(const CommonArgs& args) {
  ModelArtifact artifact = load_model(args.model_path);
  const std::vector<Record> records = load_records(args);
  std::vector<std::vector<Span>> spans;
  spans.reserve(records.size());
  for (const Record& record : records) {
    spans.push_back(predict_spans(artifact.model, record));
  }
  write_predictions(args.out_path, records, spans);
  log::info("wrote predictions for " + std::to_string(records.size()) + " records to " +
            args.out_path);
  return 0;
}

int run_evaluate(const CommonArgs& args, const std::string& pred_path,
                 const std::string& gold_path) {
  LoadOptions options;
  options.subject_field = args.subject_field;
  options.keep_first_overlap = args.keep_first_overlap;
  const std::vector<Record> gold_records = load_dataset(gold_path, options);
  const auto predictions = read_predictions(pred_path);

  std::set<std::string> gold_ids;
  for (const Record& record : gold_records) gold_ids.insert(record.id);
  for (const auto& [id, _] : predictions) {
    if (!gold_ids.count(id)) {
      throw DataError("prediction references unknown record id: " + id);
    }
  }

  MatchCounts counts;
  for (const Record& record : gold_records) {
    auto it = predictions.find(record.id);
    static const std::vector<Span> kEmpty;
    const std::vector<Span>& pred = it == predictions.end() ? kEmpty : it->second;
    if (it == predictions.end()) {
      log::warn("no prediction for record " + record.id + "; scoring as empty");
    }
    counts += count_matches(pred, record.gold_spans, args.boundary_only);
  }
  std::cout << metrics_to_json(compute_metrics(counts)).dump() << "\n";
  return 0;
}

int run_cv(const CommonArgs& args, bool crf_mode_set, bool constrained_set) {
  const RunConfig config = resolve_config(args, crf_mode_set, constrained_set);
  const std::vector<Record> records = load_records(args);
  const Vocab vocab = build_vocab(records);
  const Tagset tagset = default_tagset();

  fs::create_directories(args.out_path);
  CvResult result = cross_validate(records, args.folds, config, tagset, vocab);

  MatchCounts oof_counts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    oof_counts += count_matches(result.out_of_fold[i], records[i].gold_spans);
  }
  for (int f = 0; f < args.folds; ++f) {
    const fs::path model_path = fs::path(args.out_path) / ("fold_" + std::to_string(f) + ".model.bin");
    const fs::path pred_path = fs::path(args.out_path) / ("fold_" + std::to_string(f) + ".pred.jsonl");
    save_model(result.models[static_cast<std::size_t>(f)], config, model_path.string());
    write_fold_predictions(pred_path.string(), records, f,
                           result.full_predictions[static_cast<std::size_t>(f)].spans);
    nlohmann::json line{
        {"fold", f},
        {"metrics", metrics_to_json(result.fold_metrics[static_cast<std::size_t>(f)])}};
    std::cout << line.dump() << "\n";
  }
  const fs::path oof_path = fs::path(args.out_path) / "oof.pred.jsonl";
  write_predictions(oof_path.string(), records, result.out_of_fold);
  nlohmann::json oof_line{{"oof_metrics", metrics_to_json(compute_metrics(oof_counts))}};
  std::cout << oof_line.dump() << "\n";
  log::info("wrote cv outputs to " + args.out_path);
  return 0;
}

int run_ensemble(const CommonArgs& args, const std::vector<std::string>& pred_paths) {
  const std::vector<Record> records = load_records(args);
  if (pred_paths.empty()) throw DataError("ensemble needs at least one --pred file");
  std::vector<std::map<std::string, std::vector<Span>>> folds;
  folds.reserve(pred_paths.size());
  for (const std::string& path : pred_paths) folds.push_back(read_predictions(path));

  std::vector<std::vector<Span>> final_spans;
  final_spans.reserve(records.size());
  for (const Record& record : records) {
    const int text_len = static_cast<int>(utf8_length(record.text));
    std::vector<std::vector<Span>> fold_spans;
    fold_spans.reserve(folds.size());
    for (const auto& fold : folds) {
      auto it = fold.find(record.id);
      fold_spans.push_back(it == fold.end() ? std::vector<Span>{} : it->second);
    }
    final_spans.push_back(ensemble_record(fold_spans, text_len, args.threshold));
  }
  write_predictions(args.out_path, records, final_spans);
  log::info("wrote ensemble predictions to " + args.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spancrf: event-cause span tagging with a transformer + linear-chain CRF"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string pred_path, gold_path;
  std::vector<std::string> pred_paths;

  auto add_data_flags = [&](CLI::App* cmd) {
    cmd->add_option("--data", args.data_path, "dataset JSONL file")->required();
    cmd->add_option("--subject-field", args.subject_field, "JSON field holding the subject");
    cmd->add_flag("--keep-first-overlap", args.keep_first_overlap,
                  "keep the earlier span on gold overlap instead of failing");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_data_flags(train_cmd);
  train_cmd->add_option("--config", args.config_path, "run config file");
  train_cmd->add_option("--out", args.out_path, "output model file")->required();
  auto* train_seed = train_cmd->add_option("--seed", "override config seed");
  auto* train_mode = train_cmd->add_option("--crf-mode", args.crf_mode, "literal or factorized")
                         ->check(CLI::IsMember({"literal", "factorized"}));
  auto* train_constrained =
      train_cmd->add_flag("--constrained-train", "apply the BIO mask during training");
  train_cmd->add_option("--threads", args.threads, "worker threads (default 1)");

  CLI::App* predict_cmd = app.add_subcommand("predict", "predict spans with a model");
  add_data_flags(predict_cmd);
  predict_cmd->add_option("--model", args.model_path, "model file")->required();
  predict_cmd->add_option("--out", args.out_path, "output prediction JSONL")->required();

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score predictions against gold");
  eval_cmd->add_option("--pred", pred_path, "prediction JSONL")->required();
  eval_cmd->add_option("--gold", gold_path, "gold dataset JSONL")->required();
  eval_cmd->add_option("--subject-field", args.subject_field, "JSON field holding the subject");
  eval_cmd->add_flag("--keep-first-overlap", args.keep_first_overlap,
                     "keep the earlier span on gold overlap instead of failing");
  eval_cmd->add_flag("--boundary-only", args.boundary_only,
                     "match on boundaries only, ignoring event types");

  CLI::App* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
  add_data_flags(cv_cmd);
  cv_cmd->add_option("--config", args.config_path, "run config file");
  cv_cmd->add_option("--out", args.out_path, "output directory")->required();
  cv_cmd->add_option("--folds", args.folds, "number of folds")->check(CLI::PositiveNumber);
  auto* cv_seed = cv_cmd->add_option("--seed", "override config seed");
  auto* cv_mode = cv_cmd->add_option("--crf-mode", args.crf_mode, "literal or factorized")
                      ->check(CLI::IsMember({"literal", "factorized"}));
  auto* cv_constrained =
      cv_cmd->add_flag("--constrained-train", "apply the BIO mask during training");
  cv_cmd->add_option("--threads", args.threads, "worker threads (default 1)");

  CLI::App* ens_cmd = app.add_subcommand("ensemble", "stack fold predictions");
  add_data_flags(ens_cmd);
  ens_cmd->add_option("--pred", pred_paths, "fold prediction JSONL files (one per fold)")
      ->required();
  ens_cmd->add_option("--threshold", args.threshold,
                      "minimum number of folds marking a position")
      ->check(CLI::PositiveNumber);
  ens_cmd->add_option("--out", args.out_path, "output prediction JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (train_cmd->parsed()) {
      if (train_seed->count() > 0) args.seed = train_seed->as<std::uint64_t>();
      return run_train(args, train_mode->count() > 0, train_constrained->count() > 0);
    }
    if (predict_cmd->parsed()) return run_predict(args);
    if (eval_cmd->parsed()) return run_evaluate(args, pred_path, gold_path);
    if (cv_cmd->parsed()) {
      if (cv_seed->count() > 0) args.seed = cv_seed->as<std::uint64_t>();
      return run_cv(args, cv_mode->count() > 0, cv_constrained->count() > 0);
    }
    if (ens_cmd->parsed()) return run_ensemble(args, pred_paths);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
