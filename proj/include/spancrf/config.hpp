// Run configuration: training hyperparameters, encoder dimensions and CRF
// flags, with a small key = value file format (# comments, optional quoted
// strings). Unknown keys are rejected so typos fail loudly.
#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "spancrf/crf.hpp"
#include "spancrf/encoder.hpp"
#include "spancrf/errors.hpp"

namespace spancrf {

struct TrainConfig {
  double base_lr = 2e-5;
  int batch_size = 12;
  double l2_coeff = 1e-5;
  double crf_lr_multiplier = 1000.0;
  int epochs = 30;
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    if (base_lr <= 0 || batch_size < 1 || l2_coeff < 0 || crf_lr_multiplier <= 0 ||
        epochs < 0 || adam_beta1 <= 0 || adam_beta1 >= 1 || adam_beta2 <= 0 ||
        adam_beta2 >= 1 || adam_epsilon <= 0) {
      throw DataError("invalid training configuration value");
    }
  }
};

struct RunConfig {
  TrainConfig train;
  EncoderConfig encoder;
  CrfMode crf_mode = CrfMode::kLiteral;
  bool constrained_train = false;
  int threads = 1;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw DataError("config key " + key + ": expected true or false, got " + s);
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& raw_value) {
  const std::string value = detail::unquote(raw_value);
  try {
    if (key == "base_lr") cfg.train.base_lr = std::stod(value);
    else if (key == "batch_size") cfg.train.batch_size = std::stoi(value);
    else if (key == "l2_coeff") cfg.train.l2_coeff = std::stod(value);
    else if (key == "crf_lr_multiplier") cfg.train.crf_lr_multiplier = std::stod(value);
    else if (key == "epochs") cfg.train.epochs = std::stoi(value);
    else if (key == "seed") cfg.train.seed = std::stoull(value);
    else if (key == "adam_beta1") cfg.train.adam_beta1 = std::stod(value);
    else if (key == "adam_beta2") cfg.train.adam_beta2 = std::stod(value);
    else if (key == "adam_epsilon") cfg.train.adam_epsilon = std::stod(value);
    else if (key == "d_model") cfg.encoder.d_model = std::stoi(value);
    else if (key == "n_layers") cfg.encoder.n_layers = std::stoi(value);
    else if (key == "n_heads") cfg.encoder.n_heads = std::stoi(value);
    else if (key == "d_ff") cfg.encoder.d_ff = std::stoi(value);
    else if (key == "max_len") cfg.encoder.max_len = std::stoi(value);
    else if (key == "d_feat") cfg.encoder.d_feat = std::stoi(value);
    else if (key == "crf_mode") cfg.crf_mode = parse_crf_mode(value);
    else if (key == "constrained_train") cfg.constrained_train = detail::parse_bool(value, key);
    else if (key == "threads") cfg.threads = std::stoi(value);
    else throw DataError("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw DataError("config key " + key + ": cannot parse value " + value);
  } catch (const std::out_of_range&) {
    throw DataError("config key " + key + ": value out of range: " + value);
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      apply_config_entry(cfg, key, value);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.train.validate();
  cfg.encoder.validate();
  return cfg;
}

}  // namespace spancrf
