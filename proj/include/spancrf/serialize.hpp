// Model artifact file: an 8-byte magic, a length-prefixed JSON header
// (format version, vocabulary, tagset, configuration and tensor shapes)
// followed by one length-prefixed little-endian float64 payload per tensor,
// in header order and column-major element layout. The file is
// self-describing and loads without the original config file.
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spancrf/config.hpp"
#include "spancrf/model.hpp"

namespace spancrf {

inline constexpr int kModelFormatVersion = 1;
inline constexpr char kModelMagic[9] = "SPANCRFB";  // 8 bytes on disk

struct ModelArtifact {
  Model model;
  RunConfig config;
};

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  char bytes[8];
  if (!in.read(bytes, 8)) throw DataError("truncated model file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return v;
}

inline void write_f64_payload(std::ostream& out, const double* data, Eigen::Index n) {
  std::vector<char> buf(static_cast<std::size_t>(n) * 8);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b) {
      buf[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)] =
          static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void read_f64_payload(std::istream& in, double* data, Eigen::Index n) {
  std::vector<char> buf(static_cast<std::size_t>(n) * 8);
  if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
    throw DataError("truncated model file");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(
                  buf[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)]))
              << (8 * b);
    }
    data[i] = std::bit_cast<double>(bits);
  }
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  return nlohmann::json{
      {"base_lr", cfg.train.base_lr},
      {"batch_size", cfg.train.batch_size},
      {"l2_coeff", cfg.train.l2_coeff},
      {"crf_lr_multiplier", cfg.train.crf_lr_multiplier},
      {"epochs", cfg.train.epochs},
      {"seed", cfg.train.seed},
      {"adam_beta1", cfg.train.adam_beta1},
      {"adam_beta2", cfg.train.adam_beta2},
      {"adam_epsilon", cfg.train.adam_epsilon},
      {"d_model", cfg.encoder.d_model},
      {"n_layers", cfg.encoder.n_layers},
      {"n_heads", cfg.encoder.n_heads},
      {"d_ff", cfg.encoder.d_ff},
      {"max_len", cfg.encoder.max_len},
      {"d_feat", cfg.encoder.d_feat},
      {"crf_mode", crf_mode_name(cfg.crf_mode)},
      {"constrained_train", cfg.constrained_train},
      {"threads", cfg.threads},
  };
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.train.base_lr = j.at("base_lr").get<double>();
  cfg.train.batch_size = j.at("batch_size").get<int>();
  cfg.train.l2_coeff = j.at("l2_coeff").get<double>();
  cfg.train.crf_lr_multiplier = j.at("crf_lr_multiplier").get<double>();
  cfg.train.epochs = j.at("epochs").get<int>();
  cfg.train.seed = j.at("seed").get<std::uint64_t>();
  cfg.train.adam_beta1 = j.at("adam_beta1").get<double>();
  cfg.train.adam_beta2 = j.at("adam_beta2").get<double>();
  cfg.train.adam_epsilon = j.at("adam_epsilon").get<double>();
  cfg.encoder.d_model = j.at("d_model").get<int>();
  cfg.encoder.n_layers = j.at("n_layers").get<int>();
  cfg.encoder.n_heads = j.at("n_heads").get<int>();
  cfg.encoder.d_ff = j.at("d_ff").get<int>();
  cfg.encoder.max_len = j.at("max_len").get<int>();
  cfg.encoder.d_feat = j.value("d_feat", 0);
  cfg.crf_mode = parse_crf_mode(j.at("crf_mode").get<std::string>());
  cfg.constrained_train = j.at("constrained_train").get<bool>();
  cfg.threads = j.value("threads", 1);
  return cfg;
}

}  // namespace detail

inline void save_model(Model& model, const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open model file for writing: " + path);

  const std::vector<ParamRef> refs = model.param_refs();

  nlohmann::json header;
  header["format_version"] = kModelFormatVersion;
  header["layout"] = "col_major";
  nlohmann::json vocab_chars = nlohmann::json::array();
  for (char32_t c : model.vocab.chars()) {
    vocab_chars.push_back(static_cast<std::uint32_t>(c));
  }
  header["vocab"] = std::move(vocab_chars);
  nlohmann::json types = nlohmann::json::array();
  for (EventType t : model.tagset.event_types()) types.push_back(event_type_name(t));
  header["event_types"] = std::move(types);
  nlohmann::json labels = nlohmann::json::array();
  for (int l = 0; l < model.tagset.size(); ++l) labels.push_back(model.tagset.label_name(l));
  header["labels"] = std::move(labels);
  header["config"] = detail::run_config_to_json(config);
  nlohmann::json tensors = nlohmann::json::array();
  for (const ParamRef& ref : refs) {
    tensors.push_back(nlohmann::json{
        {"name", ref.name}, {"rows", ref.rows}, {"cols", ref.cols}});
  }
  header["tensors"] = std::move(tensors);

  const std::string header_bytes = header.dump();
  out.write(kModelMagic, 8);
  detail::write_u64(out, header_bytes.size());
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  for (const ParamRef& ref : refs) {
    detail::write_u64(out, static_cast<std::uint64_t>(ref.size) * 8);
    detail::write_f64_payload(out, ref.data, ref.size);
  }
  if (!out) throw DataError("failed writing model file: " + path);
}

inline ModelArtifact load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);

  char magic[8];
  if (!in.read(magic, 8) || std::string(magic, 8) != std::string(kModelMagic, 8)) {
    throw DataError("not a model file (bad magic): " + path);
  }
  const std::uint64_t header_len = detail::read_u64(in);
  if (header_len > (1ULL << 30)) throw DataError("model header length is implausible");
  std::string header_bytes(header_len, '\0');
  if (!in.read(header_bytes.data(), static_cast<std::streamsize>(header_len))) {
    throw DataError("truncated model file");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt model header: ") + e.what());
  }

  const int version = header.at("format_version").get<int>();
  if (version > kModelFormatVersion) {
    throw DataError("model format version " + std::to_string(version) +
                    " is newer than supported version " +
                    std::to_string(kModelFormatVersion));
  }
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version));
  }

  ModelArtifact artifact;
  artifact.config = detail::run_config_from_json(header.at("config"));

  std::vector<char32_t> chars;
  for (const auto& c : header.at("vocab")) {
    chars.push_back(static_cast<char32_t>(c.get<std::uint32_t>()));
  }
  for (std::size_t i = 1; i < chars.size(); ++i) {
    if (chars[i - 1] >= chars[i]) throw DataError("model vocabulary is not sorted");
  }
  std::vector<EventType> types;
  for (const auto& name : header.at("event_types")) {
    types.push_back(parse_event_type(name.get<std::string>()));
  }

  Model& model = artifact.model;
  model.vocab = Vocab(std::move(chars));
  model.tagset = build_tagset(types);
  model.encoder_config = artifact.config.encoder;
  model.crf_mode = artifact.config.crf_mode;
  const int num_labels = model.tagset.size();
  model.encoder = EncoderParams::zeros(
      model.encoder_config, model.vocab.size(),
      encoder_proj_dim(model.encoder_config, model.crf_mode, num_labels));
  model.crf = model.crf_mode == CrfMode::kLiteral
                  ? CrfParams::literal(num_labels, model.encoder_config.feature_dim())
                  : CrfParams::factorized(num_labels);

  const std::vector<ParamRef> refs = model.param_refs();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != refs.size()) {
    throw DataError("model tensor list does not match expected parameters");
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != refs[i].name ||
        t.at("rows").get<Eigen::Index>() != refs[i].rows ||
        t.at("cols").get<Eigen::Index>() != refs[i].cols) {
      throw DataError("model tensor " + refs[i].name + " has unexpected shape");
    }
    const std::uint64_t payload = detail::read_u64(in);
    if (payload != static_cast<std::uint64_t>(refs[i].size) * 8) {
      throw DataError("model tensor " + refs[i].name + " has unexpected payload size");
    }
    detail::read_f64_payload(in, refs[i].data, refs[i].size);
  }
  return artifact;
}

}  // namespace spancrf
