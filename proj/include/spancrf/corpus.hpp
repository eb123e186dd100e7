// Dataset ingestion (JSONL), the leading-id preprocessing rule, k-fold
// partitioning and model-input construction.
#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "spancrf/errors.hpp"
#include "spancrf/logging.hpp"
#include "spancrf/rng.hpp"
#include "spancrf/types.hpp"
#include "spancrf/utf8.hpp"
#include "spancrf/vocab.hpp"

namespace spancrf {

// Drops a numeric id prefix like "68771," from a content line; anything else
// passes through unchanged.
inline std::string strip_leading_id(const std::string& raw) {
  std::size_t i = 0;
  while (i < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i]))) ++i;
  if (i == 0 || i >= raw.size() || raw[i] != ',') return raw;
  return raw.substr(i + 1);
}

struct LoadOptions {
  std::string subject_field = "subject";
  // Downgrades overlapping gold spans from an error to a warning, keeping the
  // earlier-starting span.
  bool keep_first_overlap = false;
};

namespace detail {

inline void validate_spans(Record& record, bool keep_first_overlap) {
  const int text_len = static_cast<int>(utf8_length(record.text));
  for (const Span& span : record.gold_spans) {
    if (span.start < 0 || span.start >= span.end || span.end > text_len) {
      throw DataError("record " + record.id + ": span [" +
                      std::to_string(span.start) + ", " + std::to_string(span.end) +
                      ") out of bounds for text of length " + std::to_string(text_len));
    }
  }
  std::stable_sort(record.gold_spans.begin(), record.gold_spans.end(),
                   [](const Span& a, const Span& b) { return a.start < b.start; });
  std::vector<Span> kept;
  for (const Span& span : record.gold_spans) {
    if (!kept.empty() && span.start < kept.back().end) {
      if (!keep_first_overlap) {
        throw DataError("record " + record.id + ": overlapping gold spans at position " +
                        std::to_string(span.start));
      }
      log::warn("record " + record.id + ": dropping overlapping gold span at position " +
                std::to_string(span.start));
      continue;
    }
    kept.push_back(span);
  }
  record.gold_spans = std::move(kept);
}

}  // namespace detail

inline Record record_from_json(const nlohmann::json& obj, const LoadOptions& options) {
  Record record;
  record.id = obj.at("id").is_string() ? obj.at("id").get<std::string>()
                                       : obj.at("id").dump();
  record.subject = obj.value(options.subject_field, std::string());
  record.text = strip_leading_id(obj.at("text").get<std::string>());
  if (obj.contains("spans")) {
    for (const auto& span_obj : obj.at("spans")) {
      Span span;
      span.event_type = parse_event_type(span_obj.at("event_type").get<std::string>());
      span.start = span_obj.at("start").get<int>();
      span.end = span_obj.at("end").get<int>();
      record.gold_spans.push_back(span);
    }
  }
  detail::validate_spans(record, options.keep_first_overlap);
  return record;
}

inline std::vector<Record> load_dataset(const std::string& path,
                                        const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::vector<Record> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
      records.push_back(record_from_json(obj, options));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

struct FoldSplit {
  std::vector<int> train;  // sorted record indices
  std::vector<int> valid;
};

inline std::vector<FoldSplit> kfold_split(int n_records, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("k-fold split needs k >= 2");
  if (k > n_records) {
    throw DataError("k-fold split with k=" + std::to_string(k) + " but only " +
                    std::to_string(n_records) + " records");
  }
  std::vector<int> order(static_cast<std::size_t>(n_records));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle_in_place(order, rng);

  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  const int base = n_records / k;
  const int remainder = n_records % k;
  int cursor = 0;
  for (int f = 0; f < k; ++f) {
    const int take = base + (f < remainder ? 1 : 0);
    auto& fold = folds[static_cast<std::size_t>(f)];
    fold.valid.assign(order.begin() + cursor, order.begin() + cursor + take);
    cursor += take;
    std::sort(fold.valid.begin(), fold.valid.end());
  }
  for (int f = 0; f < k; ++f) {
    auto& fold = folds[static_cast<std::size_t>(f)];
    for (int g = 0; g < k; ++g) {
      if (g == f) continue;
      const auto& other = folds[static_cast<std::size_t>(g)].valid;
      fold.train.insert(fold.train.end(), other.begin(), other.end());
    }
    std::sort(fold.train.begin(), fold.train.end());
  }
  return folds;
}

inline std::vector<FoldSplit> kfold_split(const std::vector<Record>& records, int k,
                                          std::uint64_t seed) {
  return kfold_split(static_cast<int>(records.size()), k, seed);
}

// Encoder input: [CLS] subject [SEP] text [SEP] as vocab ids.
// taggable is true exactly on the (possibly truncated) text positions.
struct ModelInput {
  std::vector<int> tokens;
  int text_offset = 0;
  std::vector<std::uint8_t> taggable;

  int n_taggable() const {
    int n = 0;
    for (std::uint8_t t : taggable) n += t;
    return n;
  }
};

inline ModelInput build_input(const std::string& subject, const std::string& text,
                              const Vocab& vocab, int max_len) {
  const std::u32string subject_chars = utf8_decode(subject);
  const std::u32string text_chars = utf8_decode(text);
  const int subject_len = static_cast<int>(subject_chars.size());
  if (subject_len > max_len - 3) {
    throw DataError("subject of length " + std::to_string(subject_len) +
                    " does not fit max_len " + std::to_string(max_len));
  }
  const int room = max_len - subject_len - 3;
  const int text_kept = std::min<int>(static_cast<int>(text_chars.size()), room);

  ModelInput input;
  input.tokens.reserve(static_cast<std::size_t>(subject_len + text_kept + 3));
  input.tokens.push_back(Vocab::kCls);
  for (char32_t c : subject_chars) input.tokens.push_back(vocab.id_of(c));
  input.tokens.push_back(Vocab::kSep);
  input.text_offset = static_cast<int>(input.tokens.size());
  for (int i = 0; i < text_kept; ++i) {
    input.tokens.push_back(vocab.id_of(text_chars[static_cast<std::size_t>(i)]));
  }
  input.tokens.push_back(Vocab::kSep);

  input.taggable.assign(input.tokens.size(), 0);
  for (int i = 0; i < text_kept; ++i) {
    input.taggable[static_cast<std::size_t>(input.text_offset + i)] = 1;
  }
  return input;
}

}  // namespace spancrf
