// JSONL readers/writers for datasets, prediction files, fold prediction
// files and the metrics object. Keys are emitted in sorted order so output
// files are byte-stable.
#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "spancrf/errors.hpp"
#include "spancrf/evaluation.hpp"
#include "spancrf/types.hpp"

namespace spancrf {

inline nlohmann::json span_to_json(const Span& span) {
  return nlohmann::json{{"event_type", event_type_name(span.event_type)},
                        {"start", span.start},
                        {"end", span.end}};
}

inline nlohmann::json spans_to_json(const std::vector<Span>& spans) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Span& span : spans) arr.push_back(span_to_json(span));
  return arr;
}

inline Span span_from_json(const nlohmann::json& obj) {
  Span span;
  span.event_type = parse_event_type(obj.at("event_type").get<std::string>());
  span.start = obj.at("start").get<int>();
  span.end = obj.at("end").get<int>();
  return span;
}

inline void write_dataset(const std::string& path, const std::vector<Record>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  for (const Record& record : records) {
    nlohmann::json obj{{"id", record.id},
                       {"subject", record.subject},
                       {"text", record.text},
                       {"spans", spans_to_json(record.gold_spans)}};
    out << obj.dump() << "\n";
  }
}

inline void write_predictions(const std::string& path,
                              const std::vector<Record>& records,
                              const std::vector<std::vector<Span>>& spans) {
  if (records.size() != spans.size()) {
    throw DataError("prediction count does not match record count");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  for (std::size_t i = 0; i < records.size(); ++i) {
    nlohmann::json obj{{"id", records[i].id}, {"spans", spans_to_json(spans[i])}};
    out << obj.dump() << "\n";
  }
}

inline void write_fold_predictions(const std::string& path,
                                   const std::vector<Record>& records, int fold_id,
                                   const std::vector<std::vector<Span>>& spans) {
  if (records.size() != spans.size()) {
    throw DataError("prediction count does not match record count");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  for (std::size_t i = 0; i < records.size(); ++i) {
    nlohmann::json obj{{"record_id", records[i].id},
                       {"fold_id", fold_id},
                       {"spans", spans_to_json(spans[i])}};
    out << obj.dump() << "\n";
  }
}

// Reads a prediction file keyed by "id" or "record_id".
inline std::map<std::string, std::vector<Span>> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prediction file: " + path);
  std::map<std::string, std::vector<Span>> result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json obj = nlohmann::json::parse(line);
      const std::string id = obj.contains("record_id")
                                 ? obj.at("record_id").get<std::string>()
                                 : obj.at("id").get<std::string>();
      std::vector<Span> spans;
      for (const auto& s : obj.at("spans")) spans.push_back(span_from_json(s));
      result[id] = std::move(spans);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return result;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
  return nlohmann::json{{"precision", m.precision}, {"recall", m.recall},
                        {"f1", m.f1},               {"correct", m.correct},
                        {"predicted", m.predicted}, {"gold", m.gold}};
}

}  // namespace spancrf
