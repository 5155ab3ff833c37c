#pragma once

// Question records, one JSON object per line:
//   {"id", "question", "choices": [...], "gold_idx", "gold_chain"?: [...], "hyp_amrs": [...]}

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgr/errors.hpp"
#include "cgr/io.hpp"
#include "cgr/semgraph.hpp"

namespace cgr {

struct QaInstance {
  std::string id;
  std::string question;
  std::vector<std::string> choices;
  std::size_t gold_idx = 0;
  std::optional<std::vector<FactId>> gold_chain;
  std::vector<std::string> hyp_amrs;  // PENMAN, one per choice
};

inline void validate(const QaInstance& q) {
  if (q.choices.size() < 2) throw DataError("question needs at least two choices", q.id);
  if (q.gold_idx >= q.choices.size()) throw DataError("gold_idx out of range", q.id);
  if (q.hyp_amrs.size() != q.choices.size()) throw DataError("one hypothesis AMR per choice is required", q.id);
  if (q.question.empty()) throw DataError("empty question", q.id);
}

inline nlohmann::json to_json(const QaInstance& q) {
  nlohmann::json j{{"id", q.id},
                   {"question", q.question},
                   {"choices", q.choices},
                   {"gold_idx", q.gold_idx},
                   {"hyp_amrs", q.hyp_amrs}};
  if (q.gold_chain) j["gold_chain"] = *q.gold_chain;
  return j;
}

inline std::vector<QaInstance> parse_dataset_jsonl(std::string_view content) {
  std::vector<QaInstance> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(content)) {
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    QaInstance q;
    try {
      auto j = nlohmann::json::parse(line);
      q.id = j.at("id").get<std::string>();
      q.question = j.at("question").get<std::string>();
      q.choices = j.at("choices").get<std::vector<std::string>>();
      q.gold_idx = j.at("gold_idx").get<std::size_t>();
      if (j.contains("gold_chain") && !j["gold_chain"].is_null()) {
        q.gold_chain = j["gold_chain"].get<std::vector<std::string>>();
      }
      q.hyp_amrs = j.at("hyp_amrs").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed dataset record: ") + e.what(), "line " + std::to_string(line_no));
    }
    validate(q);
    out.push_back(std::move(q));
  }
  return out;
}

inline std::string dataset_to_jsonl(const std::vector<QaInstance>& qs) {
  std::string out;
  for (const auto& q : qs) out += to_json(q).dump() + "\n";
  return out;
}

inline std::vector<QaInstance> read_dataset(const std::filesystem::path& path) {
  return parse_dataset_jsonl(read_file(path));
}

}  // namespace cgr
