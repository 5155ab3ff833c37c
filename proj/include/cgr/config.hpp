#pragma once

// Training configuration. The file form is flat `key = value` lines; `#`
// starts a comment. Unknown keys are rejected so typos do not pass silently.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "cgr/errors.hpp"
#include "cgr/io.hpp"
#include "cgr/retriever.hpp"

namespace cgr {

enum class TrainMode { supervised_distant, distant_only };

inline const char* to_string(TrainMode m) {
  return m == TrainMode::supervised_distant ? "supervised+distant" : "distant-only";
}

inline TrainMode parse_mode(const std::string& s) {
  if (s == "supervised+distant") return TrainMode::supervised_distant;
  if (s == "distant-only") return TrainMode::distant_only;
  throw ConfigError("mode must be supervised+distant or distant-only", s);
}

struct TrainConfig {
  // retrieval
  std::size_t k_beam = 10;
  std::size_t t_max = 2;
  BeamRanking ranking = BeamRanking::cumulative;
  // chains and reader context
  std::size_t n_chains = 1;
  std::size_t max_evidence = 15;  // 20 is the other common setting
  std::size_t max_path_len = 8;
  std::size_t max_expansions = 4;
  // optimisation
  std::size_t batch_size = 8;
  double learning_rate = 0.5;         // query encoder
  double reader_learning_rate = 0.5;  // reader weights
  double momentum = 0.0;
  std::size_t epochs = 10;
  std::size_t negatives_floor = 8;
  std::uint64_t seed = 7;
  TrainMode mode = TrainMode::supervised_distant;
  // loss terms (ablations)
  bool use_mle = true;
  bool use_rl = true;
  bool use_global = true;
  // encoders
  std::size_t buckets = 4096;
  std::uint64_t encoder_seed = 1;  // seed of the evidence encoder matrix
  bool init_from_evidence = true;  // start the query encoder from that matrix
  std::size_t reader_dim = 96;
  std::uint64_t reader_seed = 2;
  std::size_t threads = 1;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("invalid value for " + key, v);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for " + key, v);
}

}  // namespace detail

inline void set_config_value(TrainConfig& c, const std::string& key, const std::string& v) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "k_beam") c.k_beam = parse_number<std::size_t>(key, v);
  else if (key == "t_max") c.t_max = parse_number<std::size_t>(key, v);
  else if (key == "ranking") {
    if (v == "cumulative") c.ranking = BeamRanking::cumulative;
    else if (v == "last_step") c.ranking = BeamRanking::last_step;
    else throw ConfigError("ranking must be cumulative or last_step", v);
  }
  else if (key == "n_chains") c.n_chains = parse_number<std::size_t>(key, v);
  else if (key == "max_evidence") c.max_evidence = parse_number<std::size_t>(key, v);
  else if (key == "max_path_len") c.max_path_len = parse_number<std::size_t>(key, v);
  else if (key == "max_expansions") c.max_expansions = parse_number<std::size_t>(key, v);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, v);
  else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, v);
  else if (key == "reader_learning_rate") c.reader_learning_rate = parse_number<double>(key, v);
  else if (key == "momentum") c.momentum = parse_number<double>(key, v);
  else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, v);
  else if (key == "negatives_floor") c.negatives_floor = parse_number<std::size_t>(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "mode") c.mode = parse_mode(v);
  else if (key == "use_mle") c.use_mle = parse_bool(key, v);
  else if (key == "use_rl") c.use_rl = parse_bool(key, v);
  else if (key == "use_global") c.use_global = parse_bool(key, v);
  else if (key == "buckets") c.buckets = parse_number<std::size_t>(key, v);
  else if (key == "encoder_seed") c.encoder_seed = parse_number<std::uint64_t>(key, v);
  else if (key == "init_from_evidence") c.init_from_evidence = parse_bool(key, v);
  else if (key == "reader_dim") c.reader_dim = parse_number<std::size_t>(key, v);
  else if (key == "reader_seed") c.reader_seed = parse_number<std::uint64_t>(key, v);
  else if (key == "threads") c.threads = parse_number<std::size_t>(key, v);
  else throw ConfigError("unknown config key", key);
}

inline void validate(const TrainConfig& c) {
  const std::map<std::string, std::size_t> counts{
      {"k_beam", c.k_beam},         {"t_max", c.t_max},           {"n_chains", c.n_chains},
      {"max_evidence", c.max_evidence}, {"batch_size", c.batch_size}, {"epochs", c.epochs},
      {"buckets", c.buckets},       {"reader_dim", c.reader_dim}, {"threads", c.threads},
      {"max_expansions", c.max_expansions}};
  for (const auto& [k, v] : counts) {
    if (v < 1) throw ConfigError(k + " must be at least 1");
  }
  if (c.max_path_len < 2) throw ConfigError("max_path_len must be at least 2");
  if (c.learning_rate < 0 || c.reader_learning_rate < 0) throw ConfigError("learning rates must be non-negative");
  if (c.momentum < 0 || c.momentum >= 1) throw ConfigError("momentum must be in [0, 1)");
}

inline TrainConfig parse_config(std::string_view text, TrainConfig base = {}) {
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", "line " + std::to_string(line_no));
    set_config_value(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  validate(base);
  return base;
}

inline TrainConfig read_config(const std::filesystem::path& path, TrainConfig base = {}) {
  return parse_config(read_file(path), std::move(base));
}

inline std::string config_to_text(const TrainConfig& c) {
  std::ostringstream o;
  o.precision(17);
  auto b = [](bool x) { return x ? "true" : "false"; };
  o << "k_beam = " << c.k_beam << "\n"
    << "t_max = " << c.t_max << "\n"
    << "ranking = " << (c.ranking == BeamRanking::cumulative ? "cumulative" : "last_step") << "\n"
    << "n_chains = " << c.n_chains << "\n"
    << "max_evidence = " << c.max_evidence << "\n"
    << "max_path_len = " << c.max_path_len << "\n"
    << "max_expansions = " << c.max_expansions << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "learning_rate = " << c.learning_rate << "\n"
    << "reader_learning_rate = " << c.reader_learning_rate << "\n"
    << "momentum = " << c.momentum << "\n"
    << "epochs = " << c.epochs << "\n"
    << "negatives_floor = " << c.negatives_floor << "\n"
    << "seed = " << c.seed << "\n"
    << "mode = " << to_string(c.mode) << "\n"
    << "use_mle = " << b(c.use_mle) << "\n"
    << "use_rl = " << b(c.use_rl) << "\n"
    << "use_global = " << b(c.use_global) << "\n"
    << "buckets = " << c.buckets << "\n"
    << "encoder_seed = " << c.encoder_seed << "\n"
    << "init_from_evidence = " << b(c.init_from_evidence) << "\n"
    << "reader_dim = " << c.reader_dim << "\n"
    << "reader_seed = " << c.reader_seed << "\n"
    << "threads = " << c.threads << "\n";
  return o.str();
}

}  // namespace cgr
