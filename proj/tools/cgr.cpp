// cgr: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error. Errors go to stderr as
// one JSON line {"code", "message", "context"}.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cgr/cgr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string corpus, embeddings, dataset, config, openbook, model, out, dev, mode, question;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads, k, t, n_chains, max_evidence, epochs;
  std::optional<std::size_t> choice;
  std::string format = "dot";
  // gen-synthetic / index build
  std::size_t questions = 200;
  std::size_t dim = 128;
};

class UsageError : public cgr::ConfigError {
 public:
  using cgr::ConfigError::ConfigError;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
}

cgr::TrainConfig load_config(const Flags& f) {
  cgr::TrainConfig c = f.config.empty() ? cgr::TrainConfig{} : cgr::read_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.k) c.k_beam = *f.k;
  if (f.t) c.t_max = *f.t;
  if (f.n_chains) c.n_chains = *f.n_chains;
  if (f.max_evidence) c.max_evidence = *f.max_evidence;
  if (f.epochs) c.epochs = *f.epochs;
  if (!f.mode.empty()) c.mode = cgr::parse_mode(f.mode);
  cgr::validate(c);
  return c;
}

cgr::Resources load_resources(const Flags& f) {
  require(f.corpus, "--corpus");
  require(f.embeddings, "--embeddings");
  auto corpus = cgr::read_corpus(f.corpus);
  auto emb = cgr::read_cgrv(f.embeddings);
  std::optional<cgr::EmbeddingFile> ob;
  if (!f.openbook.empty()) ob = cgr::read_cgrv(f.openbook);
  return cgr::make_resources(corpus, emb, ob);
}

cgr::Model load_or_init_model(const Flags& f, const cgr::TrainConfig& cfg, const cgr::Resources& res) {
  if (!f.model.empty()) return cgr::load_model(f.model);
  return cgr::init_model(cfg, res.index.dim());
}

std::vector<cgr::QaInstance> load_dataset(const Flags& f) {
  require(f.dataset, "--dataset");
  return cgr::read_dataset(f.dataset);
}

// Selected questions: one by id, or all.
std::vector<const cgr::QaInstance*> select(const std::vector<cgr::QaInstance>& data, const std::string& id) {
  std::vector<const cgr::QaInstance*> out;
  for (const auto& q : data) {
    if (id.empty() || q.id == id) out.push_back(&q);
  }
  if (!id.empty() && out.empty()) throw cgr::UnknownQuestion(id);
  return out;
}

std::vector<std::size_t> choices_of(const cgr::QaInstance& q, const std::optional<std::size_t>& choice) {
  if (choice) {
    if (*choice >= q.choices.size()) throw UsageError("--choice out of range", std::to_string(*choice));
    return {*choice};
  }
  std::vector<std::size_t> all(q.choices.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  return all;
}

void emit(const Flags& f, const std::string& text) {
  if (f.out.empty()) {
    std::cout << text;
  } else {
    cgr::write_file_atomic(f.out, text);
  }
}

// ---- commands -------------------------------------------------------------

void cmd_gen_synthetic(const Flags& f) {
  require(f.out, "--out");
  cgr::SyntheticOptions so;
  so.questions = f.questions;
  so.seed = f.seed.value_or(7);
  so.dim = f.dim;
  auto b = cgr::generate_synthetic(so);
  const fs::path dir = f.out;
  cgr::write_file_atomic(dir / "corpus.jsonl", cgr::corpus_to_jsonl(b.corpus));
  cgr::write_cgrv(dir / "embeddings.cgrv", b.embeddings.dim, b.embeddings.rows);
  cgr::write_file_atomic(dir / "train.jsonl", cgr::dataset_to_jsonl(b.train));
  cgr::write_file_atomic(dir / "dev.jsonl", cgr::dataset_to_jsonl(b.dev));
  cgr::TrainConfig c = b.config;
  c.epochs = 8;
  c.learning_rate = 0.5;
  c.reader_learning_rate = 0.5;
  cgr::write_file_atomic(dir / "config.cfg", "# synthetic benchmark settings\n" + cgr::config_to_text(c));
  std::cout << json{{"facts", b.corpus.size()},
                    {"train", b.train.size()},
                    {"dev", b.dev.size()},
                    {"dim", b.embeddings.dim},
                    {"out", dir.string()}}
                   .dump()
            << "\n";
}

void cmd_index_build(const Flags& f) {
  require(f.corpus, "--corpus");
  require(f.embeddings, "--embeddings");
  const auto cfg = load_config(f);
  auto corpus = cgr::read_corpus(f.corpus);
  const cgr::HashingEncoder enc(cgr::EncoderParams::random(cfg.buckets, f.dim, cfg.encoder_seed));
  auto rows = cgr::embed_corpus(corpus, enc);
  cgr::write_cgrv(f.embeddings, static_cast<std::uint32_t>(f.dim), rows);
  std::cout << json{{"facts", rows.size()}, {"dim", f.dim}, {"embeddings", f.embeddings}}.dump() << "\n";
}

void cmd_hypo(const Flags& f) {
  auto data = load_dataset(f);
  std::string out;
  for (const auto* q : select(data, f.question)) {
    for (auto j : choices_of(*q, f.choice)) {
      out += json{{"question_id", q->id}, {"choice_idx", j}, {"hypothesis", cgr::make_hypothesis(q->question, q->choices[j])}}
                 .dump() +
             "\n";
    }
  }
  emit(f, out);
}

void cmd_retrieve(const Flags& f) {
  const auto cfg = load_config(f);
  auto res = load_resources(f);
  auto data = load_dataset(f);
  const auto model = load_or_init_model(f, cfg, res);
  const auto enc = model.query_encoder();
  std::string out;
  for (const auto* q : select(data, f.question)) {
    for (auto j : choices_of(*q, f.choice)) {
      const auto h = cgr::make_hypothesis(q->question, q->choices[j]);
      auto r = cgr::retrieve(h, res.index, enc, cgr::retrieve_options(cfg), res.openbook ? &*res.openbook : nullptr);
      json beams = json::array();
      for (const auto& b : r.beams) beams.push_back({{"picked", b.picked}, {"score", b.score_so_far}});
      out += json{{"question_id", q->id},
                  {"choice_idx", j},
                  {"hypothesis", h},
                  {"pool", r.pool.facts},
                  {"per_iteration", r.pool.per_iteration},
                  {"beams", beams}}
                 .dump() +
             "\n";
    }
  }
  emit(f, out);
}

struct GraphRun {
  const cgr::QaInstance* q;
  std::size_t choice;
  cgr::PipelineResult result;
};

std::vector<GraphRun> run_graphs(const Flags& f, const std::vector<cgr::QaInstance>& data, bool single) {
  const auto cfg = load_config(f);
  auto res = load_resources(f);
  const auto model = load_or_init_model(f, cfg, res);
  const auto enc = model.query_encoder();
  if (single) require(f.question, "--question");
  std::vector<GraphRun> runs;
  for (const auto* q : select(data, f.question)) {
    auto p = cgr::prepare(*q);
    auto choices = single && !f.choice ? std::vector<std::size_t>{q->gold_idx} : choices_of(*q, f.choice);
    for (auto j : choices) runs.push_back({q, j, cgr::run_pipeline(p, j, cfg, res, enc)});
  }
  return runs;
}

void cmd_graph(const Flags& f) {
  if (f.format != "dot" && f.format != "json") throw UsageError("--format must be dot or json", f.format);
  const auto data = load_dataset(f);
  auto runs = run_graphs(f, data, true);
  std::string out;
  for (const auto& r : runs) {
    if (f.format == "dot") {
      out += cgr::to_dot(r.result.graph, r.result.chains.chains, r.q->id + "_" + std::to_string(r.choice));
    } else {
      nlohmann::json j = cgr::to_json(r.result.graph);
      j["question_id"] = r.q->id;
      j["choice_idx"] = r.choice;
      out += j.dump() + "\n";
    }
  }
  emit(f, out);
}

void cmd_chains(const Flags& f) {
  const auto data = load_dataset(f);
  auto runs = run_graphs(f, data, false);
  std::string out;
  for (const auto& r : runs) {
    json chains = json::array();
    for (const auto& c : r.result.chains.chains) chains.push_back(c.facts);
    out += json{{"question_id", r.q->id},
                {"choice_idx", r.choice},
                {"chains", chains},
                {"active_facts", r.result.chains.active_facts}}
               .dump() +
           "\n";
  }
  emit(f, out);
}

void cmd_explain(const Flags& f) {
  const auto data = load_dataset(f);
  auto runs = run_graphs(f, data, true);
  const auto& r = runs.front();
  std::cout << cgr::render_chains(r.result.chains, r.result.graph, r.choice);
  const auto dot = cgr::to_dot(r.result.graph, r.result.chains.chains, r.q->id + "_" + std::to_string(r.choice));
  if (f.out.empty()) {
    std::cout << "\n" << dot;
  } else {
    cgr::write_file_atomic(f.out, dot);
  }
}

void cmd_train(const Flags& f) {
  require(f.out, "--out");
  const auto cfg = load_config(f);
  auto res = load_resources(f);
  auto train_set = load_dataset(f);
  std::vector<cgr::QaInstance> dev_set;
  if (!f.dev.empty()) dev_set = cgr::read_dataset(f.dev);
  std::optional<cgr::Model> start;
  if (!f.model.empty()) start = cgr::load_model(f.model);

  std::string metrics;
  auto result = cgr::train(train_set, dev_set, cfg, res, [&](const json& j) { metrics += j.dump() + "\n"; }, start);
  const fs::path dir = f.out;
  cgr::save_model(dir / "model.bin", result.model);
  cgr::write_file_atomic(dir / "metrics.jsonl", metrics);
  json summary{{"steps", result.steps.size()}, {"model", (dir / "model.bin").string()}};
  if (!result.dev.empty()) summary["dev_accuracy"] = result.dev.back().accuracy;
  std::cout << summary.dump() << "\n";
}

void cmd_eval(const Flags& f) {
  const auto cfg = load_config(f);
  auto res = load_resources(f);
  auto data = load_dataset(f);
  const auto model = load_or_init_model(f, cfg, res);
  auto m = cgr::evaluate(data, model, cfg, res);
  emit(f, cgr::to_json(m).dump() + "\n");
}

void print_error(const std::string& code, const std::string& message, const std::string& context) {
  std::cerr << json{{"code", code}, {"message", message}, {"context", context}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chain-guided retrieval and reasoning over AMR semantic graphs"};
  app.require_subcommand(0, 1);
  Flags f;

  auto data_flags = [&](CLI::App* s) {
    s->add_option("--corpus", f.corpus, "fact corpus (JSONL)");
    s->add_option("--embeddings", f.embeddings, "fact embeddings (CGRV)");
    s->add_option("--dataset", f.dataset, "questions (JSONL)");
    s->add_option("--openbook", f.openbook, "extra embeddings searched at the first iteration");
    s->add_option("--model", f.model, "trained model file");
  };
  auto cfg_flags = [&](CLI::App* s) {
    s->add_option("--config", f.config, "key = value config file");
    s->add_option("--seed", f.seed);
    s->add_option("--threads", f.threads);
    s->add_option("--k", f.k, "beam size");
    s->add_option("--t", f.t, "retrieval iterations");
    s->add_option("--n-chains", f.n_chains, "chains sampled per question");
    s->add_option("--max-evidence", f.max_evidence, "reader context cap");
    s->add_option("--mode", f.mode, "supervised+distant | distant-only");
  };
  auto select_flags = [&](CLI::App* s) {
    s->add_option("--question", f.question, "question id");
    s->add_option("--choice", f.choice, "choice index (0-based)");
  };

  std::vector<std::pair<CLI::App*, void (*)(const Flags&)>> commands;

  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic benchmark");
  gen->add_option("--questions", f.questions);
  gen->add_option("--seed", f.seed);
  gen->add_option("--dim", f.dim, "embedding dimension");
  gen->add_option("--out", f.out, "output directory");
  commands.push_back({gen, cmd_gen_synthetic});

  auto index_flags = [&](CLI::App* s) {
    s->add_option("--corpus", f.corpus);
    s->add_option("--embeddings", f.embeddings, "output embedding file");
    s->add_option("--dim", f.dim);
    s->add_option("--config", f.config);
  };
  auto* ib = app.add_subcommand("index-build", "embed a corpus with the evidence encoder");
  index_flags(ib);
  commands.push_back({ib, cmd_index_build});
  auto* index = app.add_subcommand("index", "index commands");
  auto* index_build = index->add_subcommand("build", "embed a corpus with the evidence encoder");
  index_flags(index_build);
  commands.push_back({index_build, cmd_index_build});

  auto* hypo = app.add_subcommand("hypo", "print hypotheses");
  hypo->add_option("--dataset", f.dataset);
  select_flags(hypo);
  hypo->add_option("--out", f.out);
  commands.push_back({hypo, cmd_hypo});

  auto* retrieve = app.add_subcommand("retrieve", "run iterative retrieval");
  auto* graph = app.add_subcommand("graph", "semantic graph for one question");
  auto* chains = app.add_subcommand("chains", "reasoning chains as JSON lines");
  auto* explain = app.add_subcommand("explain", "chain table and DOT for one question");
  auto* eval = app.add_subcommand("eval", "evaluate a model");
  for (auto* s : {retrieve, graph, chains, explain, eval}) {
    data_flags(s);
    cfg_flags(s);
    s->add_option("--out", f.out);
  }
  for (auto* s : {retrieve, graph, chains, explain}) select_flags(s);
  graph->add_option("--format", f.format, "dot | json");
  commands.push_back({retrieve, cmd_retrieve});
  commands.push_back({graph, cmd_graph});
  commands.push_back({chains, cmd_chains});
  commands.push_back({explain, cmd_explain});
  commands.push_back({eval, cmd_eval});

  auto* train = app.add_subcommand("train", "train retriever and reader");
  data_flags(train);
  cfg_flags(train);
  train->add_option("--dev", f.dev, "dev questions evaluated after each epoch");
  train->add_option("--epochs", f.epochs);
  train->add_option("--out", f.out, "output directory");
  commands.push_back({train, cmd_train});

  if (argc < 2) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what(), "");
    return 1;
  }

  try {
    for (auto& [sub, fn] : commands) {
      if (sub->parsed()) {
        fn(f);
        return 0;
      }
    }
    std::cerr << (index->parsed() ? index->help() : app.help());
    return 1;
  } catch (const cgr::Error& e) {
    print_error(e.code(), e.what(), e.context());
    return e.is_usage_error() ? 1 : 2;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what(), "");
    return 2;
  }
}
