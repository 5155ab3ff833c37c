#pragma once

// One (question, choice) pass: hypothesis -> retrieval -> semantic graph ->
// reasoning chains.

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cgr/amr.hpp"
#include "cgr/chains.hpp"
#include "cgr/config.hpp"
#include "cgr/dataset.hpp"
#include "cgr/index.hpp"
#include "cgr/retriever.hpp"
#include "cgr/semgraph.hpp"

namespace cgr {

namespace detail {

inline bool is_wh_word(std::string_view w) {
  static const char* const words[] = {"which", "what", "who", "whom", "whose", "where", "when", "why", "how"};
  for (const char* x : words) {
    if (iequals(w, x)) return true;
  }
  return false;
}

inline bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '\''; }

inline std::string strip_question_mark(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '?')) s.pop_back();
  return s;
}

}  // namespace detail

// Declarative form of a question/choice pair. A blank ("__" or longer) is
// filled with the choice; otherwise the first wh-word is replaced by it;
// otherwise the two are concatenated.
inline std::string make_hypothesis(const std::string& question, const std::string& choice) {
  if (auto b = question.find("__"); b != std::string::npos) {
    auto e = question.find_first_not_of('_', b);
    if (e == std::string::npos) e = question.size();
    return detail::strip_question_mark(question.substr(0, b) + choice + question.substr(e));
  }
  for (std::size_t i = 0; i < question.size();) {
    if (!detail::word_char(question[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < question.size() && detail::word_char(question[j])) ++j;
    if (detail::is_wh_word(std::string_view(question).substr(i, j - i))) {
      return detail::strip_question_mark(question.substr(0, i) + choice + question.substr(j));
    }
    i = j;
  }
  return question + " " + choice;
}

// Error raised from inside the pipeline, tagged with the question id.
class PipelineError : public Error {
 public:
  PipelineError(const Error& inner, const std::string& question_id)
      : Error(inner.code(), inner.what(),
              inner.context().empty() ? question_id : question_id + ": " + inner.context()),
        usage_(inner.is_usage_error()) {}
  bool is_usage_error() const noexcept override { return usage_; }

 private:
  bool usage_;
};

// Everything retrieval and graph construction read: the evidence index, the
// optional open book searched at the first iteration, and parsed fact AMRs.
struct Resources {
  VectorIndex index;
  std::optional<VectorIndex> openbook;
  std::unordered_map<FactId, AmrGraph> amrs;
  GraphOptions graph;

  std::string fact_text(const FactId& id) const {
    if (auto r = index.find(id)) return index.text(*r);
    if (openbook) {
      if (auto r = openbook->find(id)) return openbook->text(*r);
    }
    throw UnknownFact(id);
  }
};

inline std::unordered_map<FactId, AmrGraph> parse_corpus_amrs(const std::vector<CorpusRecord>& corpus) {
  std::unordered_map<FactId, AmrGraph> out;
  for (const auto& r : corpus) {
    if (!r.amr) continue;
    try {
      out.emplace(r.id, parse_penman(*r.amr));
    } catch (const SyntaxError& e) {
      throw DataError(e.what(), r.id);
    }
  }
  return out;
}

inline Resources make_resources(const std::vector<CorpusRecord>& corpus, const EmbeddingFile& emb,
                                const std::optional<EmbeddingFile>& openbook = std::nullopt) {
  Resources res;
  res.index = make_index(corpus, emb);
  if (openbook) {
    // Open-book facts take their text from the corpus when it has them.
    std::unordered_map<FactId, const CorpusRecord*> by_id;
    for (const auto& r : corpus) by_id[r.id] = &r;
    std::vector<IndexEntry> entries;
    for (const auto& e : openbook->rows) {
      auto it = by_id.find(e.id);
      entries.push_back({e.id, Vec(e.values.begin(), e.values.end()), it != by_id.end() ? it->second->text : e.id});
    }
    res.openbook = VectorIndex(openbook->dim, std::move(entries));
  }
  res.amrs = parse_corpus_amrs(corpus);
  return res;
}

// A dataset instance with its hypotheses built and AMRs parsed once.
struct PreparedInstance {
  const QaInstance* inst = nullptr;
  std::vector<std::string> hypotheses;
  std::vector<AmrGraph> hyp_amrs;
};

inline PreparedInstance prepare(const QaInstance& q) {
  PreparedInstance p{&q, {}, {}};
  for (std::size_t j = 0; j < q.choices.size(); ++j) {
    p.hypotheses.push_back(make_hypothesis(q.question, q.choices[j]));
    try {
      p.hyp_amrs.push_back(parse_penman(q.hyp_amrs.at(j)));
    } catch (const Error& e) {
      throw PipelineError(e, q.id);
    }
  }
  return p;
}

struct PipelineResult {
  std::string hypothesis;
  RetrievalResult retrieval;
  SemanticGraph graph;
  ChainSet chains;
};

inline RetrieveOptions retrieve_options(const TrainConfig& cfg) { return {cfg.k_beam, cfg.t_max, cfg.ranking}; }

inline ChainOptions chain_options(const TrainConfig& cfg) { return {cfg.max_path_len, cfg.max_expansions}; }

inline PipelineResult run_pipeline(const PreparedInstance& p, std::size_t choice_idx, const TrainConfig& cfg,
                                   const Resources& res, const QueryEncoder& encoder) {
  try {
    PipelineResult out;
    out.hypothesis = p.hypotheses.at(choice_idx);
    out.retrieval = retrieve(out.hypothesis, res.index, encoder, retrieve_options(cfg),
                             res.openbook ? &*res.openbook : nullptr);
    // Facts without an AMR stay in the pool but not in the graph.
    std::vector<PoolAmr> pool;
    for (const auto& f : out.retrieval.pool.facts) {
      if (auto it = res.amrs.find(f); it != res.amrs.end()) pool.push_back({f, it->second});
    }
    out.graph = build_graph(choice_idx, p.hyp_amrs, pool, res.graph);
    out.chains = generate_chains(out.graph, chain_options(cfg));
    return out;
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(e, p.inst->id);
  }
}

inline PipelineResult run_pipeline(const QaInstance& q, std::size_t choice_idx, const TrainConfig& cfg,
                                   const Resources& res, const QueryEncoder& encoder) {
  return run_pipeline(prepare(q), choice_idx, cfg, res, encoder);
}

}  // namespace cgr
