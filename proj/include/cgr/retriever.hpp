#pragma once

// Iterative dense retrieval with beam search.
//
// Each iteration re-encodes every beam's query, takes its top-k facts by
// inner product (excluding facts already on that beam), and keeps the best k
// extended beams overall. The query for the next iteration is the previous
// query with the picked fact appended after a "[SEP]" marker.

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "cgr/encoder.hpp"
#include "cgr/errors.hpp"
#include "cgr/index.hpp"

namespace cgr {

inline double score(std::span<const double> query_vec, std::span<const double> fact_vec) {
  return dot(query_vec, fact_vec);
}

struct ScoredFact {
  FactId id;
  double score;

  friend bool operator==(const ScoredFact&, const ScoredFact&) = default;
};

// Exact top-k by inner product; ties go to the smaller fact id. Returns
// fewer than k results when the index (minus exclusions) is smaller.
inline std::vector<ScoredFact> top_k(const VectorIndex& index, std::span<const double> query_vec, std::size_t k,
                                     std::span<const FactId> exclude = {}) {
  if (query_vec.size() != index.dim()) throw DimensionMismatch(index.dim(), query_vec.size());
  std::vector<char> skip(index.size(), 0);
  for (const auto& id : exclude) {
    if (auto r = index.find(id)) skip[*r] = 1;
  }
  std::vector<double> scores(index.size());
  std::vector<std::size_t> rows;
  rows.reserve(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (skip[r]) continue;
    scores[r] = dot(query_vec, index.vector(r));
    rows.push_back(r);
  }
  const std::size_t n = std::min(k, rows.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index.id(a) < index.id(b);
  };
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n), rows.end(), better);
  std::vector<ScoredFact> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({index.id(rows[i]), scores[rows[i]]});
  return out;
}

struct QueryState {
  std::size_t t = 1;  // 1-based iteration the query is used at
  std::string text;
  double score_so_far = 0.0;
  std::vector<FactId> picked;
  std::vector<double> step_scores;

  friend bool operator==(const QueryState&, const QueryState&) = default;
};

inline QueryState initial_query(std::string hypothesis) { return QueryState{1, std::move(hypothesis), 0.0, {}, {}}; }

inline std::string append_fact_text(const std::string& query, const std::string& fact_text) {
  return query + " " + std::string(kSep) + " " + fact_text;
}

inline QueryState reformulate(const QueryState& prev, const FactId& fact, const VectorIndex& index) {
  const std::size_t row = index.row_of(fact);
  QueryState next = prev;
  next.t = prev.t + 1;
  next.text = append_fact_text(prev.text, index.text(row));
  next.picked.push_back(fact);
  return next;
}

enum class BeamRanking { cumulative, last_step };

struct RetrieveOptions {
  std::size_t k_beam = 10;
  std::size_t t_max = 2;
  BeamRanking ranking = BeamRanking::cumulative;
};

// Facts in first-retrieved order, each listed once.
struct EvidencePool {
  std::vector<FactId> facts;
  std::vector<std::vector<FactId>> per_iteration;

  bool contains(const FactId& id) const { return std::find(facts.begin(), facts.end(), id) != facts.end(); }
};

struct RetrievalResult {
  EvidencePool pool;
  std::vector<QueryState> beams;
};

namespace detail {

inline void add_unique(std::vector<FactId>& v, std::unordered_set<FactId>& seen, const FactId& id) {
  if (seen.insert(id).second) v.push_back(id);
}

inline double rank_key(const QueryState& s, BeamRanking ranking) {
  if (ranking == BeamRanking::last_step && !s.step_scores.empty()) return s.step_scores.back();
  return s.score_so_far;
}

// Best first; equal keys fall back to the picked sequence for determinism.
inline void sort_and_prune(std::vector<QueryState>& states, std::size_t k, BeamRanking ranking) {
  std::stable_sort(states.begin(), states.end(), [&](const QueryState& a, const QueryState& b) {
    double ka = rank_key(a, ranking), kb = rank_key(b, ranking);
    if (ka != kb) return ka > kb;
    return a.picked < b.picked;
  });
  if (states.size() > k) states.resize(k);
}

}  // namespace detail

// `extra_first_iter` is searched alongside `index` at the first iteration
// only (an open book of facts closely tied to the questions).
inline RetrievalResult retrieve(const std::string& hypothesis, const VectorIndex& index, const QueryEncoder& encoder,
                                const RetrieveOptions& opts, const VectorIndex* extra_first_iter = nullptr) {
  if (opts.k_beam < 1 || opts.t_max < 1) throw ConfigError("k_beam and t_max must be at least 1");
  if (hypothesis.empty()) throw DataError("empty hypothesis");
  if (index.empty()) throw EmptyIndex();
  if (encoder.dim() != index.dim()) throw DimensionMismatch(index.dim(), encoder.dim());
  if (extra_first_iter && extra_first_iter->dim() != index.dim()) {
    throw DimensionMismatch(index.dim(), extra_first_iter->dim());
  }

  RetrievalResult result;
  std::unordered_set<FactId> in_pool;
  std::vector<QueryState> beams{initial_query(hypothesis)};

  for (std::size_t iter = 1; iter <= opts.t_max; ++iter) {
    std::vector<FactId> iter_facts;
    std::unordered_set<FactId> iter_seen;
    std::vector<QueryState> candidates;
    for (const auto& beam : beams) {
      const Vec q = encoder.encode(beam.text);
      auto expand = [&](const VectorIndex& source) {
        for (const auto& hit : top_k(source, q, opts.k_beam, beam.picked)) {
          detail::add_unique(result.pool.facts, in_pool, hit.id);
          detail::add_unique(iter_facts, iter_seen, hit.id);
          QueryState next = reformulate(beam, hit.id, source);
          next.score_so_far = beam.score_so_far + hit.score;
          next.step_scores.push_back(hit.score);
          candidates.push_back(std::move(next));
        }
      };
      expand(index);
      if (iter == 1 && extra_first_iter != nullptr && !extra_first_iter->empty()) expand(*extra_first_iter);
    }
    result.pool.per_iteration.push_back(std::move(iter_facts));
    detail::sort_and_prune(candidates, opts.k_beam, opts.ranking);
    if (candidates.empty()) break;
    beams = std::move(candidates);
  }
  result.beams = std::move(beams);
  return result;
}

}  // namespace cgr
