#pragma once

// Linear reader over a fixed hashing featurizer. Each choice is scored from
// the string "question [SEP] choice [SEP] fact [SEP] fact ..."; the choice
// with the highest score wins, ties going to the lowest index.

#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "cgr/chains.hpp"
#include "cgr/encoder.hpp"
#include "cgr/errors.hpp"
#include "cgr/losses.hpp"

namespace cgr {

struct ReaderParams {
  Vec weight;
  double bias = 0.0;

  explicit ReaderParams(std::size_t dim = 0) : weight(dim, 0.0) {}

  friend bool operator==(const ReaderParams&, const ReaderParams&) = default;
};

struct ReaderInput {
  std::string question;
  std::string choice;
  std::vector<std::string> context_facts;
};

inline std::string reader_text(const ReaderInput& in) {
  std::string s = in.question + " " + std::string(kSep) + " " + in.choice;
  for (const auto& f : in.context_facts) s = append_fact_text(s, f);
  return s;
}

inline Vec reader_features(const ReaderInput& in, const HashingEncoder& enc) { return enc.encode(reader_text(in)); }

inline double score_features(const Vec& phi, const ReaderParams& p) { return dot(p.weight, phi) + p.bias; }

inline double score_choice(const ReaderInput& in, const ReaderParams& p, const HashingEncoder& enc) {
  return score_features(reader_features(in, enc), p);
}

inline std::size_t argmax(const std::vector<double>& xs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] > xs[best]) best = i;
  }
  return best;
}

struct Prediction {
  std::size_t index = 0;
  std::vector<double> scores;
};

// Facts for the reader: chain facts taken chain by chain (chains are already
// shortest-first), first occurrence only, up to `max_evidence`.
inline std::vector<FactId> select_context(const ChainSet& cs, std::size_t max_evidence) {
  std::vector<FactId> out;
  std::set<FactId> seen;
  for (const auto& c : cs.chains) {
    for (const auto& f : c.facts) {
      if (out.size() >= max_evidence) return out;
      if (seen.insert(f).second) out.push_back(f);
    }
  }
  return out;
}

using FactTextFn = std::function<std::string(const FactId&)>;

inline Prediction predict(const std::string& question, const std::vector<std::string>& choices,
                          const std::vector<ChainSet>& chain_sets, const ReaderParams& p, const HashingEncoder& enc,
                          const FactTextFn& fact_text, std::size_t max_evidence = 15) {
  if (choices.size() < 2) throw DataError("at least two choices are required");
  if (chain_sets.size() != choices.size()) throw DataError("one chain set per choice is required");
  Prediction pred;
  for (std::size_t j = 0; j < choices.size(); ++j) {
    ReaderInput in{question, choices[j], {}};
    for (const auto& f : select_context(chain_sets[j], max_evidence)) in.context_facts.push_back(fact_text(f));
    pred.scores.push_back(score_choice(in, p, enc));
  }
  pred.index = argmax(pred.scores);
  return pred;
}

inline std::vector<double> softmax(const std::vector<double>& scores) {
  const double lse = log_sum_exp(scores);
  std::vector<double> p(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) p[i] = std::exp(scores[i] - lse);
  return p;
}

inline double reader_loss(const std::vector<double>& scores, std::size_t gold_idx) {
  if (gold_idx >= scores.size()) throw DataError("gold index out of range");
  return log_sum_exp(scores) - scores[gold_idx];
}

// d(reader_loss)/d(scores).
inline std::vector<double> reader_loss_grad(const std::vector<double>& scores, std::size_t gold_idx) {
  auto g = softmax(scores);
  g.at(gold_idx) -= 1.0;
  return g;
}

inline int reward(std::size_t pred_idx, std::size_t gold_idx) { return pred_idx == gold_idx ? 1 : 0; }

}  // namespace cgr
