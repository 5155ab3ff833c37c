#pragma once

// Synthetic multiple-choice benchmark with planted reasoning chains.
//
// A pool of knowledge chains is planted first: a 2-hop chain "c R m" /
// "m R a" (or a 3-hop one through m1, m2) links a start concept c to an
// answer a. The middle fact of a 3-hop chain shares no word with the
// hypothesis, so only a reformulated query can reach it. Like an open book,
// the chains are shared: several questions ask about the same chain (with
// their own second concept, fillers and distractors), so train and dev
// questions draw on the same core facts.
// Distractor answers get dead-end facts, the question gets a dead-end branch,
// and a shared filler vocabulary (sprinkled into questions and into a set of
// global filler facts) crowds the untrained lexical retriever.
//
// Evidence vectors are the normalised hashing encoding of each fact's text
// under a seeded matrix, with chain facts nudged toward their chain
// neighbours.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cgr/config.hpp"
#include "cgr/dataset.hpp"
#include "cgr/encoder.hpp"
#include "cgr/index.hpp"

namespace cgr {

struct SyntheticOptions {
  std::size_t questions = 200;
  std::size_t choices = 4;
  double dev_fraction = 0.25;
  double three_hop_fraction = 0.5;
  std::size_t chain_pool = 0;  // 0: one chain per four questions
  std::uint64_t seed = 7;
  // evidence encoder
  std::size_t dim = 128;
  std::size_t buckets = 4096;
  double nudge = 0.2;
  // filler noise
  std::size_t filler_vocab = 40;
  std::size_t filler_facts = 150;
  std::size_t filler_words_per_fact = 4;
  std::size_t question_fillers = 2;
};

struct SyntheticBenchmark {
  std::vector<CorpusRecord> corpus;
  EmbeddingFile embeddings;
  std::vector<QaInstance> train;
  std::vector<QaInstance> dev;
  TrainConfig config;  // encoder settings matching the embeddings
};

namespace detail {

struct Relation {
  const char* verb;
  const char* frame;
};

inline constexpr Relation kRelations[] = {
    {"causes", "cause-01"},     {"enables", "enable-01"}, {"produces", "produce-01"}, {"feeds", "feed-01"},
    {"supports", "support-01"}, {"becomes", "become-01"}, {"requires", "require-01"}, {"contains", "contain-01"},
};

class WordMaker {
 public:
  explicit WordMaker(std::mt19937_64& rng) : rng_(rng) {}

  std::string fresh() {
    static const char cons[] = "bdfgklmnprstvz";
    static const char vowels[] = "aeiou";
    for (;;) {
      std::uniform_int_distribution<int> c(0, 13), v(0, 4), syl(3, 4);
      std::string w;
      for (int i = 0, n = syl(rng_); i < n; ++i) {
        w += cons[c(rng_)];
        w += vowels[v(rng_)];
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

}  // namespace detail

inline SyntheticBenchmark generate_synthetic(const SyntheticOptions& opts) {
  if (opts.questions < 2 || opts.choices < 2) throw ConfigError("synthetic benchmark needs >= 2 questions and choices");
  std::mt19937_64 rng(opts.seed);
  detail::WordMaker words(rng);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  constexpr std::size_t n_rel = std::size(detail::kRelations);

  SyntheticBenchmark out;
  std::size_t next_id = 0;
  auto add_fact = [&](std::string text, std::string amr) {
    std::string id = "f" + std::to_string(next_id++);
    out.corpus.push_back({id, std::move(text), std::move(amr)});
    return id;
  };
  auto relation_fact = [&](const std::string& x, const std::string& y) {
    const auto& r = detail::kRelations[pick(n_rel)];
    return add_fact(x + " " + r.verb + " " + y + ".",
                    std::string("(r / ") + r.frame + " :ARG0 (a / " + x + ") :ARG1 (b / " + y + "))");
  };

  std::vector<std::string> fillers;
  for (std::size_t i = 0; i < opts.filler_vocab; ++i) fillers.push_back(words.fresh());
  auto some_fillers = [&](std::size_t n) {
    std::vector<std::string> f = fillers;
    std::shuffle(f.begin(), f.end(), rng);
    f.resize(std::min(n, f.size()));
    return f;
  };
  for (std::size_t i = 0; i < opts.filler_facts; ++i) {
    auto f = some_fillers(opts.filler_words_per_fact);
    std::string text, amr = "(a / " + f[0];
    for (std::size_t k = 0; k < f.size(); ++k) {
      text += (k ? " " : "") + f[k];
      if (k) amr += " :mod (x" + std::to_string(k) + " / " + f[k] + ")";
    }
    add_fact(text + ".", amr + ")");
  }

  struct Planted {
    std::string start, answer;
    std::vector<FactId> facts;
  };
  std::vector<Planted> planted;
  const std::size_t n_chains = opts.chain_pool ? opts.chain_pool : std::max<std::size_t>(1, opts.questions / 4);
  for (std::size_t c = 0; c < n_chains; ++c) {
    Planted p{words.fresh(), words.fresh(), {}};
    if (std::uniform_real_distribution<double>(0, 1)(rng) < opts.three_hop_fraction) {
      const std::string m1 = words.fresh(), m2 = words.fresh();
      p.facts = {relation_fact(p.start, m1), relation_fact(m1, m2), relation_fact(m2, p.answer)};
    } else {
      const std::string m = words.fresh();
      p.facts = {relation_fact(p.start, m), relation_fact(m, p.answer)};
    }
    planted.push_back(std::move(p));
  }
  // Every chain is used about equally often.
  std::vector<std::size_t> assignment;
  for (std::size_t qi = 0; qi < opts.questions; ++qi) assignment.push_back(qi % n_chains);
  std::shuffle(assignment.begin(), assignment.end(), rng);

  std::vector<QaInstance> all;
  const std::size_t n_dev = static_cast<std::size_t>(static_cast<double>(opts.questions) * opts.dev_fraction);
  for (std::size_t qi = 0; qi < opts.questions; ++qi) {
    const Planted& chain = planted[assignment[qi]];
    const std::string& qc1 = chain.start;
    const std::string& answer = chain.answer;
    const std::string qc2 = words.fresh();
    relation_fact(qc2, words.fresh());  // dead-end branch from the question

    QaInstance q;
    q.id = "q" + std::to_string(qi);
    std::string filler_text;
    for (const auto& f : some_fillers(opts.question_fillers)) filler_text += f + " ";
    q.question = "Which " + filler_text + "links " + qc1 + " " + qc2 + "?";
    q.gold_idx = pick(opts.choices);
    for (std::size_t j = 0; j < opts.choices; ++j) {
      std::string c = answer;
      if (j != q.gold_idx) {
        c = words.fresh();
        relation_fact(c, words.fresh());  // distractor dead end
      }
      q.choices.push_back(c);
      q.hyp_amrs.push_back("(l / link-01 :ARG0 (a / " + c + ") :ARG1 (x / " + qc1 + ") :ARG2 (y / " + qc2 + "))");
    }
    q.gold_chain = chain.facts;
    all.push_back(std::move(q));
  }
  out.train.assign(all.begin(), all.end() - static_cast<std::ptrdiff_t>(n_dev));
  out.dev.assign(all.end() - static_cast<std::ptrdiff_t>(n_dev), all.end());

  // Evidence vectors.
  out.config.buckets = opts.buckets;
  out.config.encoder_seed = opts.seed * 31 + 17;
  out.config.seed = opts.seed;
  const HashingEncoder enc(EncoderParams::random(opts.buckets, opts.dim, out.config.encoder_seed));
  std::vector<Vec> vecs;
  for (const auto& r : out.corpus) vecs.push_back(encode_evidence(enc, r.text));
  std::vector<Vec> nudged = vecs;
  auto row = [](const FactId& id) { return static_cast<std::size_t>(std::stoul(id.substr(1))); };
  for (const auto& p : planted) {
    const auto& c = p.facts;
    for (std::size_t i = 0; i < c.size(); ++i) {
      Vec& v = nudged[row(c[i])];
      for (std::size_t n : {i - 1, i + 1}) {
        if (n >= c.size()) continue;  // i - 1 wraps for i == 0
        const Vec& u = vecs[row(c[n])];
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += opts.nudge * u[k];
      }
      const double len = std::sqrt(dot(v, v));
      for (auto& x : v) x /= len;
    }
  }
  out.embeddings.dim = static_cast<std::uint32_t>(opts.dim);
  for (std::size_t i = 0; i < out.corpus.size(); ++i) {
    out.embeddings.rows.push_back({out.corpus[i].id, std::vector<float>(nudged[i].begin(), nudged[i].end())});
  }
  return out;
}

}  // namespace cgr
