#pragma once

// Training and evaluation. Per mini-batch: run every choice's pipeline with
// the current query encoder, score choices with the reader, then take one SGD
// step on reader loss + supervised loss + distant-supervision losses.
//
// The query encoder and the reader have disjoint parameters; the reader's
// prediction reaches the retriever only through the RL reward.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgr/config.hpp"
#include "cgr/dataset.hpp"
#include "cgr/encoder.hpp"
#include "cgr/index.hpp"
#include "cgr/losses.hpp"
#include "cgr/pipeline.hpp"
#include "cgr/reader.hpp"

namespace cgr {

// ---- model ----------------------------------------------------------------

struct Model {
  EncoderParams query;
  ReaderParams reader;
  // The reader featurizer is a fixed random matrix, rebuilt from these.
  std::size_t reader_buckets = 4096;
  std::uint64_t reader_seed = 2;

  HashingEncoder query_encoder() const { return HashingEncoder(query); }
  HashingEncoder reader_featurizer() const {
    return HashingEncoder(EncoderParams::random(reader_buckets, reader.weight.size(), reader_seed));
  }

  friend bool operator==(const Model&, const Model&) = default;
};

// Query encoder starts from the evidence encoder's matrix, so the untrained
// retriever is a lexical matcher.
inline Model init_model(const TrainConfig& cfg, std::size_t dim) {
  Model m;
  m.query = EncoderParams::random(cfg.buckets, dim, cfg.init_from_evidence ? cfg.encoder_seed : cfg.seed * 2 + 1);
  m.reader = ReaderParams(cfg.reader_dim);
  m.reader_buckets = cfg.buckets;
  m.reader_seed = cfg.reader_seed;
  return m;
}

// "CGRM" | u32 version = 1 | u64 buckets | u64 dim | buckets*dim f64 |
// u64 reader_buckets | u64 reader_seed | u64 reader_dim | reader_dim f64 | f64 bias
inline std::string encode_model(const Model& m) {
  std::string out = "CGRM";
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint64_t>(out, m.query.buckets);
  detail::put_le<std::uint64_t>(out, m.query.dim);
  for (double w : m.query.weights) detail::put_le<double>(out, w);
  detail::put_le<std::uint64_t>(out, m.reader_buckets);
  detail::put_le<std::uint64_t>(out, m.reader_seed);
  detail::put_le<std::uint64_t>(out, m.reader.weight.size());
  for (double w : m.reader.weight) detail::put_le<double>(out, w);
  detail::put_le<double>(out, m.reader.bias);
  return out;
}

inline Model decode_model(std::string_view bytes) {
  if (bytes.substr(0, 4) != "CGRM") throw DataError("bad model file magic");
  std::size_t pos = 4;
  if (detail::get_le<std::uint32_t>(bytes, pos) != 1) throw DataError("unsupported model file version");
  Model m;
  const auto buckets = detail::get_le<std::uint64_t>(bytes, pos);
  const auto dim = detail::get_le<std::uint64_t>(bytes, pos);
  if (buckets * dim * sizeof(double) > bytes.size()) throw DataError("truncated model file");
  m.query = EncoderParams(buckets, dim);
  for (auto& w : m.query.weights) w = detail::get_le<double>(bytes, pos);
  m.reader_buckets = detail::get_le<std::uint64_t>(bytes, pos);
  m.reader_seed = detail::get_le<std::uint64_t>(bytes, pos);
  const auto rdim = detail::get_le<std::uint64_t>(bytes, pos);
  if (rdim * sizeof(double) > bytes.size()) throw DataError("truncated model file");
  m.reader = ReaderParams(rdim);
  for (auto& w : m.reader.weight) w = detail::get_le<double>(bytes, pos);
  m.reader.bias = detail::get_le<double>(bytes, pos);
  if (pos != bytes.size()) throw DataError("trailing bytes in model file");
  return m;
}

inline void save_model(const std::filesystem::path& path, const Model& m) { write_file_atomic(path, encode_model(m)); }
inline Model load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

// ---- helpers --------------------------------------------------------------

// Runs fn(0..n-1) on up to `threads` workers. Each index writes only its own
// output slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
  return std::mt19937_64(seq);
}

// Main index plus open-book facts not already in it.
inline VectorIndex loss_index(const Resources& res) {
  if (!res.openbook) return res.index;
  std::vector<IndexEntry> entries;
  for (std::size_t r = 0; r < res.index.size(); ++r) {
    auto v = res.index.vector(r);
    entries.push_back({res.index.id(r), Vec(v.begin(), v.end()), res.index.text(r)});
  }
  for (std::size_t r = 0; r < res.openbook->size(); ++r) {
    if (res.index.contains(res.openbook->id(r))) continue;
    auto v = res.openbook->vector(r);
    entries.push_back({res.openbook->id(r), Vec(v.begin(), v.end()), res.openbook->text(r)});
  }
  return VectorIndex(res.index.dim(), std::move(entries));
}

// Up to n chains, uniformly without replacement, kept in chain order.
inline std::vector<std::vector<FactId>> sample_chains(const ChainSet& cs, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(cs.chains.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > n) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<std::vector<FactId>> out;
  for (auto i : idx) out.push_back(cs.chains[i].facts);
  return out;
}

inline std::vector<FactId> traversal_order(std::vector<FactId> chain, Direction dir) {
  if (dir == Direction::backward) std::reverse(chain.begin(), chain.end());
  return chain;
}

// Negatives for each traversal step: the facts other questions in the batch
// use at the same step, then random pool facts up to `floor`. Facts of the
// chain itself never appear.
inline std::vector<std::vector<FactId>> step_negatives(const std::vector<FactId>& order,
                                                       const std::vector<std::vector<FactId>>& other_orders,
                                                       const std::vector<FactId>& pool, std::size_t floor,
                                                       const VectorIndex& index, std::mt19937_64& rng) {
  const std::set<FactId> own(order.begin(), order.end());
  std::vector<std::vector<FactId>> out(order.size());
  for (std::size_t t = 0; t < order.size(); ++t) {
    std::set<FactId> seen;
    auto& negs = out[t];
    for (const auto& other : other_orders) {
      if (t < other.size() && !own.count(other[t]) && index.contains(other[t]) && seen.insert(other[t]).second) {
        negs.push_back(other[t]);
      }
    }
    std::vector<FactId> fill;
    for (const auto& f : pool) {
      if (!own.count(f) && !seen.count(f) && index.contains(f)) fill.push_back(f);
    }
    for (std::size_t i = 0; i < fill.size() && negs.size() < floor; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, fill.size() - 1);
      std::swap(fill[i], fill[pick(rng)]);
      negs.push_back(fill[i]);
    }
  }
  return out;
}

// ---- per-question run -----------------------------------------------------

struct QuestionRun {
  std::vector<PipelineResult> choices;
  std::vector<Vec> features;  // reader features per choice
  std::vector<double> scores;
  std::size_t prediction = 0;
};

inline QuestionRun run_question(const PreparedInstance& p, const TrainConfig& cfg, const Resources& res,
                                const HashingEncoder& qenc, const HashingEncoder& featurizer,
                                const ReaderParams& reader) {
  QuestionRun run;
  const auto& q = *p.inst;
  for (std::size_t j = 0; j < q.choices.size(); ++j) {
    run.choices.push_back(run_pipeline(p, j, cfg, res, qenc));
    ReaderInput in{q.question, q.choices[j], {}};
    for (const auto& f : select_context(run.choices.back().chains, cfg.max_evidence)) {
      in.context_facts.push_back(res.fact_text(f));
    }
    run.features.push_back(reader_features(in, featurizer));
    run.scores.push_back(score_features(run.features.back(), reader));
  }
  run.prediction = argmax(run.scores);
  return run;
}

// ---- evaluation -----------------------------------------------------------

struct EvalMetrics {
  std::size_t questions = 0;
  double accuracy = 0.0;
  std::optional<double> retrieval_accuracy;
  std::map<std::size_t, std::size_t> chain_length_histogram;  // modal length of the gold choice's chains
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> by_chain_length;  // length -> (correct, total)
  std::vector<std::size_t> predictions;
};

inline nlohmann::json to_json(const EvalMetrics& m) {
  nlohmann::json hist = nlohmann::json::object(), by_len = nlohmann::json::object();
  for (auto [len, n] : m.chain_length_histogram) hist[std::to_string(len)] = n;
  for (auto [len, ct] : m.by_chain_length) {
    by_len[std::to_string(len)] = {{"correct", ct.first},
                                   {"total", ct.second},
                                   {"accuracy", static_cast<double>(ct.first) / static_cast<double>(ct.second)}};
  }
  return {{"questions", m.questions},
          {"accuracy", m.accuracy},
          {"retrieval_accuracy", m.retrieval_accuracy ? nlohmann::json(*m.retrieval_accuracy) : nlohmann::json()},
          {"chain_length_histogram", hist},
          {"accuracy_by_chain_length", by_len}};
}

inline std::vector<PreparedInstance> prepare_all(const std::vector<QaInstance>& data) {
  std::vector<PreparedInstance> out;
  out.reserve(data.size());
  for (const auto& q : data) out.push_back(prepare(q));
  return out;
}

inline EvalMetrics evaluate(const std::vector<PreparedInstance>& data, const Model& model, const TrainConfig& cfg,
                            const Resources& res) {
  const auto qenc = model.query_encoder();
  const auto feat = model.reader_featurizer();
  std::vector<QuestionRun> runs(data.size());
  parallel_for(data.size(), cfg.threads, [&](std::size_t i) {
    runs[i] = run_question(data[i], cfg, res, qenc, feat, model.reader);
  });

  EvalMetrics m;
  m.questions = data.size();
  std::size_t correct = 0, with_gold = 0, retrieved = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& q = *data[i].inst;
    const auto& gold_run = runs[i].choices[q.gold_idx];
    const bool ok = runs[i].prediction == q.gold_idx;
    correct += ok;
    m.predictions.push_back(runs[i].prediction);
    const std::size_t len = chain_length_histogram(gold_run.chains).modal_length;
    ++m.chain_length_histogram[len];
    auto& slot = m.by_chain_length[len];
    slot.first += ok;
    ++slot.second;
    // Gold chains are only consulted when the mode allows supervision.
    if (cfg.mode == TrainMode::supervised_distant && q.gold_chain) {
      ++with_gold;
      const auto& pool = gold_run.retrieval.pool;
      retrieved += std::all_of(q.gold_chain->begin(), q.gold_chain->end(),
                               [&](const FactId& f) { return pool.contains(f); });
    }
  }
  if (!data.empty()) m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  if (with_gold > 0) m.retrieval_accuracy = static_cast<double>(retrieved) / static_cast<double>(with_gold);
  return m;
}

inline EvalMetrics evaluate(const std::vector<QaInstance>& data, const Model& model, const TrainConfig& cfg,
                            const Resources& res) {
  return evaluate(prepare_all(data), model, cfg, res);
}

// ---- training -------------------------------------------------------------

using MetricsSink = std::function<void(const nlohmann::json&)>;

struct TrainResult {
  Model model;
  std::vector<LossReport> steps;
  std::vector<EvalMetrics> dev;  // one per epoch when a dev set is given
};

inline void check_mode(const std::vector<QaInstance>& train, const TrainConfig& cfg) {
  if (cfg.mode != TrainMode::supervised_distant) return;
  const bool any = std::any_of(train.begin(), train.end(), [](const QaInstance& q) { return q.gold_chain.has_value(); });
  if (!any) throw ConfigError("supervised+distant mode needs gold chains in the training data; use distant-only");
}

struct StepOutcome {
  LossReport report;
  double reward_mean = 0.0;
};

// One mini-batch: forward passes, losses, gradients, parameter update.
inline StepOutcome train_step(const std::vector<const PreparedInstance*>& batch, Model& model, const TrainConfig& cfg,
                              const Resources& res, const VectorIndex& lindex, EncoderParams& velocity,
                              std::uint64_t step_seed) {
  const auto qenc = model.query_encoder();
  const auto feat = model.reader_featurizer();
  const std::size_t b = batch.size();
  std::vector<QuestionRun> runs(b);
  parallel_for(b, cfg.threads, [&](std::size_t i) {
    runs[i] = run_question(*batch[i], cfg, res, qenc, feat, model.reader);
  });

  std::vector<int> rewards;
  for (std::size_t i = 0; i < b; ++i) rewards.push_back(reward(runs[i].prediction, batch[i]->inst->gold_idx));
  const double r_bar = mean_reward(rewards);
  const bool supervised = cfg.mode == TrainMode::supervised_distant;

  // Sampled chains, active facts and gold chains of every question first:
  // each question's negatives come from the others.
  std::vector<std::vector<std::vector<FactId>>> sampled(b);
  std::vector<std::vector<FactId>> active(b), gold(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& cs = runs[i].choices[batch[i]->inst->gold_idx].chains;
    auto rng = make_rng(step_seed, i, 1);
    sampled[i] = sample_chains(cs, cfg.n_chains, rng);
    for (const auto& f : cs.active_facts) {
      if (lindex.contains(f)) active[i].push_back(f);
    }
    if (supervised && batch[i]->inst->gold_chain) gold[i] = *batch[i]->inst->gold_chain;
  }
  auto others_at = [&](std::size_t i, Direction dir, bool use_gold) {
    std::vector<std::vector<FactId>> out;
    for (std::size_t o = 0; o < b; ++o) {
      if (o == i) continue;
      if (use_gold) {
        if (!gold[o].empty()) out.push_back(traversal_order(gold[o], dir));
      } else {
        for (const auto& c : sampled[o]) out.push_back(traversal_order(c, dir));
      }
    }
    return out;
  };

  EncoderParams grad(model.query.buckets, model.query.dim);
  LossContext ctx{qenc, lindex, &grad};
  Vec reader_grad(model.reader.weight.size(), 0.0);
  double bias_grad = 0.0;
  const double w = 1.0 / static_cast<double>(b);
  LossReport total;

  for (std::size_t i = 0; i < b; ++i) {
    const auto& q = *batch[i]->inst;
    const auto& run = runs[i];
    const std::string& h_plus = batch[i]->hypotheses[q.gold_idx];
    const auto& pool = run.choices[q.gold_idx].retrieval.pool.facts;
    LossReport rep;

    rep.l_reader = reader_loss(run.scores, q.gold_idx);
    const auto g = reader_loss_grad(run.scores, q.gold_idx);
    for (std::size_t j = 0; j < g.size(); ++j) {
      for (std::size_t k = 0; k < reader_grad.size(); ++k) reader_grad[k] += w * g[j] * run.features[j][k];
      bias_grad += w * g[j];
    }

    if (!gold[i].empty()) {
      auto rng = make_rng(step_seed, i, 2);
      ChainLikelihoodInput in{h_plus, gold[i],
                              step_negatives(gold[i], others_at(i, Direction::forward, true), pool,
                                             cfg.negatives_floor, lindex, rng)};
      rep.l_sup = -chain_log_prob(in, ctx, Direction::forward, -w);
    }

    if ((cfg.use_mle || cfg.use_rl) && !sampled[i].empty()) {
      std::vector<SampledChain> chains;
      auto rng = make_rng(step_seed, i, 3);
      for (const auto& c : sampled[i]) {
        SampledChain sc;
        sc.facts = c;
        sc.forward_negatives = step_negatives(traversal_order(c, Direction::forward),
                                              others_at(i, Direction::forward, false), pool, cfg.negatives_floor,
                                              lindex, rng);
        sc.backward_negatives = step_negatives(traversal_order(c, Direction::backward),
                                               others_at(i, Direction::backward, false), pool,
                                               cfg.negatives_floor, lindex, rng);
        chains.push_back(std::move(sc));
      }
      auto local = local_losses(chains, h_plus, rewards[i], r_bar, cfg.use_mle, cfg.use_rl, ctx, w);
      rep.l_mle_fwd = local.mle.forward;
      rep.l_mle_bwd = local.mle.backward;
      rep.l_rl = local.rl;
    }

    if (cfg.use_global && !active[i].empty()) {
      std::vector<std::vector<FactId>> negs;
      for (std::size_t o = 0; o < b; ++o) {
        if (o != i && !active[o].empty()) negs.push_back(active[o]);
      }
      rep.l_global = global_loss(active[i], h_plus, negs, ctx, w).value;
    }
    rep.finalize();
    total += rep;
  }

  // Plain SGD; momentum when configured.
  if (cfg.momentum > 0) {
    for (std::size_t k = 0; k < grad.weights.size(); ++k) {
      velocity.weights[k] = cfg.momentum * velocity.weights[k] + grad.weights[k];
      model.query.weights[k] -= cfg.learning_rate * velocity.weights[k];
    }
  } else {
    for (std::size_t k = 0; k < grad.weights.size(); ++k) model.query.weights[k] -= cfg.learning_rate * grad.weights[k];
  }
  for (std::size_t k = 0; k < reader_grad.size(); ++k) model.reader.weight[k] -= cfg.reader_learning_rate * reader_grad[k];
  model.reader.bias -= cfg.reader_learning_rate * bias_grad;

  return {total.scaled(w), r_bar};
}

inline TrainResult train(const std::vector<QaInstance>& train_set, const std::vector<QaInstance>& dev_set,
                         const TrainConfig& cfg, const Resources& res, const MetricsSink& sink = {},
                         std::optional<Model> start = std::nullopt) {
  validate(cfg);
  check_mode(train_set, cfg);
  if (train_set.empty()) throw DataError("training set is empty");
  if (res.index.empty()) throw EmptyIndex();

  TrainResult result;
  result.model = start ? *start : init_model(cfg, res.index.dim());
  if (result.model.query.dim != res.index.dim()) throw DimensionMismatch(res.index.dim(), result.model.query.dim);
  const VectorIndex lindex = loss_index(res);
  const auto train_p = prepare_all(train_set);
  const auto dev_p = prepare_all(dev_set);
  EncoderParams velocity(result.model.query.buckets, result.model.query.dim);

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_p.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(cfg.seed, epoch, 0, 7);
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start_i = 0; start_i < order.size(); start_i += cfg.batch_size) {
      std::vector<const PreparedInstance*> batch;
      for (std::size_t i = start_i; i < std::min(order.size(), start_i + cfg.batch_size); ++i) {
        batch.push_back(&train_p[order[i]]);
      }
      ++step;
      auto out = train_step(batch, result.model, cfg, res, lindex, velocity, cfg.seed * 1000003ULL + step);
      result.steps.push_back(out.report);
      if (sink) {
        sink({{"type", "step"},
              {"epoch", epoch},
              {"step", step},
              {"batch", batch.size()},
              {"reward_mean", out.reward_mean},
              {"loss", to_json(out.report)}});
      }
    }
    if (!dev_p.empty()) {
      auto m = evaluate(dev_p, result.model, cfg, res);
      if (sink) {
        auto j = to_json(m);
        j["type"] = "eval";
        j["split"] = "dev";
        j["epoch"] = epoch;
        sink(j);
      }
      result.dev.push_back(std::move(m));
    }
  }
  return result;
}

}  // namespace cgr
