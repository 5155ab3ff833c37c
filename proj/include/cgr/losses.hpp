#pragma once

// Chain-aware retriever losses and their analytic gradients with respect to
// the hashing query encoder. Evidence vectors are fixed; only query rows
// receive gradient.
//
// Chain probability: each step is a softmax over the step's fact and its
// negatives, scored against the query reformulated with all earlier facts of
// the traversal. Everything is accumulated in log space with the max score
// subtracted before exponentiation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgr/encoder.hpp"
#include "cgr/errors.hpp"
#include "cgr/index.hpp"
#include "cgr/retriever.hpp"

namespace cgr {

enum class Direction { forward, backward };

struct ChainLikelihoodInput {
  std::string hypothesis;
  std::vector<FactId> chain;  // forward order
  // Negatives for each traversal step, in traversal order for the direction
  // being scored.
  std::vector<std::vector<FactId>> negatives_per_step;
};

struct LossContext {
  const HashingEncoder& encoder;
  const VectorIndex& index;
  EncoderParams* grad = nullptr;  // accumulates d(loss)/d(params) when set
};

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

namespace detail {

inline std::size_t embedding_row(const VectorIndex& index, const FactId& id) {
  auto r = index.find(id);
  if (!r) throw MissingEmbedding(id);
  return *r;
}

inline std::vector<FactId> traversal(const std::vector<FactId>& chain, Direction dir) {
  std::vector<FactId> order = chain;
  if (dir == Direction::backward) std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace detail

// Per-step softmax over {e_t} followed by its negatives.
struct StepDistribution {
  std::vector<FactId> candidates;  // e_t first
  std::vector<double> probabilities;
};

// Returns log p(chain | hypothesis). When ctx.grad is set, adds
// grad_scale * d(log p)/d(params) to it.
inline double chain_log_prob(const ChainLikelihoodInput& in, const LossContext& ctx, Direction dir,
                             double grad_scale = 1.0, std::vector<StepDistribution>* steps = nullptr) {
  if (in.chain.empty()) throw DataError("chain is empty");
  if (in.negatives_per_step.size() != in.chain.size()) {
    throw DataError("negatives_per_step must have one entry per chain step");
  }
  const auto order = detail::traversal(in.chain, dir);
  const std::size_t dim = ctx.encoder.dim();
  std::string query = in.hypothesis;
  double log_p = 0.0;

  for (std::size_t t = 0; t < order.size(); ++t) {
    std::vector<std::size_t> rows{detail::embedding_row(ctx.index, order[t])};
    std::vector<FactId> ids{order[t]};
    for (const auto& neg : in.negatives_per_step[t]) {
      if (neg == order[t]) throw DataError("a step's fact appears among its own negatives", neg);
      if (std::find(ids.begin(), ids.end(), neg) != ids.end()) continue;
      rows.push_back(detail::embedding_row(ctx.index, neg));
      ids.push_back(neg);
    }

    const SparseFeatures feats = ctx.encoder.features(query);
    const Vec q = ctx.encoder.encode(feats);
    std::vector<double> s(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) s[i] = score(q, ctx.index.vector(rows[i]));
    const double lse = log_sum_exp(s);
    log_p += s[0] - lse;

    if (ctx.grad != nullptr || steps != nullptr) {
      std::vector<double> p(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) p[i] = std::exp(s[i] - lse);
      if (ctx.grad != nullptr && grad_scale != 0.0) {
        // d(s_0 - lse)/dq = v_pos - sum_i p_i v_i
        Vec g(dim, 0.0);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const double coef = (i == 0 ? 1.0 : 0.0) - p[i];
          auto v = ctx.index.vector(rows[i]);
          for (std::size_t k = 0; k < dim; ++k) g[k] += coef * v[k];
        }
        ctx.encoder.accumulate_grad(feats, g, grad_scale, *ctx.grad);
      }
      if (steps != nullptr) steps->push_back({ids, std::move(p)});
    }
    query = append_fact_text(query, ctx.index.text(rows[0]));
  }
  return log_p;
}

// Negative log-likelihood of the ordered gold chain under the correct
// choice's hypothesis.
inline double supervised_loss(const ChainLikelihoodInput& gold, const LossContext& ctx) {
  return -chain_log_prob(gold, ctx, Direction::forward, -1.0);
}

// A chain sampled from the generated chains, with negatives prepared for each
// traversal direction.
struct SampledChain {
  std::vector<FactId> facts;
  std::vector<std::vector<FactId>> forward_negatives;
  std::vector<std::vector<FactId>> backward_negatives;
};

inline ChainLikelihoodInput likelihood_input(const SampledChain& c, const std::string& h, Direction dir) {
  return {h, c.facts, dir == Direction::forward ? c.forward_negatives : c.backward_negatives};
}

struct MleLoss {
  double forward = 0.0;
  double backward = 0.0;
  bool no_chains = false;
};

inline MleLoss local_mle_loss(const std::vector<SampledChain>& chains, const std::string& h_plus,
                              const LossContext& ctx) {
  MleLoss out;
  if (chains.empty()) {
    out.no_chains = true;
    return out;
  }
  const double n = static_cast<double>(chains.size());
  for (const auto& c : chains) {
    out.forward -= chain_log_prob(likelihood_input(c, h_plus, Direction::forward), ctx, Direction::forward, -1.0 / n);
    out.backward -=
        chain_log_prob(likelihood_input(c, h_plus, Direction::backward), ctx, Direction::backward, -1.0 / n);
  }
  out.forward /= n;
  out.backward /= n;
  return out;
}

inline double mean_reward(const std::vector<int>& rewards) {
  if (rewards.empty()) return 0.0;
  double s = 0;
  for (int r : rewards) s += r;
  return s / static_cast<double>(rewards.size());
}

// Policy-gradient term. The advantage (reward - batch mean) is a constant
// multiplier; no gradient flows through it.
inline double rl_loss(const std::vector<SampledChain>& chains, const std::string& h_plus, int reward,
                      double batch_mean_reward, const LossContext& ctx) {
  if (chains.empty()) return 0.0;
  const double n = static_cast<double>(chains.size());
  const double advantage = static_cast<double>(reward) - batch_mean_reward;
  double sum = 0.0;
  for (const auto& c : chains) {
    sum += chain_log_prob(likelihood_input(c, h_plus, Direction::forward), ctx, Direction::forward, -advantage / n);
    sum += chain_log_prob(likelihood_input(c, h_plus, Direction::backward), ctx, Direction::backward, -advantage / n);
  }
  return -advantage * sum / n;
}

struct LocalLoss {
  MleLoss mle;
  double rl = 0.0;
};

// MLE and RL terms from one pass over the sampled chains. Disabled terms
// report 0 and contribute no gradient.
inline LocalLoss local_losses(const std::vector<SampledChain>& chains, const std::string& h_plus, int reward,
                              double batch_mean_reward, bool use_mle, bool use_rl, const LossContext& ctx,
                              double grad_weight = 1.0) {
  LocalLoss out;
  if (chains.empty()) {
    out.mle.no_chains = true;
    return out;
  }
  const double n = static_cast<double>(chains.size());
  const double advantage = static_cast<double>(reward) - batch_mean_reward;
  const double scale = grad_weight * ((use_mle ? -1.0 / n : 0.0) + (use_rl ? -advantage / n : 0.0));
  double fwd = 0.0, bwd = 0.0;
  for (const auto& c : chains) {
    fwd += chain_log_prob(likelihood_input(c, h_plus, Direction::forward), ctx, Direction::forward, scale);
    bwd += chain_log_prob(likelihood_input(c, h_plus, Direction::backward), ctx, Direction::backward, scale);
  }
  if (use_mle) {
    out.mle.forward = -fwd / n;
    out.mle.backward = -bwd / n;
  }
  if (use_rl) out.rl = -advantage * (fwd + bwd) / n;
  return out;
}

struct GlobalLoss {
  double value = 0.0;
  bool empty_active_facts = false;
};

// Contrastive loss between the hypothesis and the mean score of its chain
// facts, against the other questions' chain-fact sets in the batch. The
// hypothesis is encoded without reformulation.
inline GlobalLoss global_loss(const std::vector<FactId>& active_facts, const std::string& h_plus,
                              const std::vector<std::vector<FactId>>& negative_pools, const LossContext& ctx,
                              double grad_scale = 1.0) {
  GlobalLoss out;
  if (active_facts.empty()) {
    out.empty_active_facts = true;
    return out;
  }
  const std::size_t dim = ctx.encoder.dim();
  const SparseFeatures feats = ctx.encoder.features(h_plus);
  const Vec q = ctx.encoder.encode(feats);

  std::vector<double> logits;
  std::vector<Vec> means;
  auto add_pool = [&](const std::vector<FactId>& pool) {
    double z = 0.0;
    Vec m(dim, 0.0);
    for (const auto& id : pool) {
      auto v = ctx.index.vector(detail::embedding_row(ctx.index, id));
      z += score(q, v);
      for (std::size_t k = 0; k < dim; ++k) m[k] += v[k];
    }
    const double n = static_cast<double>(pool.size());
    for (auto& x : m) x /= n;
    logits.push_back(z / n);
    means.push_back(std::move(m));
  };
  add_pool(active_facts);
  for (const auto& pool : negative_pools) {
    if (!pool.empty()) add_pool(pool);
  }
  const double lse = log_sum_exp(logits);
  out.value = lse - logits[0];

  if (ctx.grad != nullptr && grad_scale != 0.0) {
    // d(loss)/dq = sum_k p_k m_k - m_0
    Vec g(dim, 0.0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double coef = std::exp(logits[i] - lse) - (i == 0 ? 1.0 : 0.0);
      for (std::size_t k = 0; k < dim; ++k) g[k] += coef * means[i][k];
    }
    ctx.encoder.accumulate_grad(feats, g, grad_scale, *ctx.grad);
  }
  return out;
}

struct LossReport {
  double l_sup = 0.0;
  double l_mle_fwd = 0.0;
  double l_mle_bwd = 0.0;
  double l_rl = 0.0;
  double l_local = 0.0;
  double l_global = 0.0;
  double l_reader = 0.0;
  double total = 0.0;

  // Recomputes the derived terms from the components.
  void finalize() {
    l_local = l_mle_fwd + l_mle_bwd + l_rl;
    total = l_reader + l_sup + l_local + l_global;
  }

  LossReport& operator+=(const LossReport& o) {
    l_sup += o.l_sup;
    l_mle_fwd += o.l_mle_fwd;
    l_mle_bwd += o.l_mle_bwd;
    l_rl += o.l_rl;
    l_global += o.l_global;
    l_reader += o.l_reader;
    finalize();
    return *this;
  }

  LossReport scaled(double f) const {
    LossReport r = *this;
    r.l_sup *= f;
    r.l_mle_fwd *= f;
    r.l_mle_bwd *= f;
    r.l_rl *= f;
    r.l_global *= f;
    r.l_reader *= f;
    r.finalize();
    return r;
  }
};

inline nlohmann::json to_json(const LossReport& r) {
  return {{"l_sup", r.l_sup},     {"l_mle_fwd", r.l_mle_fwd}, {"l_mle_bwd", r.l_mle_bwd},
          {"l_rl", r.l_rl},       {"l_local", r.l_local},     {"l_global", r.l_global},
          {"l_reader", r.l_reader}, {"total", r.total}};
}

}  // namespace cgr
