#pragma once

// Reasoning chains: simple paths from a question node to an answer node
// whose interior nodes are all evidence nodes, mapped to the sequence of
// facts that supply the path's edges.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cgr/semgraph.hpp"

namespace cgr {

struct ReasoningChain {
  std::vector<FactId> facts;
  std::vector<std::size_t> node_path;
  std::vector<FactId> hop_facts;  // fact assigned to each edge of node_path

  friend bool operator==(const ReasoningChain&, const ReasoningChain&) = default;
};

struct ChainSet {
  std::vector<ReasoningChain> chains;
  std::set<FactId> active_facts;
};

struct ChainOptions {
  std::size_t max_path_len = 8;  // nodes, endpoints included
  std::size_t max_expansions = 4;  // fact sequences kept per node path
};

// Length first, then lexicographic.
inline bool chain_order(const std::vector<FactId>& a, const std::vector<FactId>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

struct FactAssignment {
  std::vector<FactId> facts;
  std::vector<FactId> hop_facts;
};

// Every way of attributing each edge of `node_path` to one of its source
// facts, with consecutive repeats collapsed. Sequences that revisit a fact
// are not chains and are dropped. Returns the `cap` best sequences under
// chain_order. Edges without fact provenance yield no assignment.
inline std::vector<FactAssignment> assign_facts(const std::vector<std::size_t>& node_path, const SemanticGraph& g,
                                                std::size_t cap = 4) {
  std::vector<const std::set<FactId>*> hops;
  for (std::size_t i = 0; i + 1 < node_path.size(); ++i) {
    const SemEdge* e = g.find_edge(node_path[i], node_path[i + 1]);
    if (e == nullptr || e->facts.empty()) return {};
    hops.push_back(&e->facts);
  }
  if (hops.empty()) return {};

  std::map<std::vector<FactId>, std::vector<FactId>, decltype(&chain_order)> found(&chain_order);
  std::vector<FactId> seq, assigned;
  auto walk = [&](auto&& self, std::size_t i) -> void {
    if (i == hops.size()) {
      found.emplace(seq, assigned);
      return;
    }
    for (const auto& f : *hops[i]) {
      assigned.push_back(f);
      if (!seq.empty() && seq.back() == f) {
        self(self, i + 1);
      } else if (std::find(seq.begin(), seq.end(), f) == seq.end()) {
        seq.push_back(f);
        self(self, i + 1);
        seq.pop_back();
      }
      assigned.pop_back();
    }
  };
  walk(walk, 0);

  std::vector<FactAssignment> out;
  for (auto& [facts, hop] : found) {
    if (out.size() >= cap) break;
    out.push_back({facts, hop});
  }
  return out;
}

inline std::vector<std::vector<FactId>> map_to_facts(const std::vector<std::size_t>& node_path, const SemanticGraph& g,
                                                     std::size_t cap = 4) {
  std::vector<std::vector<FactId>> out;
  for (auto& a : assign_facts(node_path, g, cap)) out.push_back(std::move(a.facts));
  return out;
}

// All simple question -> answer paths with evidence-only interiors, found by
// depth-first search from each question node in id order.
inline std::vector<std::vector<std::size_t>> question_answer_paths(const SemanticGraph& g, std::size_t max_path_len) {
  std::vector<std::vector<std::size_t>> paths;
  if (max_path_len < 3) return paths;  // no room for an interior node
  const auto adj = g.adjacency();
  std::vector<char> on_path(g.nodes.size(), 0);
  std::vector<std::size_t> path;

  auto dfs = [&](auto&& self, std::size_t u) -> void {
    for (std::size_t v : adj[u]) {
      if (on_path[v]) continue;
      const NodeKind k = g.nodes[v].kind;
      if (k == NodeKind::answer) {
        if (path.size() >= 2 && path.size() + 1 <= max_path_len) {
          path.push_back(v);
          paths.push_back(path);
          path.pop_back();
        }
      } else if (k == NodeKind::evidence && path.size() + 2 <= max_path_len) {
        on_path[v] = 1;
        path.push_back(v);
        self(self, v);
        path.pop_back();
        on_path[v] = 0;
      }
    }
  };
  for (std::size_t q : g.qnodes) {
    on_path[q] = 1;
    path.assign(1, q);
    dfs(dfs, q);
    on_path[q] = 0;
  }
  return paths;
}

inline ChainSet generate_chains(const SemanticGraph& g, const ChainOptions& opts = {}) {
  ChainSet cs;
  std::set<std::vector<FactId>> seen;
  for (const auto& path : question_answer_paths(g, opts.max_path_len)) {
    for (auto& a : assign_facts(path, g, opts.max_expansions)) {
      if (!seen.insert(a.facts).second) continue;  // first witness wins
      cs.chains.push_back({std::move(a.facts), path, std::move(a.hop_facts)});
    }
  }
  std::stable_sort(cs.chains.begin(), cs.chains.end(),
                   [](const ReasoningChain& a, const ReasoningChain& b) { return chain_order(a.facts, b.facts); });
  for (const auto& c : cs.chains) cs.active_facts.insert(c.facts.begin(), c.facts.end());
  return cs;
}

inline ChainSet generate_chains(const SemanticGraph& g, std::size_t max_path_len) {
  ChainOptions opts;
  opts.max_path_len = max_path_len;
  return generate_chains(g, opts);
}

struct ChainLengthHistogram {
  std::map<std::size_t, std::size_t> counts;
  std::size_t modal_length = 0;  // 0 when there are no chains
};

inline ChainLengthHistogram chain_length_histogram(const ChainSet& cs) {
  ChainLengthHistogram h;
  for (const auto& c : cs.chains) ++h.counts[c.facts.size()];
  std::size_t best = 0;
  for (auto [len, n] : h.counts) {
    if (n > best) {  // ascending keys: ties keep the shorter length
      best = n;
      h.modal_length = len;
    }
  }
  return h;
}

}  // namespace cgr
