#pragma once

// Semantic graph over one hypothesis AMR and the AMRs of its evidence pool.
//
// Nodes are concept labels (over-general concepts replaced by their constant
// value). Non-root nodes with the same label, compared case-insensitively,
// are unified into one node across all AMRs; AMR roots are never unified.
// Hypothesis nodes are split into question nodes (labels shared by every
// choice's hypothesis) and answer nodes (the rest). Edges are undirected and
// carry the set of facts whose AMR contributed them.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cgr/amr.hpp"
#include "cgr/errors.hpp"
#include "cgr/text.hpp"

namespace cgr {

using FactId = std::string;

enum class NodeKind { question, answer, evidence };
enum class EdgeOrigin { inner, inter };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::question: return "question";
    case NodeKind::answer: return "answer";
    case NodeKind::evidence: return "evidence";
  }
  return "?";
}

inline const char* to_string(EdgeOrigin o) { return o == EdgeOrigin::inner ? "inner" : "inter"; }

// Graph id used in provenance for the hypothesis AMR.
inline constexpr const char* kHypothesisGraph = "<hypothesis>";

struct NodeOrigin {
  std::string graph;  // kHypothesisGraph or a fact id
  std::string var;

  friend bool operator==(const NodeOrigin&, const NodeOrigin&) = default;
  friend auto operator<=>(const NodeOrigin&, const NodeOrigin&) = default;
};

struct SemNode {
  std::string label;  // display form, as first seen
  std::string key;    // lowercased label; unification key
  NodeKind kind = NodeKind::evidence;
  bool hypothesis = false;  // the HYPOTHESIS provenance marker
  std::set<FactId> facts;
  std::vector<NodeOrigin> merged_from;
  bool is_root = false;
};

struct SemEdge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  EdgeOrigin origin = EdgeOrigin::inner;
  bool hypothesis = false;
  std::set<FactId> facts;
};

struct SemanticGraph {
  std::vector<SemNode> nodes;
  std::vector<SemEdge> edges;
  std::vector<std::size_t> qnodes;
  std::vector<std::size_t> anodes;
  bool empty_pool = false;  // built without evidence; no chains can exist

  // Sorted neighbor lists.
  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(nodes.size());
    for (const auto& e : edges) {
      adj[e.a].push_back(e.b);
      adj[e.b].push_back(e.a);
    }
    for (auto& l : adj) std::sort(l.begin(), l.end());
    return adj;
  }

  const SemEdge* find_edge(std::size_t u, std::size_t v) const {
    if (u > v) std::swap(u, v);
    for (const auto& e : edges) {
      if (e.a == u && e.b == v) return &e;
    }
    return nullptr;
  }
};

struct GraphOptions {
  std::set<std::string> overgeneral{"name", "thing", "person", "amr-unknown", "multi-sentence"};
  // Constant roles that never stand in for a concept.
  std::set<std::string> ignored_roles{":polarity", ":mode", ":polite"};
};

// Over-general concepts that carry a constant value are replaced by the first
// such value; everything else keeps its concept.
inline std::string substitute_overgeneral(const AmrNode& node, const GraphOptions& opts = {}) {
  if (!opts.overgeneral.count(to_lower(node.instance))) return node.instance;
  for (const auto& a : node.attributes) {
    if (!opts.ignored_roles.count(a.role)) return a.value;
  }
  return node.instance;
}

inline std::set<std::string> label_keys(const AmrGraph& g, const GraphOptions& opts = {}) {
  std::set<std::string> keys;
  for (const auto& n : g.nodes) keys.insert(to_lower(substitute_overgeneral(n, opts)));
  return keys;
}

struct QaSplit {
  std::set<std::string> qnodes;
  std::set<std::string> anodes;
};

// Question labels are those present in every hypothesis; answer labels are
// the remaining labels of hypothesis `j`. Throws DegenerateSplit when choice
// `j` has no answer-only label.
inline QaSplit split_qa_nodes(const std::vector<AmrGraph>& hypotheses, std::size_t j,
                              const GraphOptions& opts = {}) {
  if (hypotheses.size() < 2) throw DataError("question/answer split needs at least two hypotheses");
  if (j >= hypotheses.size()) throw DataError("choice index out of range");
  QaSplit split;
  split.qnodes = label_keys(hypotheses[0], opts);
  for (std::size_t i = 1; i < hypotheses.size(); ++i) {
    auto keys = label_keys(hypotheses[i], opts);
    std::set<std::string> kept;
    std::set_intersection(split.qnodes.begin(), split.qnodes.end(), keys.begin(), keys.end(),
                          std::inserter(kept, kept.end()));
    split.qnodes = std::move(kept);
  }
  for (const auto& k : label_keys(hypotheses[j], opts)) {
    if (!split.qnodes.count(k)) split.anodes.insert(k);
  }
  if (split.anodes.empty()) throw DegenerateSplit(j);
  return split;
}

struct PoolAmr {
  FactId fact;
  AmrGraph amr;
};

inline SemanticGraph build_graph(std::size_t j, const std::vector<AmrGraph>& hypotheses, const std::vector<PoolAmr>& pool,
                                 const GraphOptions& opts = {}) {
  QaSplit split;
  const AmrGraph& hyp = hypotheses.at(j);
  try {
    split = split_qa_nodes(hypotheses, j, opts);
  } catch (const DegenerateSplit&) {
    // Every label is shared: the hypothesis root stands in as the answer.
    std::string root_key;
    if (const AmrNode* r = hyp.find(hyp.root)) root_key = to_lower(substitute_overgeneral(*r, opts));
    split.anodes = {root_key};
    split.qnodes = label_keys(hyp, opts);
    split.qnodes.erase(root_key);
  }

  SemanticGraph g;
  g.empty_pool = pool.empty();
  std::map<std::string, std::size_t> unified;  // key -> node id, non-root nodes only

  // Returns var -> node id for one AMR.
  auto add_graph = [&](const AmrGraph& amr, const std::string& graph_id, bool is_hyp) {
    std::map<std::string, std::size_t> var_to_node;
    for (const auto& n : amr.nodes) {
      std::string label = substitute_overgeneral(n, opts);
      std::string key = to_lower(label);
      const bool root = n.var == amr.root;
      std::size_t id;
      auto it = root ? unified.end() : unified.find(key);
      if (it != unified.end()) {
        id = it->second;
      } else {
        id = g.nodes.size();
        SemNode node;
        node.label = label;
        node.key = key;
        node.is_root = root;
        if (is_hyp) node.kind = split.qnodes.count(key) ? NodeKind::question : NodeKind::answer;
        g.nodes.push_back(std::move(node));
        if (!root) unified.emplace(key, id);
      }
      SemNode& node = g.nodes[id];
      node.merged_from.push_back({graph_id, n.var});
      if (is_hyp) {
        node.hypothesis = true;
      } else {
        node.facts.insert(graph_id);
      }
      var_to_node[n.var] = id;
    }
    return var_to_node;
  };

  struct RawEdge {
    std::size_t u, v;
    std::string graph;
    bool is_hyp;
  };
  std::vector<RawEdge> raw;

  auto hyp_vars = add_graph(hyp, kHypothesisGraph, true);
  for (const auto& e : hyp.edges) {
    std::size_t u = hyp_vars.at(e.src), v = hyp_vars.at(e.dst);
    NodeKind ku = g.nodes[u].kind, kv = g.nodes[v].kind;
    bool qa = (ku == NodeKind::question && kv == NodeKind::answer) ||
              (ku == NodeKind::answer && kv == NodeKind::question);
    if (!qa) raw.push_back({u, v, kHypothesisGraph, true});
  }
  for (const auto& p : pool) {
    auto vars = add_graph(p.amr, p.fact, false);
    for (const auto& e : p.amr.edges) raw.push_back({vars.at(e.src), vars.at(e.dst), p.fact, false});
  }

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_at;
  for (const auto& r : raw) {
    if (r.u == r.v) continue;  // duplicates unified into one node
    auto key = std::minmax(r.u, r.v);
    auto [it, fresh] = edge_at.emplace(key, g.edges.size());
    if (fresh) g.edges.push_back(SemEdge{key.first, key.second, EdgeOrigin::inner, false, {}});
    SemEdge& e = g.edges[it->second];
    if (r.is_hyp) {
      e.hypothesis = true;
    } else {
      e.facts.insert(r.graph);
    }
  }

  // An edge is inter-AMR when an endpoint was unified across graphs.
  auto spans_graphs = [&](std::size_t n) {
    const auto& m = g.nodes[n].merged_from;
    return std::any_of(m.begin(), m.end(), [&](const NodeOrigin& o) { return o.graph != m.front().graph; });
  };
  for (auto& e : g.edges) {
    if (spans_graphs(e.a) || spans_graphs(e.b)) e.origin = EdgeOrigin::inter;
  }

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].kind == NodeKind::question && g.nodes[i].hypothesis) g.qnodes.push_back(i);
    if (g.nodes[i].kind == NodeKind::answer && g.nodes[i].hypothesis) g.anodes.push_back(i);
  }
  return g;
}

}  // namespace cgr
