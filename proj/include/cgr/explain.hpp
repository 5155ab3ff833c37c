#pragma once

// Human-readable chains and Graphviz export.
//
// A chain renders as the labels where the supplying fact changes:
//   Question →natural-03 [3] →renew-01 [2] →solar [1] →panel (C)

#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgr/chains.hpp"
#include "cgr/semgraph.hpp"

namespace cgr {

inline constexpr const char* kNoChain = "no reasoning chain found";

inline std::string choice_letter(std::size_t idx) {
  if (idx < 26) return std::string(1, static_cast<char>('A' + idx));
  return std::to_string(idx);
}

inline std::string render_chain(const ReasoningChain& c, const SemanticGraph& g, std::size_t choice_idx) {
  std::string out = "Question";
  for (std::size_t i = 0; i < c.hop_facts.size(); ++i) {
    if (i == 0 || c.hop_facts[i] != c.hop_facts[i - 1]) {
      out += " →" + g.nodes[c.node_path[i]].label + " [" + c.hop_facts[i] + "]";
    }
  }
  out += " →" + g.nodes[c.node_path.back()].label + " (" + choice_letter(choice_idx) + ")";
  return out;
}

// One line per chain, or the no-chain sentinel.
inline std::string render_chains(const ChainSet& cs, const SemanticGraph& g, std::size_t choice_idx) {
  if (cs.chains.empty()) return std::string(kNoChain) + "\n";
  std::string out;
  for (const auto& c : cs.chains) out += render_chain(c, g, choice_idx) + "\n";
  return out;
}

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

// Node fill by kind; inter-graph edges dashed; edges on `highlight` chains pink.
inline std::string to_dot(const SemanticGraph& g, const std::vector<ReasoningChain>& highlight = {},
                          const std::string& name = "semantic_graph") {
  std::set<std::pair<std::size_t, std::size_t>> on_chain;
  for (const auto& c : highlight) {
    for (std::size_t i = 0; i + 1 < c.node_path.size(); ++i) {
      on_chain.insert(std::minmax(c.node_path[i], c.node_path[i + 1]));
    }
  }
  std::ostringstream o;
  o << "graph " << dot_quote(name) << " {\n  node [style=filled, fontname=\"Helvetica\"];\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    const char* fill = n.kind == NodeKind::question ? "lightblue" : n.kind == NodeKind::answer ? "palegreen" : "white";
    std::string facts;
    for (const auto& f : n.facts) facts += (facts.empty() ? "" : ",") + f;
    o << "  n" << i << " [label=" << dot_quote(facts.empty() ? n.label : n.label + "\n[" + facts + "]")
      << ", fillcolor=" << fill << ", kind=" << to_string(n.kind) << (n.is_root ? ", shape=box" : "") << "];\n";
  }
  for (const auto& e : g.edges) {
    std::string facts;
    for (const auto& f : e.facts) facts += (facts.empty() ? "" : ",") + f;
    o << "  n" << e.a << " -- n" << e.b << " [style=" << (e.origin == EdgeOrigin::inter ? "dashed" : "solid");
    if (!facts.empty()) o << ", label=" << dot_quote(facts);
    if (on_chain.count({e.a, e.b})) o << ", color=pink, penwidth=3";
    o << "];\n";
  }
  o << "}\n";
  return o.str();
}

inline nlohmann::json to_json(const SemanticGraph& g) {
  using nlohmann::json;
  json nodes = json::array(), edges = json::array();
  for (const auto& n : g.nodes) {
    json from = json::array();
    for (const auto& o : n.merged_from) from.push_back({{"graph", o.graph}, {"var", o.var}});
    nodes.push_back({{"label", n.label},
                     {"kind", to_string(n.kind)},
                     {"root", n.is_root},
                     {"hypothesis", n.hypothesis},
                     {"facts", n.facts},
                     {"merged_from", from}});
  }
  for (const auto& e : g.edges) {
    edges.push_back({{"a", e.a}, {"b", e.b}, {"origin", to_string(e.origin)}, {"hypothesis", e.hypothesis}, {"facts", e.facts}});
  }
  return {{"nodes", nodes}, {"edges", edges}, {"empty_pool", g.empty_pool}};
}

}  // namespace cgr
