#pragma once

// PENMAN reading and writing for AMR graphs.
//
// A graph keeps nodes in introduction order and edges in text order. String
// and numeric constants become node attributes; a bare symbol in value
// position that names a variable introduced anywhere in the graph becomes an
// edge (re-entrancy), otherwise it is kept as a constant attribute.

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "cgr/errors.hpp"

namespace cgr {

struct AmrAttribute {
  std::string role;
  std::string value;

  friend bool operator==(const AmrAttribute&, const AmrAttribute&) = default;
};

struct AmrNode {
  std::string var;
  std::string instance;  // the concept
  std::vector<AmrAttribute> attributes;

  friend bool operator==(const AmrNode&, const AmrNode&) = default;
};

struct AmrEdge {
  std::string src;
  std::string role;
  std::string dst;

  friend bool operator==(const AmrEdge&, const AmrEdge&) = default;
  friend auto operator<=>(const AmrEdge& a, const AmrEdge& b) {
    return std::tie(a.src, a.role, a.dst) <=> std::tie(b.src, b.role, b.dst);
  }
};

struct AmrGraph {
  std::vector<AmrNode> nodes;
  std::vector<AmrEdge> edges;
  std::string root;

  const AmrNode* find(std::string_view var) const {
    for (const auto& n : nodes) {
      if (n.var == var) return &n;
    }
    return nullptr;
  }

  // Identical input text always yields an identical graph, so plain
  // equality is the determinism check.
  friend bool operator==(const AmrGraph&, const AmrGraph&) = default;
};

inline const std::string& root_var(const AmrGraph& g) { return g.root; }

// Equality up to node order and edge order: same root, same variable ->
// (concept, attributes) mapping, same multiset of edges.
inline bool structurally_equal(const AmrGraph& a, const AmrGraph& b) {
  if (a.root != b.root || a.nodes.size() != b.nodes.size() || a.edges.size() != b.edges.size()) {
    return false;
  }
  std::map<std::string, const AmrNode*> by_var;
  for (const auto& n : a.nodes) by_var[n.var] = &n;
  for (const auto& n : b.nodes) {
    auto it = by_var.find(n.var);
    if (it == by_var.end() || !(*it->second == n)) return false;
  }
  auto ea = a.edges;
  auto eb = b.edges;
  std::sort(ea.begin(), ea.end());
  std::sort(eb.begin(), eb.end());
  return ea == eb;
}

namespace detail {

enum class TokKind { LParen, RParen, Slash, Role, String, Symbol, End };

struct Token {
  TokKind kind;
  std::string text;
  std::size_t pos;
};

inline bool is_symbol_char(char c) {
  return !std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')' && c != '/' && c != '"' &&
         c != ':';
}

inline std::vector<Token> tokenize_penman(std::string_view text) {
  std::vector<Token> toks;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(') {
      toks.push_back({TokKind::LParen, "(", i++});
    } else if (c == ')') {
      toks.push_back({TokKind::RParen, ")", i++});
    } else if (c == '/') {
      toks.push_back({TokKind::Slash, "/", i++});
    } else if (c == '"') {
      std::size_t start = i++;
      std::string value;
      bool closed = false;
      while (i < text.size()) {
        if (text[i] == '\\' && i + 1 < text.size()) {
          value.push_back(text[i + 1]);
          i += 2;
        } else if (text[i] == '"') {
          ++i;
          closed = true;
          break;
        } else {
          value.push_back(text[i++]);
        }
      }
      if (!closed) throw SyntaxError(start, "unterminated string constant");
      toks.push_back({TokKind::String, std::move(value), start});
    } else if (c == ':') {
      std::size_t start = i++;
      while (i < text.size() && is_symbol_char(text[i])) ++i;
      if (i == start + 1) throw SyntaxError(start, "empty role name");
      toks.push_back({TokKind::Role, std::string(text.substr(start, i - start)), start});
    } else {
      std::size_t start = i;
      while (i < text.size() && is_symbol_char(text[i])) ++i;
      toks.push_back({TokKind::Symbol, std::string(text.substr(start, i - start)), start});
    }
  }
  toks.push_back({TokKind::End, "", text.size()});
  return toks;
}

class PenmanParser {
 public:
  explicit PenmanParser(std::string_view text) : toks_(tokenize_penman(text)) {}

  AmrGraph parse() {
    if (peek().kind == TokKind::End) throw SyntaxError(0, "empty input");
    graph_.root = parse_node();
    if (peek().kind == TokKind::RParen) throw SyntaxError(peek().pos, "unbalanced parentheses: unexpected ')'");
    if (peek().kind != TokKind::End) throw SyntaxError(peek().pos, "trailing content after graph");

    // Relations are resolved after the whole text is read because a
    // re-entrant reference may precede the variable's introduction.
    for (auto& rel : relations_) {
      if (rel.is_node || (!rel.quoted && introduced_.count(rel.value))) {
        graph_.edges.push_back({rel.src, rel.role, rel.value});
      } else {
        node_of(rel.src).attributes.push_back({rel.role, rel.value});
      }
    }
    return std::move(graph_);
  }

 private:
  struct Relation {
    std::string src;
    std::string role;
    std::string value;
    bool is_node;
    bool quoted;
  };

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ == toks_.size() - 1 ? pos_ : pos_++]; }

  AmrNode& node_of(const std::string& var) {
    for (auto& n : graph_.nodes) {
      if (n.var == var) return n;
    }
    throw SyntaxError(0, "internal: unknown variable " + var);
  }

  std::string parse_node() {
    const Token& open = next();
    if (open.kind != TokKind::LParen) throw SyntaxError(open.pos, "expected '('");
    const Token& var = next();
    if (var.kind != TokKind::Symbol) throw SyntaxError(var.pos, "expected variable after '('");
    if (peek().kind != TokKind::Slash) throw SyntaxError(peek().pos, "missing '/' in concept introduction");
    next();
    const Token& inst = next();
    if (inst.kind != TokKind::Symbol && inst.kind != TokKind::String) {
      throw SyntaxError(inst.pos, "missing concept after '/'");
    }
    if (!introduced_.insert(var.text).second) {
      throw SyntaxError(var.pos, "duplicate variable introduction '" + var.text + "'");
    }
    graph_.nodes.push_back({var.text, inst.text, {}});
    const std::string self = var.text;

    while (peek().kind == TokKind::Role) {
      std::string role = next().text;
      const Token& value = peek();
      switch (value.kind) {
        case TokKind::LParen: {
          // Reserve the relation slot first so edges keep text order.
          std::size_t slot = relations_.size();
          relations_.push_back({self, role, {}, true, false});
          relations_[slot].value = parse_node();
          break;
        }
        case TokKind::String:
          relations_.push_back({self, role, next().text, false, true});
          break;
        case TokKind::Symbol:
          relations_.push_back({self, role, next().text, false, false});
          break;
        default:
          throw SyntaxError(value.pos, "role " + role + " has no value");
      }
    }
    const Token& close = peek();
    if (close.kind == TokKind::End) throw SyntaxError(close.pos, "unbalanced parentheses: missing ')'");
    if (close.kind != TokKind::RParen) throw SyntaxError(close.pos, "unexpected token '" + close.text + "'");
    next();
    return self;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  AmrGraph graph_;
  std::vector<Relation> relations_;
  std::unordered_set<std::string> introduced_;
};

inline bool is_bare_constant(const std::string& v) {
  if (v == "-" || v == "+") return true;
  if (v.empty()) return false;
  std::size_t i = (v[0] == '-') ? 1 : 0;
  bool digits = false, dot = false;
  for (; i < v.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(v[i]))) {
      digits = true;
    } else if (v[i] == '.' && !dot) {
      dot = true;
    } else {
      return false;
    }
  }
  return digits;
}

inline void append_quoted(std::string& out, const std::string& v) {
  out.push_back('"');
  for (char c : v) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace detail

// Throws SyntaxError on unbalanced parentheses, a missing '/', or a variable
// introduced twice.
inline AmrGraph parse_penman(std::string_view text) { return detail::PenmanParser(text).parse(); }

// Single-line PENMAN. Each node is introduced at its first visit in a
// depth-first walk from the root that follows edges in stored order.
inline std::string serialize(const AmrGraph& g) {
  std::map<std::string, const AmrNode*> by_var;
  for (const auto& n : g.nodes) by_var[n.var] = &n;
  std::map<std::string, std::vector<const AmrEdge*>> out_edges;
  for (const auto& e : g.edges) out_edges[e.src].push_back(&e);

  std::set<std::string> visited;
  std::string out;
  auto emit = [&](auto&& self, const std::string& var) -> void {
    visited.insert(var);
    const AmrNode& n = *by_var.at(var);
    out += "(" + n.var + " / ";
    if (!n.instance.empty() && std::all_of(n.instance.begin(), n.instance.end(), detail::is_symbol_char)) {
      out += n.instance;
    } else {
      detail::append_quoted(out, n.instance);
    }
    for (const auto& a : n.attributes) {
      out += " " + a.role + " ";
      if (detail::is_bare_constant(a.value)) {
        out += a.value;
      } else {
        detail::append_quoted(out, a.value);
      }
    }
    if (auto it = out_edges.find(var); it != out_edges.end()) {
      for (const AmrEdge* e : it->second) {
        out += " " + e->role + " ";
        if (visited.count(e->dst)) {
          out += e->dst;
        } else {
          self(self, e->dst);
        }
      }
    }
    out += ")";
  };
  emit(emit, g.root);
  return out;
}

// Splits a PENMAN file into graphs: blocks separated by blank lines, with
// '#' comment lines (AMR metadata) ignored.
inline std::vector<AmrGraph> parse_penman_blocks(std::string_view text) {
  std::vector<AmrGraph> graphs;
  std::string block;
  auto flush = [&] {
    bool has_content = std::any_of(block.begin(), block.end(),
                                   [](char c) { return !std::isspace(static_cast<unsigned char>(c)); });
    if (has_content) graphs.push_back(parse_penman(block));
    block.clear();
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
      flush();
    } else if (line[first] != '#') {
      block.append(line);
      block.push_back('\n');
    }
    start = end + 1;
  }
  flush();
  return graphs;
}

}  // namespace cgr
