#pragma once

// Test-only generators and independent oracles shared by the unit tests and
// the acceptance binary.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cgr/cgr.hpp"

namespace cgr::testkit {

inline std::string source_dir() { return CGR_SOURCE_DIR; }

// ---- AMR ------------------------------------------------------------------

// Random tree-shaped AMR (plus occasional re-entrancies) with attributes of
// every value kind the serializer distinguishes.
inline AmrGraph random_amr(std::mt19937_64& rng, std::size_t max_nodes = 12) {
  static const char* const concepts[] = {"want-01", "boy", "girl", "go-02", "city", "name", "thing", "sun",
                                         "solar",   "panel", "collect-01", "person", "believe-01", "energy"};
  static const char* const roles[] = {":ARG0", ":ARG1", ":ARG2", ":mod", ":location", ":ARG0-of", ":domain", ":op1"};
  static const char* const values[] = {"-", "+", "42", "-7", "3.5", "Paris", "New York", "say \"hi\"", "a\\b", "imperative"};
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  AmrGraph g;
  const std::size_t n = 1 + pick(max_nodes);
  for (std::size_t i = 0; i < n; ++i) {
    AmrNode node{"v" + std::to_string(i), concepts[pick(std::size(concepts))], {}};
    for (std::size_t a = pick(3); a > 0; --a) node.attributes.push_back({roles[pick(std::size(roles))], values[pick(std::size(values))]});
    g.nodes.push_back(std::move(node));
    if (i > 0) g.edges.push_back({"v" + std::to_string(pick(i)), roles[pick(std::size(roles))], "v" + std::to_string(i)});
  }
  for (std::size_t r = pick(3); r > 0 && n > 1; --r) {
    g.edges.push_back({"v" + std::to_string(pick(n)), roles[pick(std::size(roles))], "v" + std::to_string(pick(n))});
  }
  g.root = "v0";
  return g;
}

// ---- semantic graphs ------------------------------------------------------

// Random graph with provenance-carrying edges, built directly (no AMR).
inline SemanticGraph random_semantic_graph(std::mt19937_64& rng, std::size_t max_nodes = 12, std::size_t facts = 4) {
  auto unit = [&] { return std::uniform_real_distribution<double>(0, 1)(rng); };
  SemanticGraph g;
  const std::size_t n = 3 + std::uniform_int_distribution<std::size_t>(0, max_nodes - 3)(rng);
  for (std::size_t i = 0; i < n; ++i) {
    SemNode node;
    node.label = "c" + std::to_string(i);
    node.key = node.label;
    const double u = unit();
    node.kind = i == 0 ? NodeKind::question : i == 1 ? NodeKind::answer
              : u < 0.2 ? NodeKind::question : u < 0.35 ? NodeKind::answer : NodeKind::evidence;
    node.hypothesis = node.kind != NodeKind::evidence;
    g.nodes.push_back(node);
    if (node.kind == NodeKind::question) g.qnodes.push_back(i);
    if (node.kind == NodeKind::answer) g.anodes.push_back(i);
  }
  const double density = 0.15 + 0.35 * unit();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (unit() >= density) continue;
      SemEdge e{a, b, EdgeOrigin::inner, false, {}};
      for (std::size_t f = 0; f < facts; ++f) {
        if (unit() < 0.35) e.facts.insert("f" + std::to_string(f));
      }
      if (e.facts.empty() && unit() < 0.8) e.facts.insert("f" + std::to_string(rng() % facts));
      if (e.facts.empty()) e.hypothesis = true;
      g.edges.push_back(std::move(e));
    }
  }
  return g;
}

// All simple paths by breadth-first growth over (path, visited-mask) states.
inline std::vector<std::vector<std::size_t>> brute_force_paths(const SemanticGraph& g, std::size_t max_len) {
  const std::size_t n = g.nodes.size();
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (const auto& e : g.edges) adj[e.a][e.b] = adj[e.b][e.a] = 1;
  // Every simple path from every start, kept if it runs question -> evidence* -> answer.
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> p;
  std::uint32_t mask = 0;
  std::function<void()> walk = [&] {
    if (p.size() >= 3 && g.nodes[p.front()].kind == NodeKind::question && g.nodes[p.back()].kind == NodeKind::answer) {
      bool interior_ok = true;
      for (std::size_t i = 1; i + 1 < p.size(); ++i) interior_ok &= g.nodes[p[i]].kind == NodeKind::evidence;
      if (interior_ok) out.push_back(p);
    }
    if (p.size() >= max_len) return;
    for (std::size_t v = 0; v < n; ++v) {
      if (adj[p.back()][v] && !(mask & (1u << v))) {
        p.push_back(v);
        mask |= 1u << v;
        walk();
        mask &= ~(1u << v);
        p.pop_back();
      }
    }
  };
  for (std::size_t s = 0; s < n; ++s) {
    p = {s};
    mask = 1u << s;
    walk();
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::set<FactId> edge_facts(const SemanticGraph& g, std::size_t u, std::size_t v) {
  for (const auto& e : g.edges) {
    if ((e.a == u && e.b == v) || (e.a == v && e.b == u)) return e.facts;
  }
  return {};
}

// Every source assignment by odometer enumeration; collapse, drop repeats,
// keep the `cap` best under (length, lexicographic).
inline std::vector<std::vector<FactId>> brute_force_assignments(const std::vector<std::size_t>& path,
                                                                const SemanticGraph& g, std::size_t cap) {
  std::vector<std::vector<FactId>> hops;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    auto f = edge_facts(g, path[i], path[i + 1]);
    if (f.empty()) return {};
    hops.emplace_back(f.begin(), f.end());
  }
  std::set<std::vector<FactId>> seqs;
  std::vector<std::size_t> digit(hops.size(), 0);
  for (;;) {
    std::vector<FactId> seq;
    for (std::size_t i = 0; i < hops.size(); ++i) {
      const auto& f = hops[i][digit[i]];
      if (seq.empty() || seq.back() != f) seq.push_back(f);
    }
    std::set<FactId> uniq(seq.begin(), seq.end());
    if (uniq.size() == seq.size()) seqs.insert(seq);
    std::size_t i = 0;
    while (i < digit.size() && ++digit[i] == hops[i].size()) digit[i++] = 0;
    if (i == digit.size()) break;
  }
  std::vector<std::vector<FactId>> out(seqs.begin(), seqs.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  if (out.size() > cap) out.resize(cap);
  return out;
}

struct OracleChain {
  std::vector<FactId> facts;
  std::vector<std::size_t> node_path;
};

inline std::vector<OracleChain> brute_force_chains(const SemanticGraph& g, std::size_t max_len, std::size_t cap = 4) {
  std::vector<OracleChain> out;
  std::set<std::vector<FactId>> seen;
  for (const auto& p : brute_force_paths(g, max_len)) {
    for (auto& f : brute_force_assignments(p, g, cap)) {
      if (seen.insert(f).second) out.push_back({f, p});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const OracleChain& a, const OracleChain& b) {
    return a.facts.size() != b.facts.size() ? a.facts.size() < b.facts.size() : a.facts < b.facts;
  });
  return out;
}

// ---- retrieval ------------------------------------------------------------

// Integer-valued query encoder: exact dot products, frequent ties.
class IntegerEncoder final : public QueryEncoder {
 public:
  explicit IntegerEncoder(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  Vec encode(std::string_view text) const override {
    Vec v(dim_);
    std::uint64_t h = fnv1a(text);
    for (auto& x : v) {
      h = h * 6364136223846793005ULL + 1442695040888963407ULL;
      x = static_cast<double>(static_cast<int>((h >> 33) % 7) - 3);
    }
    return v;
  }

 private:
  std::size_t dim_;
};

inline VectorIndex random_integer_index(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::vector<IndexEntry> entries;
  std::uniform_int_distribution<int> val(-2, 2);
  for (std::size_t i = 0; i < n; ++i) {
    Vec v(dim);
    for (auto& x : v) x = val(rng);
    char id[24];
    std::snprintf(id, sizeof id, "e%02zu", i);
    entries.push_back({id, v, std::string("fact ") + id});
  }
  return VectorIndex(dim, std::move(entries));
}

inline double naive_dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Every extension of every surviving beam by every unused fact, ranked
// globally; the pool is each beam's exact top-k by a full sort.
inline RetrievalResult exhaustive_beam_oracle(const std::string& h, const VectorIndex& index, const QueryEncoder& enc,
                                              std::size_t k, std::size_t t_max,
                                              BeamRanking ranking = BeamRanking::cumulative) {
  RetrievalResult out;
  std::set<FactId> pool_seen;
  std::vector<QueryState> beams{{1, h, 0.0, {}, {}}};
  for (std::size_t t = 1; t <= t_max; ++t) {
    std::vector<QueryState> all;
    std::vector<FactId> iter;
    std::set<FactId> iter_seen;
    for (const auto& b : beams) {
      const Vec q = enc.encode(b.text);
      std::vector<std::pair<double, FactId>> scored;
      for (std::size_t r = 0; r < index.size(); ++r) {
        if (std::find(b.picked.begin(), b.picked.end(), index.id(r)) != b.picked.end()) continue;
        const double s = naive_dot(q, index.vector(r));
        scored.push_back({s, index.id(r)});
        QueryState next = b;
        next.t = b.t + 1;
        next.text = b.text + " [SEP] " + index.text(r);
        next.picked.push_back(index.id(r));
        next.score_so_far = b.score_so_far + s;
        next.step_scores.push_back(s);
        all.push_back(std::move(next));
      }
      std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
      });
      for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
        if (pool_seen.insert(scored[i].second).second) out.pool.facts.push_back(scored[i].second);
        if (iter_seen.insert(scored[i].second).second) iter.push_back(scored[i].second);
      }
    }
    out.pool.per_iteration.push_back(iter);
    auto key = [&](const QueryState& s) {
      return ranking == BeamRanking::last_step ? s.step_scores.back() : s.score_so_far;
    };
    std::sort(all.begin(), all.end(), [&](const QueryState& a, const QueryState& b) {
      return key(a) != key(b) ? key(a) > key(b) : a.picked < b.picked;
    });
    if (all.size() > k) all.resize(k);
    if (all.empty()) break;
    beams = std::move(all);
  }
  out.beams = beams;
  return out;
}

// ---- losses ---------------------------------------------------------------

// Small fixture: hashing encoder, an index whose texts are random words.
struct LossFixture {
  HashingEncoder enc;
  VectorIndex index;
  std::vector<FactId> ids;
};

inline LossFixture make_loss_fixture(std::mt19937_64& rng, std::size_t dim = 16, std::size_t facts = 12,
                                     std::size_t buckets = 64) {
  static const char* const words[] = {"sun", "panel", "energy", "renew", "natural", "power", "light",
                                      "plant", "grow", "water", "heat", "cold", "metal", "wood"};
  LossFixture fx{HashingEncoder(EncoderParams::random(buckets, dim, rng())), {}, {}};
  std::vector<IndexEntry> entries;
  std::normal_distribution<double> nd(0.0, 0.6);
  for (std::size_t i = 0; i < facts; ++i) {
    std::string text;
    for (int w = 0; w < 3; ++w) text += std::string(w ? " " : "") + words[rng() % std::size(words)];
    Vec v(dim);
    for (auto& x : v) x = nd(rng);
    fx.ids.push_back("f" + std::to_string(i));
    entries.push_back({fx.ids.back(), v, text});
  }
  fx.index = VectorIndex(dim, std::move(entries));
  return fx;
}

// log p(chain) by direct products of per-step softmax probabilities.
inline double naive_chain_log_prob(const ChainLikelihoodInput& in, const HashingEncoder& enc, const VectorIndex& index,
                                   Direction dir) {
  auto order = in.chain;
  if (dir == Direction::backward) std::reverse(order.begin(), order.end());
  std::string q = in.hypothesis;
  double p = 1.0;
  for (std::size_t t = 0; t < order.size(); ++t) {
    const Vec qv = enc.encode(q);
    const double pos = std::exp(naive_dot(qv, index.vector(index.row_of(order[t]))));
    double denom = pos;
    std::set<FactId> uniq(in.negatives_per_step[t].begin(), in.negatives_per_step[t].end());
    for (const auto& n : uniq) denom += std::exp(naive_dot(qv, index.vector(index.row_of(n))));
    p *= pos / denom;
    q = q + " [SEP] " + index.text(index.row_of(order[t]));
  }
  return std::log(p);
}

// ---- DOT ------------------------------------------------------------------

// Recursive-descent checker for the Graphviz DOT grammar (graph, subgraph,
// node/edge/attr statements, ID forms: identifiers, numerals, quoted and
// HTML strings). Returns an empty string when the text parses.
class DotValidator {
 public:
  explicit DotValidator(std::string text) : s_(std::move(text)) {}

  std::string validate() {
    try {
      ws();
      if (keyword("strict")) ws();
      if (keyword("digraph")) directed_ = true;
      else if (!keyword("graph")) fail("expected graph or digraph");
      ws();
      if (peek() != '{') id();
      ws();
      expect('{');
      stmt_list();
      expect('}');
      ws();
      if (pos_ != s_.size()) fail("trailing content");
      return {};
    } catch (const std::string& e) {
      return e + " at offset " + std::to_string(pos_);
    }
  }

 private:
  [[noreturn]] void fail(const std::string& m) { throw m; }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void ws() {
    for (;;) {
      while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (s_.compare(pos_, 2, "//") == 0 || peek() == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (s_.compare(pos_, 2, "/*") == 0) {
        auto e = s_.find("*/", pos_ + 2);
        if (e == std::string::npos) fail("unterminated comment");
        pos_ = e + 2;
      } else {
        return;
      }
    }
  }
  void expect(char c) {
    ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
    ws();
  }
  bool keyword(const char* kw) {
    const std::size_t n = std::strlen(kw);
    if (pos_ + n > s_.size()) return false;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::tolower(static_cast<unsigned char>(s_[pos_ + i])) != kw[i]) return false;
    }
    if (pos_ + n < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_ + n])) || s_[pos_ + n] == '_')) {
      return false;
    }
    pos_ += n;
    return true;
  }
  bool at_id() const {
    char c = peek();
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '"' || c == '<' || c == '-' || c == '.' ||
           static_cast<unsigned char>(c) >= 0x80;
  }
  void id() {
    ws();
    char c = peek();
    if (c == '"') {
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] != '"') pos_ += (s_[pos_] == '\\') ? 2 : 1;
      if (pos_ >= s_.size()) fail("unterminated string");
      ++pos_;
    } else if (c == '<') {
      int depth = 0;
      do {
        if (peek() == '<') ++depth;
        if (peek() == '>') --depth;
        if (pos_ >= s_.size()) fail("unterminated HTML string");
        ++pos_;
      } while (depth > 0);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.') {
      std::size_t start = pos_;
      if (c == '-') ++pos_;
      bool digits = false, dot = false;
      while (std::isdigit(static_cast<unsigned char>(peek())) || (peek() == '.' && !dot)) {
        if (peek() == '.') dot = true;
        else digits = true;
        ++pos_;
      }
      if (!digits) {
        pos_ = start;
        fail("bad numeral");
      }
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || static_cast<unsigned char>(c) >= 0x80) {
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
             static_cast<unsigned char>(peek()) >= 0x80) {
        ++pos_;
      }
    } else {
      fail("expected ID");
    }
    ws();
  }
  void attr_list() {
    while (peek() == '[') {
      expect('[');
      while (peek() != ']') {
        id();
        expect('=');
        id();
        if (peek() == ',' || peek() == ';') expect(peek());
      }
      expect(']');
    }
  }
  void node_id() {
    id();
    if (peek() == ':') {
      expect(':');
      id();
      if (peek() == ':') {
        expect(':');
        id();
      }
    }
  }
  void subgraph() {
    if (keyword("subgraph")) {
      ws();
      if (peek() != '{') id();
    }
    expect('{');
    stmt_list();
    expect('}');
  }
  bool edge_op() {
    ws();
    if (s_.compare(pos_, 2, "--") == 0 || s_.compare(pos_, 2, "->") == 0) {
      if ((s_[pos_ + 1] == '>') != directed_) fail("edge operator does not match graph type");
      pos_ += 2;
      ws();
      return true;
    }
    return false;
  }
  void endpoint() {
    if (peek() == '{' || keyword("subgraph")) {
      if (peek() != '{') {
        ws();
        if (peek() != '{') id();
      }
      expect('{');
      stmt_list();
      expect('}');
    } else {
      node_id();
    }
  }
  void stmt_list() {
    ws();
    while (peek() != '}' && pos_ < s_.size()) {
      stmt();
      if (peek() == ';') expect(';');
    }
  }
  void stmt() {
    ws();
    std::size_t save = pos_;
    if (keyword("graph") || keyword("node") || keyword("edge")) {
      ws();
      if (peek() == '[') {
        attr_list();
        return;
      }
      pos_ = save;
    }
    if (peek() == '{' || keyword("subgraph")) {
      pos_ = save;
      subgraph();
      while (edge_op()) endpoint();
      attr_list();
      return;
    }
    if (!at_id()) fail("expected statement");
    node_id();
    if (peek() == '=') {
      expect('=');
      id();
      return;
    }
    bool edge = false;
    while (edge_op()) {
      endpoint();
      edge = true;
    }
    (void)edge;
    attr_list();
  }

  std::string s_;
  std::size_t pos_ = 0;
  bool directed_ = false;
};

inline std::string validate_dot(const std::string& text) { return DotValidator(text).validate(); }

}  // namespace cgr::testkit
