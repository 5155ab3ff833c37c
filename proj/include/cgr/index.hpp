#pragma once

// Evidence storage: the immutable id -> (vector, text) index searched by the
// retriever, the binary embedding file, and the JSONL fact corpus.
//
// Embedding file layout (little-endian):
//   "CGRV" | u32 version = 1 | u32 dim | u64 count |
//   count x ( u32 id_len | id bytes (UTF-8) | dim x f32 )

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgr/encoder.hpp"
#include "cgr/errors.hpp"
#include "cgr/io.hpp"

namespace cgr {

using FactId = std::string;

struct IndexEntry {
  FactId id;
  Vec vector;
  std::string text;
};

class VectorIndex {
 public:
  VectorIndex() = default;

  VectorIndex(std::size_t dim, std::vector<IndexEntry> entries) : dim_(dim) {
    data_.reserve(entries.size() * dim);
    for (auto& e : entries) {
      if (e.vector.size() != dim) throw DimensionMismatch(dim, e.vector.size());
      if (!rows_.emplace(e.id, ids_.size()).second) throw DataError("duplicate fact id in index", e.id);
      ids_.push_back(std::move(e.id));
      texts_.push_back(std::move(e.text));
      data_.insert(data_.end(), e.vector.begin(), e.vector.end());
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  const FactId& id(std::size_t row) const { return ids_[row]; }
  const std::string& text(std::size_t row) const { return texts_[row]; }
  std::span<const double> vector(std::size_t row) const { return {data_.data() + row * dim_, dim_}; }

  std::optional<std::size_t> find(const FactId& id) const {
    auto it = rows_.find(id);
    if (it == rows_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const FactId& id) const { return rows_.count(id) != 0; }

  std::size_t row_of(const FactId& id) const {
    auto r = find(id);
    if (!r) throw UnknownFact(id);
    return *r;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<FactId> ids_;
  std::vector<std::string> texts_;
  std::vector<double> data_;
  std::unordered_map<FactId, std::size_t> rows_;
};

// ---- embedding file -------------------------------------------------------

struct Embedding {
  std::string id;
  std::vector<float> values;
};

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("truncated embedding file");
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

inline std::string encode_cgrv(std::uint32_t dim, const std::vector<Embedding>& rows) {
  std::string out = "CGRV";
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint32_t>(out, dim);
  detail::put_le<std::uint64_t>(out, rows.size());
  for (const auto& r : rows) {
    if (r.values.size() != dim) throw DimensionMismatch(dim, r.values.size());
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.id.size()));
    out += r.id;
    for (float f : r.values) detail::put_le<float>(out, f);
  }
  return out;
}

struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<Embedding> rows;
};

inline EmbeddingFile decode_cgrv(std::string_view bytes) {
  if (bytes.substr(0, 4) != "CGRV") throw DataError("bad embedding file magic");
  std::size_t pos = 4;
  auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != 1) throw DataError("unsupported embedding file version " + std::to_string(version));
  EmbeddingFile f;
  f.dim = detail::get_le<std::uint32_t>(bytes, pos);
  auto count = detail::get_le<std::uint64_t>(bytes, pos);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto len = detail::get_le<std::uint32_t>(bytes, pos);
    if (pos + len > bytes.size()) throw DataError("truncated embedding file");
    Embedding e;
    e.id.assign(bytes.data() + pos, len);
    pos += len;
    e.values.resize(f.dim);
    for (auto& v : e.values) v = detail::get_le<float>(bytes, pos);
    f.rows.push_back(std::move(e));
  }
  if (pos != bytes.size()) throw DataError("trailing bytes in embedding file");
  return f;
}

inline void write_cgrv(const std::filesystem::path& path, std::uint32_t dim, const std::vector<Embedding>& rows) {
  write_file_atomic(path, encode_cgrv(dim, rows));
}

inline EmbeddingFile read_cgrv(const std::filesystem::path& path) { return decode_cgrv(read_file(path)); }

// ---- corpus ---------------------------------------------------------------

struct CorpusRecord {
  FactId id;
  std::string text;
  std::optional<std::string> amr;
};

inline std::vector<CorpusRecord> parse_corpus_jsonl(std::string_view content) {
  std::vector<CorpusRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(content)) {
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      CorpusRecord r;
      r.id = j.at("id").get<std::string>();
      r.text = j.at("text").get<std::string>();
      if (j.contains("amr") && !j["amr"].is_null()) r.amr = j["amr"].get<std::string>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed corpus record: ") + e.what(), "line " + std::to_string(line_no));
    }
  }
  return out;
}

inline std::string corpus_to_jsonl(const std::vector<CorpusRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j{{"id", r.id}, {"text", r.text}};
    if (r.amr) j["amr"] = *r.amr;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path) {
  return parse_corpus_jsonl(read_file(path));
}

// Joins corpus text with embeddings by id. Every corpus record needs an
// embedding; embeddings without a corpus record are ignored.
inline VectorIndex make_index(const std::vector<CorpusRecord>& corpus, const EmbeddingFile& emb) {
  std::unordered_map<std::string, const Embedding*> by_id;
  for (const auto& e : emb.rows) by_id[e.id] = &e;
  std::vector<IndexEntry> entries;
  entries.reserve(corpus.size());
  for (const auto& r : corpus) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw MissingEmbedding(r.id);
    entries.push_back({r.id, Vec(it->second->values.begin(), it->second->values.end()), r.text});
  }
  return VectorIndex(emb.dim, std::move(entries));
}

// Index over an embedding file alone (e.g. an open-book file whose texts are
// the ids themselves when no corpus is supplied).
inline VectorIndex make_index(const EmbeddingFile& emb) {
  std::vector<IndexEntry> entries;
  for (const auto& e : emb.rows) entries.push_back({e.id, Vec(e.values.begin(), e.values.end()), e.id});
  return VectorIndex(emb.dim, std::move(entries));
}

// Embeds every corpus fact with the fixed evidence encoder.
inline std::vector<Embedding> embed_corpus(const std::vector<CorpusRecord>& corpus, const HashingEncoder& enc) {
  std::vector<Embedding> rows;
  rows.reserve(corpus.size());
  for (const auto& r : corpus) {
    Vec v = encode_evidence(enc, r.text);
    rows.push_back({r.id, std::vector<float>(v.begin(), v.end())});
  }
  return rows;
}

}  // namespace cgr
