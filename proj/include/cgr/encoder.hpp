#pragma once

// Query encoders. The hashing encoder replaces a pretrained transformer at
// desk scale: tokens are hashed into buckets and the embedding is the mean of
// the bucket rows of a trainable matrix. It is linear in its parameters, so
// gradients flow back to exactly the rows a text touched.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cgr/errors.hpp"
#include "cgr/text.hpp"

namespace cgr {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  // Four partial sums: lets the compiler overlap the multiply-adds.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0, n = a.size();
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

class QueryEncoder {
 public:
  virtual ~QueryEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual Vec encode(std::string_view text) const = 0;
};

// Row-major buckets x dim matrix.
struct EncoderParams {
  std::size_t buckets = 4096;
  std::size_t dim = 64;
  std::vector<double> weights;

  EncoderParams() = default;
  EncoderParams(std::size_t b, std::size_t d) : buckets(b), dim(d), weights(b * d, 0.0) {}

  // Rows drawn from N(0, 1/dim) so each row has roughly unit norm.
  static EncoderParams random(std::size_t buckets, std::size_t dim, std::uint64_t seed) {
    EncoderParams p(buckets, dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    for (auto& w : p.weights) w = dist(rng);
    return p;
  }

  std::span<double> row(std::size_t b) { return {weights.data() + b * dim, dim}; }
  std::span<const double> row(std::size_t b) const { return {weights.data() + b * dim, dim}; }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

// Bucket -> weight, sorted by bucket. Weights sum to 1 (mean pooling).
using SparseFeatures = std::vector<std::pair<std::uint32_t, double>>;

class HashingEncoder final : public QueryEncoder {
 public:
  HashingEncoder() = default;
  explicit HashingEncoder(EncoderParams params) : params_(std::move(params)) {}

  std::size_t dim() const override { return params_.dim; }
  std::size_t buckets() const { return params_.buckets; }
  const EncoderParams& params() const { return params_; }
  EncoderParams& params() { return params_; }

  std::uint32_t bucket(std::string_view token) const {
    return static_cast<std::uint32_t>(fnv1a(token) % params_.buckets);
  }

  SparseFeatures features(std::string_view text) const {
    auto tokens = tokenize(text);
    std::map<std::uint32_t, double> counts;
    for (const auto& t : tokens) counts[bucket(t)] += 1.0;
    SparseFeatures f;
    f.reserve(counts.size());
    const double n = static_cast<double>(tokens.size());
    for (auto [b, c] : counts) f.emplace_back(b, c / n);
    return f;
  }

  Vec encode(const SparseFeatures& f) const {
    Vec v(params_.dim, 0.0);
    for (auto [b, w] : f) {
      auto r = params_.row(b);
      for (std::size_t k = 0; k < v.size(); ++k) v[k] += w * r[k];
    }
    return v;
  }

  // Texts with no tokens encode to the zero vector.
  Vec encode(std::string_view text) const override { return encode(features(text)); }

  // grad += scale * d(encode(f))^T g, i.e. each touched row receives its
  // pooling weight times g.
  void accumulate_grad(const SparseFeatures& f, std::span<const double> g, double scale,
                       EncoderParams& grad) const {
    if (g.size() != params_.dim) throw DimensionMismatch(params_.dim, g.size());
    for (auto [b, w] : f) {
      auto r = grad.row(b);
      for (std::size_t k = 0; k < r.size(); ++k) r[k] += scale * w * g[k];
    }
  }

 private:
  EncoderParams params_;
};

// Fixed evidence-side encoding: the hashing encoder's output scaled to unit
// length. Evidence vectors are computed once and never trained.
inline Vec encode_evidence(const HashingEncoder& enc, std::string_view text) {
  Vec v = enc.encode(text);
  double n = std::sqrt(dot(v, v));
  if (n > 0) {
    for (auto& x : v) x /= n;
  }
  return v;
}

// Precomputed query embeddings keyed by exact query text.
class LookupEncoder final : public QueryEncoder {
 public:
  LookupEncoder(std::size_t dim, std::unordered_map<std::string, Vec> table)
      : dim_(dim), table_(std::move(table)) {
    for (const auto& [text, v] : table_) {
      if (v.size() != dim_) throw DimensionMismatch(dim_, v.size());
    }
  }

  std::size_t dim() const override { return dim_; }

  Vec encode(std::string_view text) const override {
    auto it = table_.find(std::string(text));
    if (it == table_.end()) throw UnknownQuery(std::string(text));
    return it->second;
  }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, Vec> table_;
};

}  // namespace cgr
