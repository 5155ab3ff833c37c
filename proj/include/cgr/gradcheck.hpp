#pragma once

// Central finite-difference check of an analytic gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "cgr/encoder.hpp"

namespace cgr {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t coordinates = 64;  // at least 50 are always checked
  std::uint64_t seed = 0;
  double floor = 1e-6;  // below this magnitude the error is effectively absolute
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// `loss(x, grad)` returns the loss at x and, when grad is non-null, adds the
// analytic gradient into it. Coordinates are sampled mostly from the support
// of the analytic gradient, since a sparse encoder leaves most rows at zero.
inline GradCheckResult grad_check(
    const std::function<double(const std::vector<double>&, std::vector<double>*)>& loss, std::vector<double> x,
    const GradCheckOptions& opts = {}) {
  std::vector<double> analytic(x.size(), 0.0);
  loss(x, &analytic);

  std::vector<std::size_t> support, rest;
  for (std::size_t i = 0; i < x.size(); ++i) (analytic[i] != 0.0 ? support : rest).push_back(i);
  std::mt19937_64 rng(opts.seed);
  std::shuffle(support.begin(), support.end(), rng);
  std::shuffle(rest.begin(), rest.end(), rng);

  const std::size_t want = std::min(x.size(), std::max<std::size_t>(opts.coordinates, 50));
  const std::size_t from_rest = std::min(rest.size(), std::max<std::size_t>(want / 8, want - std::min(want, support.size())));
  std::vector<std::size_t> coords(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(from_rest));
  for (std::size_t i = 0; i < support.size() && coords.size() < want; ++i) coords.push_back(support[i]);

  GradCheckResult r;
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + opts.eps;
    const double up = loss(x, nullptr);
    x[i] = saved - opts.eps;
    const double down = loss(x, nullptr);
    x[i] = saved;
    const double numeric = (up - down) / (2 * opts.eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), opts.floor});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic[i] - numeric) / denom);
    ++r.checked;
  }
  return r;
}

inline GradCheckResult grad_check(const std::function<double(const EncoderParams&, EncoderParams*)>& loss,
                                  const EncoderParams& params, const GradCheckOptions& opts = {}) {
  auto flat = [&](const std::vector<double>& x, std::vector<double>* g) {
    EncoderParams p(params.buckets, params.dim);
    p.weights = x;
    if (g == nullptr) return loss(p, nullptr);
    EncoderParams grad(params.buckets, params.dim);
    const double v = loss(p, &grad);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += grad.weights[i];
    return v;
  };
  return grad_check(flat, params.weights, opts);
}

}  // namespace cgr
