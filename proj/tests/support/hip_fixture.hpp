#pragma once

// A small, fully populated projector input (detail tree, overview cells, pads)
// plus the finite-difference harness used by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "hgtok/hidto.hpp"
#include "hgtok/hip.hpp"
#include "hgtok/trainer.hpp"
#include "oracles.hpp"

namespace hgtok::fixture {

struct HipSample {
  Matrix<double> features;
  IncidencePattern pattern;
  std::size_t detail_size = 0;
  std::vector<int> order_targets;
  std::vector<SlotPair> pairs;
  HipConfig config;
};

// budgets [3,2] with a 2-hop overview: 1 + 3 + 6 + 2 * 4 = 18 slots.
inline HipSample small_sample(std::uint64_t seed, std::size_t d_core = 16, std::size_t d_sidecar = 8,
                              std::size_t d_llm = 32, std::size_t d_text = 8) {
  std::mt19937_64 rng(seed);
  Hypergraph h;
  Center c;
  do {
    h = oracle::random_hypergraph(rng, 12, 10, 5);
    c = {CenterRole::kVertex, h.vertex_id(rng() % h.num_vertices())};
  } while (h.incident(h.vertex_index(c.id)).empty());
  TemplateSpec spec;
  spec.layer_budgets = {3, 2};
  spec.overview_hops = 2;
  const Template t = Template::build(spec);
  const HidtoSequence seq = serialize(h, c, t, rng());
  const SemanticProvider psi = SemanticProvider::stub(d_text, rng());
  const auto states = propagate(h, psi, spec.buckets, make_bucket_vectors(spec.buckets.num_order_buckets(), d_text, 1),
                                spec.overview_hops);
  const auto cells = overview_aggregate(h, c, spec.overview_hops, spec.buckets, states);
  HipSample s;
  s.features = encapsulate(h, seq, t, psi, cells).features;
  s.pattern = seq.pattern();
  s.detail_size = seq.detail_size;
  s.order_targets = order_targets(h, seq, spec.buckets);
  for (const auto& r : sample_relation_pairs(seq, 12, rng())) s.pairs.emplace_back(r.i, r.j);
  s.config = HipConfig{d_text, spec.struct_dim(), d_core, d_sidecar, d_llm, spec.buckets.num_order_buckets()};
  return s;
}

// Random linear read-out of every projector output; its gradient with respect
// to the outputs is the read-out itself.
struct Readout {
  Matrix<double> tok, ord, rel;
};

inline Readout random_readout(const HipSample& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Readout r{Matrix<double>(s.features.rows(), s.config.d_llm),
            Matrix<double>(s.features.rows(), s.config.num_order_buckets), Matrix<double>(s.pairs.size(), 3)};
  for (auto& x : r.tok.storage()) x = n(rng);
  for (std::size_t i = 0; i < r.ord.rows(); ++i)
    for (std::size_t k = 0; k < r.ord.cols(); ++k) r.ord(i, k) = s.order_targets[i] >= 0 ? n(rng) : 0.0;
  for (auto& x : r.rel.storage()) x = n(rng);
  return r;
}

// Every read-out target, flattened: tokens, order logits, relation logits.
inline std::vector<double> outputs(const HipParams<double>& p, const HipSample& s) {
  const auto cache = hip_forward<double>(p, s.features.cview(), s.pattern);
  const auto ord = aux_ord_logits<double>(cache, p, s.order_targets);
  const auto rel = aux_rel_logits<double>(cache, p, s.pairs, s.detail_size);
  std::vector<double> out(cache.tokens.storage());
  out.insert(out.end(), ord.logits.storage().begin(), ord.logits.storage().end());
  out.insert(out.end(), rel.storage().begin(), rel.storage().end());
  return out;
}

inline std::vector<double> readout_weights(const Readout& r) {
  std::vector<double> w(r.tok.storage());
  w.insert(w.end(), r.ord.storage().begin(), r.ord.storage().end());
  w.insert(w.end(), r.rel.storage().begin(), r.rel.storage().end());
  return w;
}

inline double objective(const HipParams<double>& p, const HipSample& s, const Readout& r) {
  const auto y = outputs(p, s);
  const auto w = readout_weights(r);
  double j = 0;
  for (std::size_t i = 0; i < y.size(); ++i) j += w[i] * y[i];
  return j;
}

inline HipParams<double> analytic_gradient(const HipParams<double>& p, const HipSample& s, const Readout& r) {
  const auto cache = hip_forward<double>(p, s.features.cview(), s.pattern);
  HipParams<double> g = HipParams<double>::zeros(p.config);
  g.generation = p.generation;
  hip_backward<double>(cache, p, {r.tok.cview(), r.ord.cview(), s.pairs, r.rel.cview()}, g);
  return g;
}

// |a - b| / max(|a|, |b|, floor): relative where the gradient is material and
// absolute (scaled by floor) where it is numerically zero.
inline double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheck {
  double max_rel = 0;
  std::size_t worst = 0;
  std::size_t checked = 0;
  std::vector<double> numeric, analytic;  // per checked index, in order
};

inline GradCheck finite_difference_check(HipParams<double> p, const HipSample& s, const Readout& r,
                                         const std::vector<std::size_t>& indices, double step, double floor) {
  const HipParams<double> g = analytic_gradient(p, s, r);
  const auto w = readout_weights(r);
  GradCheck out;
  for (std::size_t i : indices) {
    const double keep = p.data[i];
    p.data[i] = keep + step;
    const auto up = outputs(p, s);
    p.data[i] = keep - step;
    const auto down = outputs(p, s);
    p.data[i] = keep;
    // Central difference of the objective, differenced per output before the
    // read-out so the long read-out sum does not add its own cancellation.
    double fd = 0;
    for (std::size_t k = 0; k < w.size(); ++k) fd += w[k] * (up[k] - down[k]);
    fd /= 2 * step;
    out.numeric.push_back(fd);
    out.analytic.push_back(g.data[i]);
    const double err = relative_error(fd, g.data[i], floor);
    if (err > out.max_rel) {
      out.max_rel = err;
      out.worst = i;
    }
    ++out.checked;
  }
  return out;
}

}  // namespace hgtok::fixture
