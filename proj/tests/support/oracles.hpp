#pragma once

// Independent reference computations shared by the unit and acceptance suites.
// They use different machinery from the library (dense Eigen products, plain
// std::set BFS) so that agreement is meaningful.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "hgtok/hidto.hpp"
#include "hgtok/hypergraph.hpp"
#include "hgtok/semantic.hpp"

namespace hgtok::oracle {

inline Hypergraph random_hypergraph(std::mt19937_64& rng, std::size_t max_v, std::size_t max_e,
                                    std::size_t max_order = 6) {
  const std::size_t n = 1 + rng() % max_v, m = rng() % (max_e + 1);
  std::vector<VertexId> vs(n);
  for (std::size_t i = 0; i < n; ++i) vs[i] = 3 * i + 1;  // sparse ids
  std::vector<std::vector<VertexId>> edges;
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<VertexId> pool = vs;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(1 + rng() % std::min(n, max_order));
    edges.push_back(pool);
  }
  return Hypergraph::from_edges(vs, edges);
}

struct DenseStates {
  std::vector<Eigen::MatrixXd> vertex;  // t = 0..H
  std::vector<Eigen::MatrixXd> edge;    // t = 1..H at [t-1]
};

// Matrix form of the alternating mean propagation:
//   M_e(t) = D_e^-1 B^T M_v(t-1)
//   M_v(t) = D_v^-1 B (M_e(t) + O)   with O[e] = o_{bucket(r(e))}
// Rows of isolated vertices carry over.
inline DenseStates propagation(const Hypergraph& h, const SemanticProvider& psi, const BucketScheme& buckets,
                               const Matrix<double>& offsets, std::size_t hops) {
  const auto n = static_cast<Eigen::Index>(h.num_vertices()), m = static_cast<Eigen::Index>(h.num_hyperedges());
  const auto d = static_cast<Eigen::Index>(psi.dim());
  const IncidenceMatrix inc = incidence_matrix(h);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index v = 0; v < n; ++v)
    for (Eigen::Index e = 0; e < m; ++e) b(v, e) = inc(v, e);
  const Eigen::VectorXd dv = b.rowwise().sum(), de = b.colwise().sum().transpose();
  Eigen::MatrixXd o(m, d);
  for (Eigen::Index e = 0; e < m; ++e) {
    const std::size_t k = buckets.order_bucket(static_cast<std::size_t>(de(e)));
    for (Eigen::Index j = 0; j < d; ++j) o(e, j) = offsets(k, static_cast<std::size_t>(j));
  }
  Eigen::MatrixXd mv(n, d);
  std::vector<double> row(psi.dim());
  for (Eigen::Index v = 0; v < n; ++v) {
    psi.vertex(h, static_cast<Index>(v), row);
    for (Eigen::Index j = 0; j < d; ++j) mv(v, j) = row[static_cast<std::size_t>(j)];
  }
  Eigen::VectorXd inv_de = de.cwiseInverse(), inv_dv(n);
  for (Eigen::Index v = 0; v < n; ++v) inv_dv(v) = dv(v) > 0 ? 1.0 / dv(v) : 0.0;

  DenseStates s;
  s.vertex.push_back(mv);
  for (std::size_t t = 1; t <= hops; ++t) {
    Eigen::MatrixXd me = inv_de.asDiagonal() * (b.transpose() * s.vertex.back());
    Eigen::MatrixXd next = inv_dv.asDiagonal() * (b * (me + o));
    for (Eigen::Index v = 0; v < n; ++v)
      if (dv(v) == 0) next.row(v) = s.vertex.back().row(v);
    s.edge.push_back(me);
    s.vertex.push_back(next);
  }
  return s;
}

// Plain BFS over the bipartite incidence graph with one visited set; returns
// the hyperedge indices first reached at each hyperedge layer.
inline std::vector<std::set<Index>> hyperedge_layers(const Hypergraph& h, const Center& c, std::size_t hops) {
  std::set<Index> seen_v, seen_e, frontier_v, frontier_e;
  std::vector<std::set<Index>> layers;
  if (c.role == CenterRole::kVertex) {
    frontier_v = {h.vertex_index(c.id)};
    seen_v = frontier_v;
  } else {
    const Index e0 = h.hyperedge_index(c.id);
    seen_e = {e0};
    for (Index v : h.members(e0)) frontier_v.insert(v);
    seen_v = frontier_v;
  }
  for (std::size_t hop = 0; hop < hops; ++hop) {
    std::set<Index> layer;
    for (Index v : frontier_v)
      for (Index e : h.incident(v))
        if (!seen_e.count(e)) layer.insert(e);
    seen_e.insert(layer.begin(), layer.end());
    std::set<Index> next_v;
    for (Index e : layer)
      for (Index v : h.members(e))
        if (!seen_v.count(v)) next_v.insert(v);
    seen_v.insert(next_v.begin(), next_v.end());
    frontier_v = next_v;
    layers.push_back(layer);
  }
  return layers;
}

}  // namespace hgtok::oracle
