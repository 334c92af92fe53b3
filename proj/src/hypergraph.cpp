#include "hgtok/hypergraph.hpp"

#include <algorithm>
#include <set>

#include "hgtok/error.hpp"

namespace hgtok {

Hypergraph::Hypergraph(std::vector<VertexRecord> vertices, std::vector<HyperedgeRecord> hyperedges,
                       std::optional<std::size_t> num_classes)
    : vertices_(std::move(vertices)), hyperedges_(std::move(hyperedges)) {
  std::sort(vertices_.begin(), vertices_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(hyperedges_.begin(), hyperedges_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < vertices_.size(); ++i) {
    if (vertices_[i].id == vertices_[i - 1].id) fail_data("duplicate vertex id " + std::to_string(vertices_[i].id));
  }
  for (std::size_t i = 1; i < hyperedges_.size(); ++i) {
    if (hyperedges_[i].id == hyperedges_[i - 1].id)
      fail_data("duplicate hyperedge id " + std::to_string(hyperedges_[i].id));
  }

  std::vector<std::size_t> degree(vertices_.size(), 0);
  member_index_.reserve(hyperedges_.size() * 3);
  member_offset_.reserve(hyperedges_.size() + 1);
  for (auto& e : hyperedges_) {
    if (e.members.empty()) fail_data("hyperedge " + std::to_string(e.id) + " has no members");
    std::sort(e.members.begin(), e.members.end());
    if (std::adjacent_find(e.members.begin(), e.members.end()) != e.members.end())
      fail_data("hyperedge " + std::to_string(e.id) + " has duplicate members");
    for (VertexId m : e.members) {
      auto idx = find_vertex(m);
      if (!idx)
        fail_data("dangling member: hyperedge " + std::to_string(e.id) + " references missing vertex " +
                  std::to_string(m));
      member_index_.push_back(*idx);
      ++degree[*idx];
    }
    member_offset_.push_back(member_index_.size());
  }

  incident_offset_.assign(vertices_.size() + 1, 0);
  for (std::size_t v = 0; v < vertices_.size(); ++v) incident_offset_[v + 1] = incident_offset_[v] + degree[v];
  incident_index_.assign(member_index_.size(), 0);
  std::vector<std::size_t> cursor(incident_offset_.begin(), incident_offset_.end() - 1);
  // Hyperedges are visited in ascending order, so incidence lists come out sorted.
  for (Index e = 0; e < hyperedges_.size(); ++e) {
    for (Index v : members(e)) incident_index_[cursor[v]++] = e;
  }

  std::size_t max_label = 0;
  bool any_label = false;
  for (const auto& v : vertices_) {
    if (v.label) {
      if (*v.label < 0) fail_data("negative vertex label");
      max_label = std::max<std::size_t>(max_label, static_cast<std::size_t>(*v.label));
      any_label = true;
    }
  }
  for (const auto& e : hyperedges_) {
    if (e.label) {
      if (*e.label < 0) fail_data("negative hyperedge label");
      max_label = std::max<std::size_t>(max_label, static_cast<std::size_t>(*e.label));
      any_label = true;
    }
  }
  num_classes_ = num_classes.value_or(any_label ? max_label + 1 : 0);
  if (any_label && num_classes_ <= max_label) fail_data("label exceeds declared class count");
}

Hypergraph Hypergraph::from_edges(const std::vector<std::vector<VertexId>>& edges) {
  std::set<VertexId> ids;
  for (const auto& e : edges) ids.insert(e.begin(), e.end());
  return from_edges(std::vector<VertexId>(ids.begin(), ids.end()), edges);
}

Hypergraph Hypergraph::from_edges(const std::vector<VertexId>& vertices,
                                  const std::vector<std::vector<VertexId>>& edges) {
  std::vector<VertexRecord> vs;
  vs.reserve(vertices.size());
  for (VertexId v : vertices) vs.push_back({v, std::nullopt, std::nullopt});
  std::vector<HyperedgeRecord> es;
  es.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) es.push_back({i, edges[i], std::nullopt, std::nullopt});
  return Hypergraph(std::move(vs), std::move(es));
}

std::optional<Index> Hypergraph::find_vertex(VertexId id) const {
  auto it = std::lower_bound(vertices_.begin(), vertices_.end(), id,
                             [](const VertexRecord& r, VertexId x) { return r.id < x; });
  if (it == vertices_.end() || it->id != id) return std::nullopt;
  return static_cast<Index>(it - vertices_.begin());
}

std::optional<Index> Hypergraph::find_hyperedge(HyperedgeId id) const {
  auto it = std::lower_bound(hyperedges_.begin(), hyperedges_.end(), id,
                             [](const HyperedgeRecord& r, HyperedgeId x) { return r.id < x; });
  if (it == hyperedges_.end() || it->id != id) return std::nullopt;
  return static_cast<Index>(it - hyperedges_.begin());
}

Index Hypergraph::vertex_index(VertexId id) const {
  auto v = find_vertex(id);
  if (!v) fail_data("unknown vertex " + std::to_string(id));
  return *v;
}

Index Hypergraph::hyperedge_index(HyperedgeId id) const {
  auto e = find_hyperedge(id);
  if (!e) fail_data("unknown hyperedge " + std::to_string(id));
  return *e;
}

bool Hypergraph::contains(Index e, Index v) const {
  auto m = members(e);
  return std::binary_search(m.begin(), m.end(), v);
}

std::size_t vertex_degree(const Hypergraph& h, VertexId v) { return h.incident(h.vertex_index(v)).size(); }

std::size_t hyperedge_degree(const Hypergraph& h, HyperedgeId e) { return h.members(h.hyperedge_index(e)).size(); }

std::size_t IncidenceMatrix::row_sum(std::size_t r) const {
  std::size_t s = 0;
  for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c);
  return s;
}

std::size_t IncidenceMatrix::col_sum(std::size_t c) const {
  std::size_t s = 0;
  for (std::size_t r = 0; r < rows_; ++r) s += (*this)(r, c);
  return s;
}

IncidenceMatrix IncidenceMatrix::transposed() const {
  IncidenceMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

IncidenceMatrix incidence_matrix(const Hypergraph& h) {
  IncidenceMatrix b(h.num_vertices(), h.num_hyperedges());
  for (Index e = 0; e < h.num_hyperedges(); ++e)
    for (Index v : h.members(e)) b(v, e) = 1;
  return b;
}

PairMultiset clique_expand(const Hypergraph& h) {
  PairMultiset out;
  for (Index e = 0; e < h.num_hyperedges(); ++e) {
    auto m = h.members(e);
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = i + 1; j < m.size(); ++j) ++out[{h.vertex_id(m[i]), h.vertex_id(m[j])}];
  }
  return out;
}

std::uint64_t total_multiplicity(const PairMultiset& pairs) {
  std::uint64_t n = 0;
  for (const auto& [pair, count] : pairs) n += count;
  return n;
}

Hypergraph dual(const Hypergraph& h) {
  std::vector<VertexRecord> dv;
  dv.reserve(h.num_hyperedges());
  for (const auto& e : h.hyperedge_records()) {
    dv.push_back({e.id, e.text ? e.text : std::optional<std::string>("hyperedge " + std::to_string(e.id)), e.label});
  }
  std::vector<HyperedgeRecord> de;
  for (Index v = 0; v < h.num_vertices(); ++v) {
    auto inc = h.incident(v);
    if (inc.empty()) continue;
    HyperedgeRecord rec{h.vertex_id(v), {}, h.vertex(v).text, h.vertex(v).label};
    for (Index e : inc) rec.members.push_back(h.hyperedge_id(e));
    de.push_back(std::move(rec));
  }
  return Hypergraph(std::move(dv), std::move(de), h.num_classes());
}

CocitationResult build_cocitation(const std::map<SourceId, std::vector<SourceId>>& citations) {
  std::set<VertexId> vertex_ids;
  std::vector<HyperedgeRecord> edges;
  std::vector<SourceId> skipped;
  for (const auto& [source, cited] : citations) {
    std::set<VertexId> members;
    for (SourceId c : cited) {
      if (c != source) members.insert(c);
    }
    vertex_ids.insert(members.begin(), members.end());
    if (members.size() < 2) {
      skipped.push_back(source);
      continue;
    }
    edges.push_back({source, std::vector<VertexId>(members.begin(), members.end()), std::nullopt, std::nullopt});
  }
  std::vector<VertexRecord> vs;
  for (VertexId v : vertex_ids) vs.push_back({v, std::nullopt, std::nullopt});
  return {Hypergraph(std::move(vs), std::move(edges)), std::move(skipped)};
}

BucketScheme::BucketScheme() : BucketScheme({2, 4, 8, kUnbounded}, {1, 2, 4, kUnbounded}) {}

BucketScheme::BucketScheme(std::vector<std::uint32_t> order_bounds, std::vector<std::uint32_t> degree_bounds)
    : order_bounds_(std::move(order_bounds)), degree_bounds_(std::move(degree_bounds)) {
  for (auto* bounds : {&order_bounds_, &degree_bounds_}) {
    if (bounds->empty()) fail_usage("bucket scheme needs at least one bucket");
    for (std::size_t i = 1; i < bounds->size(); ++i) {
      if ((*bounds)[i] <= (*bounds)[i - 1]) fail_usage("bucket bounds must be strictly ascending");
    }
    // The top bucket is always open-ended.
    if (bounds->back() != kUnbounded) bounds->push_back(kUnbounded);
  }
}

namespace {
std::size_t bucket_for(const std::vector<std::uint32_t>& bounds, std::size_t x) {
  auto it = std::lower_bound(bounds.begin(), bounds.end(), x,
                             [](std::uint32_t b, std::size_t v) { return static_cast<std::size_t>(b) < v; });
  if (it == bounds.end()) return bounds.size() - 1;
  return static_cast<std::size_t>(it - bounds.begin());
}
}  // namespace

std::size_t BucketScheme::order_bucket(std::size_t r) const { return bucket_for(order_bounds_, r); }
std::size_t BucketScheme::degree_bucket(std::size_t d) const { return bucket_for(degree_bounds_, d); }

}  // namespace hgtok
