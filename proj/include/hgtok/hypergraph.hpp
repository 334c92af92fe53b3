#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hgtok {

using VertexId = std::uint64_t;
using HyperedgeId = std::uint64_t;
using Index = std::uint32_t;

struct VertexRecord {
  VertexId id = 0;
  std::optional<std::string> text;
  std::optional<int> label;
};

struct HyperedgeRecord {
  HyperedgeId id = 0;
  std::vector<VertexId> members;
  std::optional<std::string> text;
  std::optional<int> label;
};

// Immutable hypergraph H = (V, E, X, Z) with optional labels.
//
// Objects are addressed by opaque ids at the API boundary and by dense indices
// (position in ascending-id order) internally. Member lists and incidence lists
// are stored as ascending index arrays so that everything downstream iterates
// in canonical order.
class Hypergraph {
 public:
  Hypergraph() = default;

  // Validates and canonicalizes: records are sorted by id, members ascending.
  // Throws a data error on duplicate ids, duplicate members, empty hyperedges,
  // or members that reference a missing vertex.
  Hypergraph(std::vector<VertexRecord> vertices, std::vector<HyperedgeRecord> hyperedges,
             std::optional<std::size_t> num_classes = std::nullopt);

  // Convenience: vertices are the union of all members; hyperedge ids are 0..M-1.
  static Hypergraph from_edges(const std::vector<std::vector<VertexId>>& edges);
  // Same, with an explicit vertex set (isolated vertices allowed).
  static Hypergraph from_edges(const std::vector<VertexId>& vertices,
                               const std::vector<std::vector<VertexId>>& edges);

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_hyperedges() const { return hyperedges_.size(); }
  std::size_t num_incidences() const { return member_index_.size(); }
  std::size_t num_classes() const { return num_classes_; }

  VertexId vertex_id(Index v) const { return vertices_[v].id; }
  HyperedgeId hyperedge_id(Index e) const { return hyperedges_[e].id; }

  std::optional<Index> find_vertex(VertexId id) const;
  std::optional<Index> find_hyperedge(HyperedgeId id) const;
  // Throwing lookups (unknown-vertex / unknown-hyperedge data errors).
  Index vertex_index(VertexId id) const;
  Index hyperedge_index(HyperedgeId id) const;

  std::span<const Index> members(Index e) const {
    return {member_index_.data() + member_offset_[e], member_offset_[e + 1] - member_offset_[e]};
  }
  std::span<const Index> incident(Index v) const {
    return {incident_index_.data() + incident_offset_[v], incident_offset_[v + 1] - incident_offset_[v]};
  }
  bool contains(Index e, Index v) const;

  const VertexRecord& vertex(Index v) const { return vertices_[v]; }
  const HyperedgeRecord& hyperedge(Index e) const { return hyperedges_[e]; }
  const std::vector<VertexRecord>& vertex_records() const { return vertices_; }
  const std::vector<HyperedgeRecord>& hyperedge_records() const { return hyperedges_; }

 private:
  std::vector<VertexRecord> vertices_;
  std::vector<HyperedgeRecord> hyperedges_;
  std::vector<std::size_t> member_offset_{0};
  std::vector<Index> member_index_;
  std::vector<std::size_t> incident_offset_{0};
  std::vector<Index> incident_index_;
  std::size_t num_classes_ = 0;
};

std::size_t vertex_degree(const Hypergraph& h, VertexId v);
std::size_t hyperedge_degree(const Hypergraph& h, HyperedgeId e);

// Dense 0/1 incidence matrix, rows in vertex order, columns in hyperedge order.
class IncidenceMatrix {
 public:
  IncidenceMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c]; }
  std::uint8_t& operator()(std::size_t r, std::size_t c) { return bits_[r * cols_ + c]; }
  std::size_t row_sum(std::size_t r) const;
  std::size_t col_sum(std::size_t c) const;
  IncidenceMatrix transposed() const;
  bool operator==(const IncidenceMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> bits_;
};

IncidenceMatrix incidence_matrix(const Hypergraph& h);

// Unordered pair stored as (min, max).
using VertexPair = std::pair<VertexId, VertexId>;
using PairMultiset = std::map<VertexPair, std::uint32_t>;

// All C(r, 2) member pairs of every hyperedge, counted once per containing hyperedge.
PairMultiset clique_expand(const Hypergraph& h);
std::uint64_t total_multiplicity(const PairMultiset& pairs);

// Dual hypergraph: one dual vertex per hyperedge (same id), one dual hyperedge per
// vertex of positive degree (same id) over the hyperedges incident to it.
Hypergraph dual(const Hypergraph& h);

using SourceId = std::uint64_t;

struct CocitationResult {
  Hypergraph graph;  // hyperedge id == source id
  std::vector<SourceId> skipped_sources;
};

// One hyperedge per source over its distinct cited objects, source excluded.
// Sources left with fewer than two cited objects are skipped and reported.
CocitationResult build_cocitation(const std::map<SourceId, std::vector<SourceId>>& citations);

// Maps hyperedge orders and vertex degrees onto small bucket indices.
class BucketScheme {
 public:
  static constexpr std::uint32_t kUnbounded = std::numeric_limits<std::uint32_t>::max();

  BucketScheme();  // orders {<=2},{3-4},{5-8},{>=9}; degrees {<=1},{2},{3-4},{>=5}
  BucketScheme(std::vector<std::uint32_t> order_bounds, std::vector<std::uint32_t> degree_bounds);

  std::size_t num_order_buckets() const { return order_bounds_.size(); }
  std::size_t num_degree_buckets() const { return degree_bounds_.size(); }
  // Reserved indices, one past the real buckets.
  std::size_t order_null() const { return order_bounds_.size(); }
  std::size_t degree_null() const { return degree_bounds_.size(); }

  std::size_t order_bucket(std::size_t r) const;
  std::size_t degree_bucket(std::size_t d) const;

  const std::vector<std::uint32_t>& order_bounds() const { return order_bounds_; }
  const std::vector<std::uint32_t>& degree_bounds() const { return degree_bounds_; }

 private:
  std::vector<std::uint32_t> order_bounds_;
  std::vector<std::uint32_t> degree_bounds_;
};

}  // namespace hgtok
