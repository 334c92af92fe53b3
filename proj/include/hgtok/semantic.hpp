#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgtok/hypergraph.hpp"

namespace hgtok {

// Dense embedding table, row index = object id. Serialized as HGEMB1.
struct EmbeddingTable {
  std::uint32_t count = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;  // count x dim, row-major

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

void write_embedding_table(const EmbeddingTable& t, const std::string& path);
EmbeddingTable read_embedding_table(const std::string& path);

// Text embedding lookup psi(.) for vertices and hyperedges.
//
// Backed either by precomputed tables or by a deterministic stub that hashes
// the object's text (or "v:<id>" / "e:<id>" when textless) into a seeded
// unit-norm Gaussian vector. The stub only embeds hyperedges that carry text;
// textless hyperedges report "no embedding" and callers fall back to member means.
class SemanticProvider {
 public:
  static SemanticProvider stub(std::size_t dim, std::uint64_t seed);
  static SemanticProvider tables(EmbeddingTable vertices, std::optional<EmbeddingTable> hyperedges = std::nullopt);

  std::size_t dim() const { return dim_; }

  // Writes psi(v) into out (size dim). Throws a data error if unresolvable.
  void vertex(const Hypergraph& h, Index v, std::span<double> out) const;
  // Writes psi(e) and returns true if an explicit hyperedge embedding exists.
  bool hyperedge(const Hypergraph& h, Index e, std::span<double> out) const;

 private:
  SemanticProvider() = default;
  void hash_vector(const std::string& key, std::span<double> out) const;

  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  bool is_stub_ = true;
  EmbeddingTable vertex_table_;
  std::optional<EmbeddingTable> hyperedge_table_;
};

}  // namespace hgtok
