#include "hgtok/semantic.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "hgtok/error.hpp"
#include "hgtok/rng.hpp"

namespace hgtok {

namespace {

constexpr char kMagic[6] = {'H', 'G', 'E', 'M', 'B', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) fail_data("truncated HGEMB1 header");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace

void write_embedding_table(const EmbeddingTable& t, const std::string& path) {
  if (t.values.size() != std::size_t(t.count) * t.dim) fail_numeric("embedding table size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot open " + path + " for writing");
  out.write(kMagic, sizeof kMagic);
  put_u32(out, t.count);
  put_u32(out, t.dim);
  for (float f : t.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

EmbeddingTable read_embedding_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open " + path);
  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0) fail_data(path + ": not an HGEMB1 file");
  EmbeddingTable t;
  t.count = get_u32(in);
  t.dim = get_u32(in);
  t.values.resize(std::size_t(t.count) * t.dim);
  for (float& f : t.values) {
    std::uint32_t bits = get_u32(in);
    std::memcpy(&f, &bits, 4);
  }
  return t;
}

SemanticProvider SemanticProvider::stub(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) fail_usage("semantic dimension must be positive");
  SemanticProvider p;
  p.dim_ = dim;
  p.seed_ = seed;
  p.is_stub_ = true;
  return p;
}

SemanticProvider SemanticProvider::tables(EmbeddingTable vertices, std::optional<EmbeddingTable> hyperedges) {
  if (vertices.dim == 0) fail_usage("embedding table has zero dimension");
  if (hyperedges && hyperedges->dim != vertices.dim) fail_numeric("dimension mismatch between embedding tables");
  SemanticProvider p;
  p.dim_ = vertices.dim;
  p.is_stub_ = false;
  p.vertex_table_ = std::move(vertices);
  p.hyperedge_table_ = std::move(hyperedges);
  return p;
}

void SemanticProvider::hash_vector(const std::string& key, std::span<double> out) const {
  Rng rng(derive_key(seed_, {stream_tag::kSemantic, fnv1a(key)}));
  double norm = 0;
  for (double& x : out) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : out) x /= norm;
}

void SemanticProvider::vertex(const Hypergraph& h, Index v, std::span<double> out) const {
  if (out.size() != dim_) fail_numeric("dimension mismatch in semantic lookup");
  const auto& rec = h.vertex(v);
  if (is_stub_) {
    hash_vector(rec.text ? "t:" + *rec.text : "v:" + std::to_string(rec.id), out);
    return;
  }
  if (rec.id >= vertex_table_.count) fail_data("no embedding row for vertex " + std::to_string(rec.id));
  auto row = vertex_table_.row(rec.id);
  for (std::size_t k = 0; k < dim_; ++k) out[k] = row[k];
}

bool SemanticProvider::hyperedge(const Hypergraph& h, Index e, std::span<double> out) const {
  if (out.size() != dim_) fail_numeric("dimension mismatch in semantic lookup");
  const auto& rec = h.hyperedge(e);
  if (is_stub_) {
    if (!rec.text) return false;
    hash_vector("t:" + *rec.text, out);
    return true;
  }
  if (!hyperedge_table_ || rec.id >= hyperedge_table_->count) return false;
  auto row = hyperedge_table_->row(rec.id);
  for (std::size_t k = 0; k < dim_; ++k) out[k] = row[k];
  return true;
}

}  // namespace hgtok
