#pragma once

// Compiles a query-centered hypergraph context into a fixed-shape token sequence:
// an alternating vertex/hyperedge incidence tree in level order (the detail
// segment), optionally followed by per-(hop, order bucket) overview cells.

#include <cstdint>
#include <optional>
#include <vector>

#include "hgtok/hypergraph.hpp"
#include "hgtok/semantic.hpp"
#include "hgtok/tensor.hpp"

namespace hgtok {

enum class CenterRole : std::uint8_t { kVertex, kHyperedge };

enum class SlotRole : std::uint8_t { kCenter, kVertex, kHyperedge, kOverview, kVertexPad, kHyperedgePad };
inline constexpr std::size_t kNumSlotRoles = 6;

const char* to_string(SlotRole r);

// Role groups the projector conditions its structural stem on.
enum class StemRole : std::uint8_t { kVertex, kHyperedge, kOverview, kPad };
inline constexpr std::size_t kNumStemRoles = 4;

struct Center {
  CenterRole role = CenterRole::kVertex;
  std::uint64_t id = 0;
  bool operator==(const Center&) const = default;
};

struct TemplateSpec {
  CenterRole center_role = CenterRole::kVertex;
  std::vector<std::size_t> layer_budgets{8, 8};
  std::size_t overview_hops = 2;
  bool with_overview = true;
  BucketScheme buckets;
  std::size_t max_tokens = 160;
  std::size_t pe_dim = 8;

  // Throws a usage error when 1 + sum_l prod_{j<=l} budget_j + H * buckets > max_tokens.
  void validate() const;

  std::size_t detail_slots() const;
  std::size_t overview_slots() const;
  std::size_t total_slots() const { return detail_slots() + overview_slots(); }
  std::size_t depth_levels() const;
  // |s_i| = pe + types + depth + (order buckets + null) + (degree buckets + null).
  std::size_t struct_dim() const;
};

struct TemplateSlot {
  SlotRole kind = SlotRole::kCenter;  // kCenter, kVertex, kHyperedge or kOverview
  std::size_t layer = 0;
  std::optional<std::size_t> parent;
  std::size_t hop = 0;     // overview only
  std::size_t bucket = 0;  // overview only
};

// Sample-independent topology and positional encodings for one TemplateSpec.
class Template {
 public:
  static Template build(const TemplateSpec& spec);

  const TemplateSpec& spec() const { return spec_; }
  const std::vector<TemplateSlot>& slots() const { return slots_; }
  std::size_t size() const { return slots_.size(); }
  std::size_t detail_size() const { return detail_size_; }
  std::size_t layer_begin(std::size_t layer) const { return layer_offsets_[layer]; }
  std::size_t layer_end(std::size_t layer) const { return layer_offsets_[layer + 1]; }

  // Positional encodings, one row per slot (k columns).
  const Matrix<double>& pe() const { return pe_; }
  // Eigenvalues associated with the PE columns (0 for zero-padded columns).
  const std::vector<double>& pe_eigenvalues() const { return pe_eigenvalues_; }

 private:
  TemplateSpec spec_;
  std::vector<TemplateSlot> slots_;
  std::vector<std::size_t> layer_offsets_;
  std::size_t detail_size_ = 0;
  Matrix<double> pe_;
  std::vector<double> pe_eigenvalues_;
};

struct HidtoSlot {
  SlotRole role = SlotRole::kCenter;
  std::size_t layer = 0;
  std::optional<std::size_t> parent;
  std::optional<Index> object;  // vertex or hyperedge index in the hypergraph, by role
  std::size_t hop = 0;          // overview cells
  std::size_t bucket = 0;       // overview cells
  bool empty_cell = false;      // overview cell with no hyperedges
  bool binds_vertex = false;    // object is a vertex (center vertex or V slot)

  bool is_pad() const { return role == SlotRole::kVertexPad || role == SlotRole::kHyperedgePad; }
  bool is_real_object() const { return object.has_value(); }
  bool is_vertex_like() const { return object && binds_vertex; }
  bool is_hyperedge_like() const { return object && !binds_vertex; }
  bool operator==(const HidtoSlot&) const = default;
};

enum class Relation : std::uint8_t { kUnrelated = 0, kIncidence = 1, kCoMember = 2 };
inline constexpr std::size_t kNumRelations = 3;

// Roles and local incidence pattern handed to the projector.
struct IncidencePattern {
  std::vector<StemRole> roles;
  std::vector<std::vector<std::uint32_t>> members;   // M(e) for hyperedge slots
  std::vector<std::vector<std::uint32_t>> incident;  // N(v) for vertex slots
};

struct HidtoSequence {
  Center center;
  std::vector<HidtoSlot> slots;
  std::size_t detail_size = 0;
  std::vector<std::vector<std::uint32_t>> members;   // M(e): real vertex slots in hyperedge slot e
  std::vector<std::vector<std::uint32_t>> incident;  // N(v): real hyperedge slots containing vertex slot v

  bool is_real_detail(std::size_t i) const {
    return i < detail_size && !slots[i].is_pad();
  }
  // Ground-truth relation between two real detail slots (data error otherwise).
  Relation relation(std::size_t i, std::size_t j) const;
  IncidencePattern pattern() const;
  bool operator==(const HidtoSequence&) const = default;
};

// Samples the incidence tree around center. Children are drawn uniformly without
// replacement from the parent's neighbors, excluding the parent's own parent,
// using a stream keyed by (seed, center, parent slot index).
HidtoSequence serialize(const Hypergraph& h, const Center& center, const Template& tmpl, std::uint64_t seed);

// S_{h,b}: hyperedge indices first reached at hyperedge layer h (1-based hop,
// stored at [h-1]) of an alternating BFS with a shared visited set, split by
// order bucket. Each cell is ascending.
using OverviewShells = std::vector<std::vector<std::vector<Index>>>;
OverviewShells overview_shells(const Hypergraph& h, const Center& center, std::size_t hops,
                               const BucketScheme& buckets);

// Fixed per-bucket offset vectors: seeded unit-norm Gaussian rows.
Matrix<double> make_bucket_vectors(std::size_t num_buckets, std::size_t dim, std::uint64_t seed);

// States of the parameter-free alternating aggregation.
//   vertex[t] for t = 0..H (vertex[0] = psi), edge[t-1] for t = 1..H.
struct PropagationStates {
  std::vector<Matrix<double>> vertex;
  std::vector<Matrix<double>> edge;
};

PropagationStates propagate(const Hypergraph& h, const SemanticProvider& psi, const BucketScheme& buckets,
                            const Matrix<double>& bucket_vectors, std::size_t hops);

struct OverviewCell {
  std::size_t hop = 0;
  std::size_t bucket = 0;
  bool empty = true;
  std::vector<double> value;  // mean of edge[hop-1] over S_{hop,bucket}; zeros when empty
};

// Cells ordered hop-major, bucket-minor.
std::vector<OverviewCell> overview_aggregate(const Hypergraph& h, const Center& center, std::size_t hops,
                                             const BucketScheme& buckets, const PropagationStates& states);

struct EncapsulatedTokens {
  Matrix<double> features;  // rows g_i = [a_i || s_i]
  std::size_t d_text = 0;
  std::size_t d_struct = 0;
};

// Assembles g_i for every slot. cells must match the template's overview segment
// (may be empty when the template has no overview).
EncapsulatedTokens encapsulate(const Hypergraph& h, const HidtoSequence& seq, const Template& tmpl,
                               const SemanticProvider& psi, const std::vector<OverviewCell>& cells);

// Order-bucket targets for auxiliary supervision: bucket index for real hyperedge
// slots and nonempty overview cells, -1 elsewhere.
std::vector<int> order_targets(const Hypergraph& h, const HidtoSequence& seq, const BucketScheme& buckets);

}  // namespace hgtok
