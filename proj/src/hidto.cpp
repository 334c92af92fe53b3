#include "hgtok/hidto.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgtok/error.hpp"
#include "hgtok/kernels.hpp"
#include "hgtok/rng.hpp"

namespace hgtok {

const char* to_string(SlotRole r) {
  switch (r) {
    case SlotRole::kCenter: return "center";
    case SlotRole::kVertex: return "V";
    case SlotRole::kHyperedge: return "E";
    case SlotRole::kOverview: return "O";
    case SlotRole::kVertexPad: return "V-PAD";
    case SlotRole::kHyperedgePad: return "E-PAD";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// TemplateSpec / Template
// ---------------------------------------------------------------------------

std::size_t TemplateSpec::detail_slots() const {
  std::size_t total = 1, width = 1;
  for (std::size_t b : layer_budgets) {
    width *= b;
    total += width;
  }
  return total;
}

std::size_t TemplateSpec::overview_slots() const {
  return with_overview ? overview_hops * buckets.num_order_buckets() : 0;
}

std::size_t TemplateSpec::depth_levels() const {
  const std::size_t detail = layer_budgets.size() + 1;
  return with_overview ? std::max(detail, overview_hops + 1) : detail;
}

std::size_t TemplateSpec::struct_dim() const {
  return pe_dim + kNumSlotRoles + depth_levels() + buckets.num_order_buckets() + 1 + buckets.num_degree_buckets() + 1;
}

void TemplateSpec::validate() const {
  if (layer_budgets.empty()) fail_usage("template needs at least one layer budget");
  for (std::size_t b : layer_budgets)
    if (b == 0) fail_usage("layer budgets must be positive");
  if (overview_hops == 0) fail_usage("overview hops must be positive");
  if (pe_dim == 0) fail_usage("positional encoding dimension must be positive");
  const std::size_t need = 1 + (detail_slots() - 1) + overview_hops * buckets.num_order_buckets();
  if (need > max_tokens)
    fail_usage("template needs " + std::to_string(need) + " slots but max_tokens is " + std::to_string(max_tokens));
}

namespace {

SlotRole layer_kind(CenterRole center, std::size_t layer) {
  if (layer == 0) return SlotRole::kCenter;
  const bool odd = layer % 2 == 1;
  if (center == CenterRole::kVertex) return odd ? SlotRole::kHyperedge : SlotRole::kVertex;
  return odd ? SlotRole::kVertex : SlotRole::kHyperedge;
}

// Normalized-Laplacian eigenvectors of the template tree for the k smallest
// nonzero eigenvalues, sign-fixed so each column's first nonzero entry is positive.
void tree_laplacian_pe(const std::vector<TemplateSlot>& slots, std::size_t n, std::size_t k, Matrix<double>& pe,
                       std::vector<double>& eigenvalues) {
  eigenvalues.assign(k, 0.0);
  if (n < 2) return;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    deg[i] += 1;
    deg[*slots[i].parent] += 1;
  }
  Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t p = *slots[i].parent;
    const double w = -1.0 / std::sqrt(deg[i] * deg[p]);
    lap(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = w;
    lap(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) = w;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) fail_numeric("template Laplacian eigendecomposition failed");
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  std::size_t col = 0;
  for (Eigen::Index j = 0; j < values.size() && col < k; ++j) {
    if (values(j) < 1e-9) continue;
    double sign = 1.0;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      if (std::abs(vectors(i, j)) > 1e-9) {
        sign = vectors(i, j) > 0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t i = 0; i < n; ++i) pe(i, col) = sign * vectors(static_cast<Eigen::Index>(i), j);
    eigenvalues[col] = values(j);
    ++col;
  }
}

}  // namespace

Template Template::build(const TemplateSpec& spec) {
  spec.validate();
  Template t;
  t.spec_ = spec;
  t.slots_.push_back({SlotRole::kCenter, 0, std::nullopt, 0, 0});
  t.layer_offsets_ = {0, 1};
  for (std::size_t l = 1; l <= spec.layer_budgets.size(); ++l) {
    const std::size_t budget = spec.layer_budgets[l - 1];
    const SlotRole kind = layer_kind(spec.center_role, l);
    for (std::size_t p = t.layer_offsets_[l - 1]; p < t.layer_offsets_[l]; ++p) {
      for (std::size_t c = 0; c < budget; ++c) t.slots_.push_back({kind, l, p, 0, 0});
    }
    t.layer_offsets_.push_back(t.slots_.size());
  }
  t.detail_size_ = t.slots_.size();
  if (spec.with_overview) {
    for (std::size_t hop = 1; hop <= spec.overview_hops; ++hop)
      for (std::size_t b = 0; b < spec.buckets.num_order_buckets(); ++b)
        t.slots_.push_back({SlotRole::kOverview, hop, std::nullopt, hop, b});
  }
  t.pe_.resize(t.slots_.size(), spec.pe_dim);
  tree_laplacian_pe(t.slots_, t.detail_size_, spec.pe_dim, t.pe_, t.pe_eigenvalues_);
  // Overview slots get a reserved one-hot row per hop.
  for (std::size_t i = t.detail_size_; i < t.slots_.size(); ++i)
    t.pe_(i, (t.slots_[i].hop - 1) % spec.pe_dim) = 1.0;
  return t;
}

// ---------------------------------------------------------------------------
// Sequence
// ---------------------------------------------------------------------------

namespace {

// Up to `take` items drawn uniformly without replacement, in draw order.
std::vector<Index> draw_without_replacement(std::vector<Index> pool, std::size_t take, Rng& rng) {
  take = std::min(take, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

}  // namespace

HidtoSequence serialize(const Hypergraph& h, const Center& center, const Template& tmpl, std::uint64_t seed) {
  const TemplateSpec& spec = tmpl.spec();
  if (center.role != spec.center_role) fail_data("center role does not match the template");
  const bool vertex_center = center.role == CenterRole::kVertex;
  const Index root = vertex_center ? h.vertex_index(center.id) : h.hyperedge_index(center.id);

  HidtoSequence seq;
  seq.center = center;
  seq.detail_size = tmpl.detail_size();
  const auto& tslots = tmpl.slots();
  seq.slots.resize(tslots.size());

  seq.slots[0] = {SlotRole::kCenter, 0, std::nullopt, root, 0, 0, false, vertex_center};
  for (std::size_t l = 1; l <= spec.layer_budgets.size(); ++l) {
    const std::size_t budget = spec.layer_budgets[l - 1];
    const bool child_vertex = tslots[tmpl.layer_begin(l)].kind == SlotRole::kVertex;
    std::size_t next = tmpl.layer_begin(l);
    for (std::size_t p = tmpl.layer_begin(l - 1); p < tmpl.layer_end(l - 1); ++p) {
      const HidtoSlot& parent = seq.slots[p];
      std::vector<Index> picks;
      if (parent.object) {
        std::optional<Index> grandparent;
        if (parent.parent) grandparent = seq.slots[*parent.parent].object;
        auto neighbors = parent.binds_vertex ? h.incident(*parent.object) : h.members(*parent.object);
        std::vector<Index> pool;
        pool.reserve(neighbors.size());
        for (Index x : neighbors)
          if (!grandparent || x != *grandparent) pool.push_back(x);
        Rng rng(derive_key(seed, {stream_tag::kSampling, static_cast<std::uint64_t>(center.role), center.id, p}));
        picks = draw_without_replacement(std::move(pool), budget, rng);
      }
      for (std::size_t c = 0; c < budget; ++c, ++next) {
        HidtoSlot& s = seq.slots[next];
        s.layer = l;
        s.parent = p;
        s.binds_vertex = child_vertex;
        if (c < picks.size()) {
          s.role = child_vertex ? SlotRole::kVertex : SlotRole::kHyperedge;
          s.object = picks[c];
        } else {
          s.role = child_vertex ? SlotRole::kVertexPad : SlotRole::kHyperedgePad;
        }
      }
    }
  }

  if (spec.with_overview) {
    const OverviewShells shells = overview_shells(h, center, spec.overview_hops, spec.buckets);
    for (std::size_t i = tmpl.detail_size(); i < tslots.size(); ++i) {
      HidtoSlot& s = seq.slots[i];
      s.role = SlotRole::kOverview;
      s.layer = tslots[i].layer;
      s.hop = tslots[i].hop;
      s.bucket = tslots[i].bucket;
      s.empty_cell = shells[s.hop - 1][s.bucket].empty();
    }
  }

  // Local incidence pattern over every real (hyperedge slot, vertex slot) pair.
  seq.members.assign(seq.slots.size(), {});
  seq.incident.assign(seq.slots.size(), {});
  for (std::size_t e = 0; e < seq.detail_size; ++e) {
    if (!seq.slots[e].is_hyperedge_like()) continue;
    for (std::size_t v = 0; v < seq.detail_size; ++v) {
      if (!seq.slots[v].is_vertex_like()) continue;
      if (h.contains(*seq.slots[e].object, *seq.slots[v].object)) {
        seq.members[e].push_back(static_cast<std::uint32_t>(v));
        seq.incident[v].push_back(static_cast<std::uint32_t>(e));
      }
    }
  }
  return seq;
}

Relation HidtoSequence::relation(std::size_t i, std::size_t j) const {
  if (i == j || !is_real_detail(i) || !is_real_detail(j)) fail_data("relation pair must name two real detail slots");
  const HidtoSlot& a = slots[i];
  const HidtoSlot& b = slots[j];
  if (a.binds_vertex != b.binds_vertex) {
    const std::size_t e = a.binds_vertex ? j : i;
    const std::size_t v = a.binds_vertex ? i : j;
    const auto& m = members[e];
    return std::find(m.begin(), m.end(), v) != m.end() ? Relation::kIncidence : Relation::kUnrelated;
  }
  if (a.binds_vertex && a.parent && a.parent == b.parent && slots[*a.parent].is_hyperedge_like())
    return Relation::kCoMember;
  return Relation::kUnrelated;
}

IncidencePattern HidtoSequence::pattern() const {
  IncidencePattern p;
  p.roles.reserve(slots.size());
  for (const HidtoSlot& s : slots) {
    switch (s.role) {
      case SlotRole::kCenter: p.roles.push_back(s.binds_vertex ? StemRole::kVertex : StemRole::kHyperedge); break;
      case SlotRole::kVertex: p.roles.push_back(StemRole::kVertex); break;
      case SlotRole::kHyperedge: p.roles.push_back(StemRole::kHyperedge); break;
      case SlotRole::kOverview: p.roles.push_back(StemRole::kOverview); break;
      case SlotRole::kVertexPad:
      case SlotRole::kHyperedgePad: p.roles.push_back(StemRole::kPad); break;
    }
  }
  p.members = members;
  p.incident = incident;
  return p;
}

// ---------------------------------------------------------------------------
// Overview
// ---------------------------------------------------------------------------

OverviewShells overview_shells(const Hypergraph& h, const Center& center, std::size_t hops,
                               const BucketScheme& buckets) {
  OverviewShells shells(hops, std::vector<std::vector<Index>>(buckets.num_order_buckets()));
  std::vector<char> seen_v(h.num_vertices(), 0), seen_e(h.num_hyperedges(), 0);
  std::vector<Index> frontier;
  if (center.role == CenterRole::kVertex) {
    const Index c = h.vertex_index(center.id);
    seen_v[c] = 1;
    frontier.push_back(c);
  } else {
    const Index c = h.hyperedge_index(center.id);
    seen_e[c] = 1;
    for (Index v : h.members(c)) {
      seen_v[v] = 1;
      frontier.push_back(v);
    }
  }
  for (std::size_t hop = 0; hop < hops; ++hop) {
    std::vector<Index> layer;
    for (Index v : frontier)
      for (Index e : h.incident(v))
        if (!seen_e[e]) {
          seen_e[e] = 1;
          layer.push_back(e);
        }
    frontier.clear();
    for (Index e : layer) {
      shells[hop][buckets.order_bucket(h.members(e).size())].push_back(e);
      for (Index v : h.members(e))
        if (!seen_v[v]) {
          seen_v[v] = 1;
          frontier.push_back(v);
        }
    }
    for (auto& cell : shells[hop]) std::sort(cell.begin(), cell.end());
  }
  return shells;
}

Matrix<double> make_bucket_vectors(std::size_t num_buckets, std::size_t dim, std::uint64_t seed) {
  Matrix<double> o(num_buckets, dim);
  Rng rng(derive_key(seed, {stream_tag::kBucketVectors}));
  for (std::size_t b = 0; b < num_buckets; ++b) {
    double norm = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      o(b, k) = rng.normal();
      norm += o(b, k) * o(b, k);
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < dim; ++k) o(b, k) /= norm;
  }
  return o;
}

PropagationStates propagate(const Hypergraph& h, const SemanticProvider& psi, const BucketScheme& buckets,
                            const Matrix<double>& bucket_vectors, std::size_t hops) {
  const std::size_t d = psi.dim();
  if (bucket_vectors.cols() != d || bucket_vectors.rows() < buckets.num_order_buckets())
    fail_numeric("bucket vector shape does not match the embedding dimension");
  PropagationStates st;
  st.vertex.emplace_back(h.num_vertices(), d);
  for (Index v = 0; v < h.num_vertices(); ++v) psi.vertex(h, v, st.vertex[0].row(v));
  std::vector<std::size_t> bucket(h.num_hyperedges());
  for (Index e = 0; e < h.num_hyperedges(); ++e) bucket[e] = buckets.order_bucket(h.members(e).size());
  for (std::size_t t = 1; t <= hops; ++t) {
    st.edge.emplace_back(h.num_hyperedges(), d);
    kernels::hyperedge_mean<double>(h, st.vertex[t - 1].cview(), st.edge[t - 1].view());
    st.vertex.emplace_back(h.num_vertices(), d);
    kernels::vertex_mean_with_offsets<double>(h, st.edge[t - 1].cview(), bucket, bucket_vectors.cview(),
                                              st.vertex[t - 1].cview(), st.vertex[t].view());
  }
  return st;
}

std::vector<OverviewCell> overview_aggregate(const Hypergraph& h, const Center& center, std::size_t hops,
                                             const BucketScheme& buckets, const PropagationStates& states) {
  if (states.edge.size() < hops) fail_numeric("propagation ran for fewer steps than overview hops");
  const OverviewShells shells = overview_shells(h, center, hops, buckets);
  const std::size_t d = states.vertex.at(0).cols();
  std::vector<OverviewCell> cells;
  for (std::size_t hop = 1; hop <= hops; ++hop) {
    for (std::size_t b = 0; b < buckets.num_order_buckets(); ++b) {
      OverviewCell cell{hop, b, true, std::vector<double>(d, 0.0)};
      const auto& members = shells[hop - 1][b];
      if (!members.empty()) {
        cell.empty = false;
        for (Index e : members) {
          auto row = states.edge[hop - 1].row(e);
          for (std::size_t k = 0; k < d; ++k) cell.value[k] += row[k];
        }
        for (double& x : cell.value) x /= static_cast<double>(members.size());
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Encapsulation
// ---------------------------------------------------------------------------

EncapsulatedTokens encapsulate(const Hypergraph& h, const HidtoSequence& seq, const Template& tmpl,
                               const SemanticProvider& psi, const std::vector<OverviewCell>& cells) {
  const TemplateSpec& spec = tmpl.spec();
  if (seq.slots.size() != tmpl.size()) fail_numeric("sequence length does not match the template");
  if (cells.size() != spec.overview_slots()) fail_numeric("overview cell count does not match the template");
  const std::size_t dt = psi.dim(), ds = spec.struct_dim();
  const std::size_t nb = spec.buckets.num_order_buckets(), nd = spec.buckets.num_degree_buckets();
  EncapsulatedTokens out{Matrix<double>(seq.slots.size(), dt + ds), dt, ds};

  const std::size_t off_type = spec.pe_dim;
  const std::size_t off_depth = off_type + kNumSlotRoles;
  const std::size_t off_order = off_depth + spec.depth_levels();
  const std::size_t off_degree = off_order + nb + 1;

  for (std::size_t i = 0; i < seq.slots.size(); ++i) {
    const HidtoSlot& s = seq.slots[i];
    auto row = out.features.row(i);
    auto a = row.subspan(0, dt);
    auto st = row.subspan(dt, ds);
    std::size_t order = nb, degree = nd;

    if (s.is_vertex_like()) {
      psi.vertex(h, *s.object, a);
      degree = spec.buckets.degree_bucket(h.incident(*s.object).size());
    } else if (s.is_hyperedge_like()) {
      const Index e = *s.object;
      if (!psi.hyperedge(h, e, a)) {
        std::vector<double> tmp(dt);
        std::fill(a.begin(), a.end(), 0.0);
        for (Index v : h.members(e)) {
          psi.vertex(h, v, tmp);
          for (std::size_t k = 0; k < dt; ++k) a[k] += tmp[k];
        }
        for (double& x : a) x /= static_cast<double>(h.members(e).size());
      }
      order = spec.buckets.order_bucket(h.members(e).size());
    } else if (s.role == SlotRole::kOverview) {
      const OverviewCell& c = cells[i - seq.detail_size];
      if (c.hop != s.hop || c.bucket != s.bucket || c.value.size() != dt)
        fail_numeric("overview cell does not match its slot");
      std::copy(c.value.begin(), c.value.end(), a.begin());
      if (!c.empty) order = c.bucket;
    }

    for (std::size_t k = 0; k < spec.pe_dim; ++k) st[k] = tmpl.pe()(i, k);
    st[off_type + static_cast<std::size_t>(s.role)] = 1.0;
    st[off_depth + s.layer] = 1.0;
    st[off_order + order] = 1.0;
    st[off_degree + degree] = 1.0;
  }
  return out;
}

std::vector<int> order_targets(const Hypergraph& h, const HidtoSequence& seq, const BucketScheme& buckets) {
  std::vector<int> t(seq.slots.size(), -1);
  for (std::size_t i = 0; i < seq.slots.size(); ++i) {
    const HidtoSlot& s = seq.slots[i];
    if (s.is_hyperedge_like())
      t[i] = static_cast<int>(buckets.order_bucket(h.members(*s.object).size()));
    else if (s.role == SlotRole::kOverview && !s.empty_cell)
      t[i] = static_cast<int>(s.bucket);
  }
  return t;
}

}  // namespace hgtok
