#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>
#include <set>

#include "../support/oracles.hpp"
#include "hgtok/diagnostic.hpp"
#include "hgtok/error.hpp"
#include "hgtok/hidto.hpp"

using namespace hgtok;

namespace {

TemplateSpec spec_with(std::vector<std::size_t> budgets, bool overview = true, CenterRole role = CenterRole::kVertex) {
  TemplateSpec s;
  s.layer_budgets = std::move(budgets);
  s.with_overview = overview;
  s.center_role = role;
  return s;
}

std::set<VertexId> member_ids(const Hypergraph& h, Index e) {
  std::set<VertexId> out;
  for (Index v : h.members(e)) out.insert(h.vertex_id(v));
  return out;
}

}  // namespace

TEST(Template, ClosedFormSizes) {
  EXPECT_EQ(Template::build(spec_with({3, 2}, false)).size(), 10u);
  const Template t = Template::build(spec_with({8, 8}));
  EXPECT_EQ(t.detail_size(), 73u);
  EXPECT_EQ(t.size(), 81u);
  EXPECT_EQ(Template::build(spec_with({3, 2})).size(), 18u);
}

TEST(Template, BudgetViolation) {
  TemplateSpec s = spec_with({8, 8});
  s.max_tokens = 80;
  EXPECT_THROW(Template::build(s), Error);
  s.max_tokens = 81;
  EXPECT_NO_THROW(Template::build(s));
  EXPECT_THROW(Template::build(spec_with({2, 0})), Error);
}

TEST(Template, RolesAlternateAndParentsPointUp) {
  for (CenterRole role : {CenterRole::kVertex, CenterRole::kHyperedge}) {
    const Template t = Template::build(spec_with({3, 2, 2}, true, role));
    for (std::size_t i = 1; i < t.detail_size(); ++i) {
      const auto& s = t.slots()[i];
      ASSERT_TRUE(s.parent.has_value());
      EXPECT_LT(*s.parent, i);
      EXPECT_EQ(t.slots()[*s.parent].layer + 1, s.layer);
      const bool odd = s.layer % 2 == 1;
      const SlotRole expect = (role == CenterRole::kVertex) == odd ? SlotRole::kHyperedge : SlotRole::kVertex;
      EXPECT_EQ(s.kind, expect);
    }
    for (std::size_t i = t.detail_size(); i < t.size(); ++i) {
      EXPECT_EQ(t.slots()[i].kind, SlotRole::kOverview);
      EXPECT_EQ(t.slots()[i].layer, t.slots()[i].hop);
    }
  }
}

TEST(Template, LaplacianEigenvectors) {
  const Template t = Template::build(spec_with({3, 2}));
  const std::size_t n = t.detail_size(), k = t.spec().pe_dim;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 1; i < n; ++i) {
    const auto p = static_cast<Eigen::Index>(*t.slots()[i].parent);
    a(p, static_cast<Eigen::Index>(i)) = a(static_cast<Eigen::Index>(i), p) = 1;
  }
  const Eigen::VectorXd inv_sqrt = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd lap =
      Eigen::MatrixXd::Identity(a.rows(), a.cols()) - inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  Eigen::MatrixXd u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = t.pe()(i, c);
  const Eigen::MatrixXd gram = u.transpose() * u;
  for (std::size_t c = 0; c < k; ++c) {
    const double lambda = t.pe_eigenvalues()[c];
    EXPECT_GT(lambda, 1e-9);
    if (c > 0) EXPECT_GE(lambda, t.pe_eigenvalues()[c - 1] - 1e-12);
    const auto col = u.col(static_cast<Eigen::Index>(c));
    EXPECT_LT((lap * col - lambda * col).norm(), 1e-9);
    for (std::size_t d = 0; d < k; ++d)
      EXPECT_NEAR(gram(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d)), c == d ? 1.0 : 0.0, 1e-9);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(col(static_cast<Eigen::Index>(i))) > 1e-12) {
        EXPECT_GT(col(static_cast<Eigen::Index>(i)), 0.0);
        break;
      }
    }
  }
  EXPECT_EQ(t.pe().rows(), t.size());
}

TEST(Serialize, HAExampleCenterOne) {
  const Hypergraph ha = core_pair().first;
  const Template t = Template::build(spec_with({2, 2}, false));
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const HidtoSequence s = serialize(ha, {CenterRole::kVertex, 1}, t, seed);
    ASSERT_EQ(s.slots.size(), 7u);
    std::set<std::set<VertexId>> layer1;
    for (std::size_t i = 1; i <= 2; ++i) {
      ASSERT_TRUE(s.slots[i].is_hyperedge_like());
      layer1.insert(member_ids(ha, *s.slots[i].object));
    }
    EXPECT_EQ(layer1, (std::set<std::set<VertexId>>{{1, 2, 3}, {1, 4, 5}}));
    for (std::size_t i = 3; i < 7; ++i) {
      const auto& slot = s.slots[i];
      ASSERT_TRUE(slot.is_vertex_like());
      std::set<VertexId> allowed = member_ids(ha, *s.slots[*slot.parent].object);
      allowed.erase(1);
      EXPECT_TRUE(allowed.count(ha.vertex_id(*slot.object)));
      EXPECT_NE(ha.vertex_id(*slot.object), 1u);
    }
  }
}

TEST(Serialize, DeterministicAndPadsForIsolatedCenter) {
  const Hypergraph h = Hypergraph::from_edges({1, 2, 3, 4, 9}, {{1, 2, 3}, {2, 3, 4}, {1, 4}});
  const Template t = Template::build(spec_with({2, 2}));
  EXPECT_EQ(serialize(h, {CenterRole::kVertex, 2}, t, 5), serialize(h, {CenterRole::kVertex, 2}, t, 5));
  const HidtoSequence iso = serialize(h, {CenterRole::kVertex, 9}, t, 5);
  for (std::size_t i = 1; i < iso.detail_size; ++i) EXPECT_TRUE(iso.slots[i].is_pad()) << i;
  EXPECT_THROW(serialize(h, {CenterRole::kVertex, 77}, t, 5), Error);
  EXPECT_THROW(serialize(h, {CenterRole::kHyperedge, 0}, t, 5), Error);
}

TEST(Serialize, StructuralInvariantsOnRandomHypergraphs) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 60; ++trial) {
    const Hypergraph h = oracle::random_hypergraph(rng, 20, 15);
    const bool vc = h.num_hyperedges() == 0 || rng() % 2;
    const CenterRole role = vc ? CenterRole::kVertex : CenterRole::kHyperedge;
    const Template t = Template::build(spec_with({3, 2, 2}, true, role));
    const std::uint64_t id = vc ? h.vertex_id(rng() % h.num_vertices()) : h.hyperedge_id(rng() % h.num_hyperedges());
    const HidtoSequence s = serialize(h, {role, id}, t, rng());
    ASSERT_EQ(s.slots.size(), t.size());
    for (std::size_t i = 0; i < s.detail_size; ++i) {
      const auto& slot = s.slots[i];
      EXPECT_EQ(slot.layer, t.slots()[i].layer);
      EXPECT_EQ(slot.parent, t.slots()[i].parent);
      if (slot.is_pad()) {
        EXPECT_FALSE(slot.object.has_value());
        continue;
      }
      if (i == 0) continue;
      // A real child is a true neighbour of its parent and never the grandparent.
      const auto& parent = s.slots[*slot.parent];
      ASSERT_TRUE(parent.object.has_value());
      if (slot.binds_vertex)
        EXPECT_TRUE(h.contains(*parent.object, *slot.object));
      else
        EXPECT_TRUE(h.contains(*slot.object, *parent.object));
      if (parent.parent) {
        const auto& gp = s.slots[*parent.parent];
        if (gp.binds_vertex == slot.binds_vertex) EXPECT_NE(gp.object, slot.object);
      }
      // Siblings are distinct.
      for (std::size_t j = 1; j < i; ++j)
        if (s.slots[j].parent == slot.parent && !s.slots[j].is_pad()) EXPECT_NE(s.slots[j].object, slot.object);
    }
    // M/N are exactly the true incidences among bound slots and mutually consistent.
    for (std::size_t e = 0; e < s.detail_size; ++e) {
      for (std::size_t v = 0; v < s.detail_size; ++v) {
        const bool in_m = std::count(s.members[e].begin(), s.members[e].end(), v) > 0;
        const bool in_n = std::count(s.incident[v].begin(), s.incident[v].end(), e) > 0;
        EXPECT_EQ(in_m, in_n);
        const bool truth = s.slots[e].is_hyperedge_like() && s.slots[v].is_vertex_like() &&
                           h.contains(*s.slots[e].object, *s.slots[v].object);
        EXPECT_EQ(in_m, truth);
      }
    }
  }
}

TEST(Shells, HAExampleAndPartition) {
  const Hypergraph ha = core_pair().first;
  const BucketScheme b;
  const OverviewShells sh = overview_shells(ha, {CenterRole::kVertex, 1}, 3, b);
  auto ids = [&](std::size_t hop) {
    std::set<std::set<VertexId>> out;
    for (const auto& cell : sh[hop])
      for (Index e : cell) out.insert(member_ids(ha, e));
    return out;
  };
  EXPECT_EQ(ids(0), (std::set<std::set<VertexId>>{{1, 2, 3}, {1, 4, 5}}));
  EXPECT_EQ(ids(1), (std::set<std::set<VertexId>>{{2, 4, 6}, {3, 5, 6}}));
  EXPECT_TRUE(ids(2).empty());

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Hypergraph h = oracle::random_hypergraph(rng, 20, 15);
    const Center c{CenterRole::kVertex, h.vertex_id(rng() % h.num_vertices())};
    const OverviewShells s = overview_shells(h, c, 3, b);
    const auto layers = oracle::hyperedge_layers(h, c, 3);
    for (std::size_t hop = 0; hop < 3; ++hop) {
      std::set<Index> got;
      std::size_t total = 0;
      for (std::size_t k = 0; k < s[hop].size(); ++k) {
        for (Index e : s[hop][k]) {
          EXPECT_EQ(b.order_bucket(h.members(e).size()), k);
          got.insert(e);
          ++total;
        }
      }
      EXPECT_EQ(total, got.size());  // disjoint cells
      EXPECT_EQ(got, layers[hop]);
    }
  }
}

TEST(Shells, HyperedgeCenterExcludesItself) {
  const Hypergraph ha = core_pair().first;
  const OverviewShells sh = overview_shells(ha, {CenterRole::kHyperedge, 0}, 2, BucketScheme{});
  for (const auto& cell : sh[0])
    for (Index e : cell) EXPECT_NE(ha.hyperedge_id(e), 0u);
}

TEST(Propagation, MatchesMatrixOracle) {
  std::mt19937_64 rng(12);
  const BucketScheme b;
  for (int trial = 0; trial < 50; ++trial) {
    const Hypergraph h = oracle::random_hypergraph(rng, 20, 15);
    const SemanticProvider psi = SemanticProvider::stub(6, rng());
    const Matrix<double> o = make_bucket_vectors(b.num_order_buckets(), 6, rng());
    const PropagationStates got = propagate(h, psi, b, o, 3);
    const oracle::DenseStates want = oracle::propagation(h, psi, b, o, 3);
    for (std::size_t t = 0; t <= 3; ++t)
      for (std::size_t v = 0; v < h.num_vertices(); ++v)
        for (std::size_t k = 0; k < 6; ++k)
          EXPECT_NEAR(got.vertex[t](v, k), want.vertex[t](static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(k)), 1e-9);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t e = 0; e < h.num_hyperedges(); ++e)
        for (std::size_t k = 0; k < 6; ++k)
          EXPECT_NEAR(got.edge[t](e, k), want.edge[t](static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(k)), 1e-9);
  }
}

TEST(Propagation, FixedPointUnderUniformInputAndZeroOffsets) {
  // Every vertex text identical means the stub returns the same u for all.
  std::vector<VertexRecord> vs;
  for (VertexId i = 1; i <= 8; ++i) vs.push_back({i, std::string("same"), std::nullopt});
  const Hypergraph h(vs, {{0, {1, 2, 3}}, {1, {3, 4}}, {2, {4, 5, 6, 7}}, {3, {1, 8}}});
  const SemanticProvider psi = SemanticProvider::stub(5, 3);
  std::vector<double> u(5);
  psi.vertex(h, 0, u);
  const BucketScheme b;
  const Matrix<double> zero(b.num_order_buckets(), 5);
  const PropagationStates st = propagate(h, psi, b, zero, 2);
  for (const OverviewCell& c : overview_aggregate(h, {CenterRole::kVertex, 1}, 2, b, st)) {
    if (c.empty) {
      for (double x : c.value) EXPECT_EQ(x, 0.0);
      continue;
    }
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(c.value[k], u[k], 1e-12);
  }
}

TEST(Propagation, OneHotFirstStep) {
  const Hypergraph ha = core_pair().first;
  EmbeddingTable tab{7, 7, std::vector<float>(49, 0.0f)};
  for (std::size_t i = 0; i < 7; ++i) tab.values[i * 7 + i] = 1.0f;
  const SemanticProvider psi = SemanticProvider::tables(tab);
  const BucketScheme b;
  const PropagationStates st = propagate(ha, psi, b, make_bucket_vectors(b.num_order_buckets(), 7, 1), 1);
  const Index e = *ha.find_hyperedge(0);  // {1,2,3}
  for (std::size_t k = 0; k < 7; ++k) EXPECT_NEAR(st.edge[0](e, k), (k >= 1 && k <= 3) ? 1.0 / 3 : 0.0, 1e-15);
}

TEST(Encapsulate, PadsFallbackAndWidth) {
  const Hypergraph h = Hypergraph::from_edges({1, 2, 3, 4}, {{1, 2, 3}});
  EmbeddingTable tab{5, 5, std::vector<float>(25, 0.0f)};
  for (std::size_t i = 0; i < 5; ++i) tab.values[i * 5 + i] = 1.0f;
  const SemanticProvider psi = SemanticProvider::tables(tab);
  const TemplateSpec spec = spec_with({3, 2});
  const Template t = Template::build(spec);
  const HidtoSequence s = serialize(h, {CenterRole::kVertex, 1}, t, 0);
  const BucketScheme& b = spec.buckets;
  const auto st = propagate(h, psi, b, make_bucket_vectors(b.num_order_buckets(), 5, 0), spec.overview_hops);
  const auto cells = overview_aggregate(h, s.center, spec.overview_hops, b, st);
  const EncapsulatedTokens tok = encapsulate(h, s, t, psi, cells);
  EXPECT_EQ(tok.features.cols(), 5 + spec.pe_dim + kNumSlotRoles + spec.depth_levels() + b.num_order_buckets() + 1 +
                                     b.num_degree_buckets() + 1);
  for (std::size_t i = 0; i < s.slots.size(); ++i) {
    const auto row = tok.features.row(i);
    if (s.slots[i].is_pad())
      for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(row[k], 0.0);
    if (s.slots[i].is_hyperedge_like())
      for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(row[k], (k >= 1 && k <= 3) ? 1.0 / 3 : 0.0, 1e-15);
  }
  // Descriptor recomputation for real slots.
  const std::size_t off_type = tok.d_text + spec.pe_dim, off_depth = off_type + kNumSlotRoles;
  const std::size_t off_order = off_depth + spec.depth_levels(), off_deg = off_order + b.num_order_buckets() + 1;
  for (std::size_t i = 0; i < s.detail_size; ++i) {
    const auto row = tok.features.row(i);
    const auto& slot = s.slots[i];
    EXPECT_EQ(row[off_type + static_cast<std::size_t>(slot.role)], 1.0);
    EXPECT_EQ(row[off_depth + slot.layer], 1.0);
    const std::size_t ob = slot.is_hyperedge_like() ? b.order_bucket(h.members(*slot.object).size()) : b.order_null();
    const std::size_t db = slot.is_vertex_like() ? b.degree_bucket(h.incident(*slot.object).size()) : b.degree_null();
    EXPECT_EQ(row[off_order + ob], 1.0);
    EXPECT_EQ(row[off_deg + db], 1.0);
  }
}

TEST(Degeneration, AllPairHyperedgesPadOnlyForDeficits) {
  // Path 1-2-3-4-5 plus chord 2-4: every order is 2.
  const Hypergraph h = Hypergraph::from_edges({{1, 2}, {2, 3}, {3, 4}, {4, 5}, {2, 4}});
  const Template t = Template::build(spec_with({3, 2}));
  for (VertexId c = 1; c <= 5; ++c) {
    const HidtoSequence s = serialize(h, {CenterRole::kVertex, c}, t, 3);
    const Index ci = h.vertex_index(c);
    std::size_t real1 = 0;
    for (std::size_t i = t.layer_begin(1); i < t.layer_end(1); ++i) real1 += !s.slots[i].is_pad();
    EXPECT_EQ(real1, std::min<std::size_t>(3, h.incident(ci).size()));
    for (std::size_t i = t.layer_begin(2); i < t.layer_end(2); ++i) {
      const auto& parent = s.slots[*s.slots[i].parent];
      // A pair hyperedge has exactly one member besides the parent's parent.
      const bool expect_real = !parent.is_pad() && i == t.layer_begin(2) + 2 * (*s.slots[i].parent - 1);
      EXPECT_EQ(!s.slots[i].is_pad(), expect_real) << "center " << c << " slot " << i;
    }
  }
}
