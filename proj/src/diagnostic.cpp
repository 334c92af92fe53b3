#include "hgtok/diagnostic.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hgtok/error.hpp"
#include "hgtok/hgjl.hpp"
#include "hgtok/parallel.hpp"
#include "hgtok/rng.hpp"

namespace hgtok {

namespace {

const std::vector<std::vector<VertexId>> kCoreA{{1, 2, 3}, {1, 4, 5}, {2, 4, 6}, {3, 5, 6}};
const std::vector<std::vector<VertexId>> kCoreB{{1, 2, 4}, {1, 3, 5}, {2, 3, 6}, {4, 5, 6}};

constexpr std::size_t kCoreVertices = 6;
constexpr std::size_t kMaxSplitAttempts = 1000;

bool contains_all(const std::vector<VertexId>& e, VertexId a, VertexId b, VertexId c) {
  auto has = [&](VertexId x) { return std::find(e.begin(), e.end(), x) != e.end(); };
  return has(a) && has(b) && has(c);
}

struct Query {
  std::array<VertexId, 3> triple;  // core ids
  VertexId center, u, v;
  bool a_yes;
};

// Every triple over the core vertices whose labels differ between H_A and H_B,
// with each of its three members in turn as the center.
std::vector<Query> label_opposite_queries() {
  std::vector<Query> out;
  for (VertexId a = 1; a <= kCoreVertices; ++a)
    for (VertexId b = a + 1; b <= kCoreVertices; ++b)
      for (VertexId c = b + 1; c <= kCoreVertices; ++c) {
        bool in_a = false, in_b = false;
        for (const auto& e : kCoreA) in_a = in_a || contains_all(e, a, b, c);
        for (const auto& e : kCoreB) in_b = in_b || contains_all(e, a, b, c);
        if (in_a == in_b) continue;
        const std::array<VertexId, 3> t{a, b, c};
        for (std::size_t k = 0; k < 3; ++k) {
          Query q{t, t[k], t[(k + 1) % 3], t[(k + 2) % 3], in_a};
          if (q.u > q.v) std::swap(q.u, q.v);
          out.push_back(q);
        }
      }
  return out;
}

std::string vertex_text(VertexId id, VertexId c, VertexId u, VertexId v) {
  if (id == c) return "center vertex";
  if (id == u || id == v) return "candidate vertex";
  return "vertex";
}

MatchedPair make_pair(const DiagConfig& cfg, const Query& q, std::uint64_t key, std::uint64_t pair_id, bool test) {
  Rng rng(key);
  const std::size_t n = kCoreVertices + cfg.distractor_vertices;

  // Vertex slots 0..5 are core vertices 1..6, the rest distractors; every slot
  // gets a random id so ids carry no structural information.
  std::vector<VertexId> ids(n);
  std::iota(ids.begin(), ids.end(), VertexId{0});
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  auto core = [&](VertexId core_id) { return ids[core_id - 1]; };
  const VertexId c = core(q.center), u = core(q.u), v = core(q.v);

  std::vector<std::vector<VertexId>> shared;
  for (std::size_t k = 0; k < cfg.distractor_hyperedges; ++k) {
    for (;;) {
      const std::size_t lo = cfg.min_distractor_size, hi = cfg.max_distractor_size;
      const std::size_t size = lo + rng.index(hi - lo + 1);
      std::vector<std::size_t> slots(n);
      std::iota(slots.begin(), slots.end(), std::size_t{0});
      for (std::size_t i = 0; i < size; ++i) std::swap(slots[i], slots[i + rng.index(n - i)]);
      std::vector<VertexId> e;
      for (std::size_t i = 0; i < size; ++i) e.push_back(ids[slots[i]]);
      if (contains_all(e, c, u, v)) continue;  // would leak the label
      shared.push_back(std::move(e));
      break;
    }
  }
  if (cfg.decoys_per_pattern > 0) {
    auto distractor = [&] { return ids[kCoreVertices + rng.index(cfg.distractor_vertices)]; };
    for (const auto& [a, b] : {std::pair{c, u}, std::pair{c, v}, std::pair{u, v}})
      for (std::size_t k = 0; k < cfg.decoys_per_pattern; ++k) shared.push_back({a, b, distractor()});
  }

  // Hyperedge ids are shuffled too, identically on both sides.
  const std::size_t m = kCoreA.size() + shared.size();
  std::vector<HyperedgeId> eids(m);
  std::iota(eids.begin(), eids.end(), HyperedgeId{0});
  std::shuffle(eids.begin(), eids.end(), rng.engine());

  std::vector<VertexRecord> vertices;
  for (VertexId id : ids) vertices.push_back({id, vertex_text(id, c, u, v), std::nullopt});

  auto side = [&](const std::vector<std::vector<VertexId>>& core_edges, bool yes) {
    std::vector<HyperedgeRecord> edges;
    for (std::size_t k = 0; k < core_edges.size(); ++k) {
      HyperedgeRecord r;
      r.id = eids[k];
      for (VertexId x : core_edges[k]) r.members.push_back(core(x));
      edges.push_back(std::move(r));
    }
    for (std::size_t k = 0; k < shared.size(); ++k) edges.push_back({eids[core_edges.size() + k], shared[k], {}, {}});
    DiagSample s;
    s.graph = Hypergraph(vertices, std::move(edges));
    s.center = c;
    s.u = u;
    s.v = v;
    s.yes = yes;
    return s;
  };

  MatchedPair p;
  p.id = pair_id;
  p.test = test;
  p.a = side(kCoreA, q.a_yes);
  p.b = side(kCoreB, !q.a_yes);
  p.signature = "A[" + query_signature(p.a) + "]B[" + query_signature(p.b) + "]";
  return p;
}

// Balanced query schedule: the label-opposite queries in a fresh shuffled
// order for each round, so Yes/No and center choices stay balanced per side.
std::vector<Query> schedule(const DiagConfig& cfg, std::uint64_t split_tag, std::size_t count) {
  const auto all = label_opposite_queries();
  if (all.empty()) fail_usage("infeasible diagnostic config: no label-opposite query triples");
  std::vector<Query> out;
  Rng rng(derive_key(cfg.seed, {stream_tag::kDiagnostic, split_tag, 0}));
  while (out.size() < count) {
    auto round = all;
    std::shuffle(round.begin(), round.end(), rng.engine());
    for (const auto& q : round) {
      if (out.size() == count) break;
      out.push_back(q);
    }
  }
  return out;
}

}  // namespace

std::pair<Hypergraph, Hypergraph> core_pair() {
  return {Hypergraph::from_edges(kCoreA), Hypergraph::from_edges(kCoreB)};
}

PairMultiset core_clique_edges() {
  PairMultiset m;
  for (const auto& e : kCoreA)
    for (std::size_t i = 0; i < e.size(); ++i)
      for (std::size_t j = i + 1; j < e.size(); ++j) ++m[{std::min(e[i], e[j]), std::max(e[i], e[j])}];
  return m;
}

bool label(const Hypergraph& h, VertexId c, VertexId u, VertexId v) {
  if (c == u || c == v || u == v) fail_data("query vertices must be distinct");
  const Index ci = h.vertex_index(c), ui = h.vertex_index(u), vi = h.vertex_index(v);
  for (Index e : h.incident(ci))
    if (h.contains(e, ui) && h.contains(e, vi)) return true;
  return false;
}

DiagConfig DiagConfig::clean_d20() {
  DiagConfig c;
  c.name = "clean-d20";
  return c;
}

DiagConfig DiagConfig::adversarial_d50() {
  DiagConfig c;
  c.name = "adv-d50";
  c.distractor_vertices = 50;
  c.distractor_hyperedges = 50;
  c.decoys_per_pattern = 6;
  return c;
}

DiagConfig DiagConfig::clean_d8() {
  DiagConfig c;
  c.name = "clean-d8";
  c.distractor_vertices = 8;
  c.distractor_hyperedges = 8;
  c.train_pairs = 500;
  c.test_pairs = 100;
  return c;
}

DiagConfig DiagConfig::preset(const std::string& name) {
  if (name == "clean-d20") return clean_d20();
  if (name == "adv-d50") return adversarial_d50();
  if (name == "clean-d8") return clean_d8();
  fail_usage("unknown diagnostic preset '" + name + "' (expected clean-d20, adv-d50 or clean-d8)");
}

void DiagConfig::validate() const {
  if (min_distractor_size < 2 || max_distractor_size < min_distractor_size)
    fail_usage("distractor sizes must satisfy 2 <= min <= max");
  if (distractor_hyperedges > 0 && max_distractor_size > kCoreVertices + distractor_vertices)
    fail_usage("distractor hyperedges larger than the vertex set");
  if (decoys_per_pattern > 0 && distractor_vertices == 0) fail_usage("decoys need at least one distractor vertex");
  if (train_pairs + test_pairs == 0) fail_usage("empty diagnostic dataset");
}

DiagDataset gen_dataset(const DiagConfig& cfg) {
  cfg.validate();
  DiagDataset ds;
  const auto train_q = schedule(cfg, 0, cfg.train_pairs);
  const auto test_q = schedule(cfg, 1, cfg.test_pairs);
  ds.train.resize(train_q.size());
  ds.test.resize(test_q.size());

  parallel_for(train_q.size(), [&](std::size_t i) {
    ds.train[i] = make_pair(cfg, train_q[i], derive_key(cfg.seed, {stream_tag::kDiagnostic, 0, 1, i}), i, false);
  });

  std::set<std::string> train_signatures;
  for (const auto& p : ds.train) train_signatures.insert(p.signature);

  // A test pair whose signature already occurs in train is redrawn from the
  // next stream; attempts are bounded so the split stays deterministic.
  parallel_for(test_q.size(), [&](std::size_t i) {
    for (std::size_t attempt = 0; attempt < kMaxSplitAttempts; ++attempt) {
      auto p = make_pair(cfg, test_q[i], derive_key(cfg.seed, {stream_tag::kDiagnostic, 1, 1, i, attempt}),
                         cfg.train_pairs + i, true);
      if (train_signatures.count(p.signature)) continue;
      ds.test[i] = std::move(p);
      return;
    }
    fail_usage("infeasible diagnostic config: cannot keep test signatures disjoint from train");
  });
  return ds;
}

std::string query_signature(const DiagSample& s) {
  const Hypergraph& h = s.graph;
  const Index c = h.vertex_index(s.center), u = h.vertex_index(s.u), v = h.vertex_index(s.v);
  std::vector<int> hop(h.num_hyperedges(), 0);
  std::vector<Index> near;  // vertices reached through hop-1 hyperedges
  for (Index x : {c, u, v})
    for (Index e : h.incident(x))
      if (!hop[e]) {
        hop[e] = 1;
        for (Index y : h.members(e)) near.push_back(y);
      }
  for (Index y : near)
    for (Index e : h.incident(y))
      if (!hop[e]) hop[e] = 2;

  std::vector<std::string> patterns;
  for (Index e = 0; e < h.num_hyperedges(); ++e) {
    if (!hop[e]) continue;
    std::size_t nc = 0, nu = 0, no = 0;
    for (Index y : h.members(e)) {
      if (y == c) ++nc;
      else if (y == u || y == v) ++nu;
      else ++no;
    }
    patterns.push_back(std::to_string(hop[e]) + ":" + std::to_string(nc) + std::to_string(nu) + std::to_string(no));
  }
  std::sort(patterns.begin(), patterns.end());
  std::string out;
  for (const auto& p : patterns) out += p + ";";
  return out;
}

std::string EquivalenceReport::describe() const {
  std::string s;
  auto add = [&](bool ok, const char* what) {
    if (ok) return;
    if (!s.empty()) s += ", ";
    s += what;
  };
  add(clique_equal, "clique multisets differ");
  add(query_valid, "query triple invalid or mismatched");
  add(labels_opposite, "labels not opposite");
  add(labels_recomputed, "stored label disagrees with hypergraph");
  add(no_leakage, "extra hyperedge contains the query triple");
  return s.empty() ? "ok" : s;
}

EquivalenceReport verify_equivalence(const MatchedPair& p) {
  EquivalenceReport r;
  r.clique_equal = clique_expand(p.a.graph) == clique_expand(p.b.graph);
  r.labels_opposite = p.a.yes != p.b.yes;
  r.query_valid = p.a.center == p.b.center && p.a.u == p.b.u && p.a.v == p.b.v;
  auto containing = [](const DiagSample& s) -> std::optional<std::size_t> {
    try {
      if (!label(s.graph, s.center, s.u, s.v)) return 0;
      const Index c = s.graph.vertex_index(s.center), u = s.graph.vertex_index(s.u), v = s.graph.vertex_index(s.v);
      std::size_t n = 0;
      for (Index e : s.graph.incident(c)) n += s.graph.contains(e, u) && s.graph.contains(e, v);
      return n;
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  const auto na = containing(p.a), nb = containing(p.b);
  if (!na || !nb) {
    r.query_valid = false;
    return r;
  }
  r.labels_recomputed = (*na > 0) == p.a.yes && (*nb > 0) == p.b.yes;
  r.no_leakage = (p.a.yes ? *na == 1 : *na == 0) && (p.b.yes ? *nb == 1 : *nb == 0);
  return r;
}

DiagMetrics diag_metrics(const std::vector<Answer>& predictions, const std::vector<MatchedPair>& pairs) {
  if (predictions.size() != 2 * pairs.size())
    fail_data("expected " + std::to_string(2 * pairs.size()) + " predictions, got " +
              std::to_string(predictions.size()));
  DiagMetrics m;
  m.pairs = pairs.size();
  if (pairs.empty()) return m;
  std::size_t correct = 0, pair_correct = 0, flips = 0;
  auto gold = [](bool yes) { return yes ? Answer::kYes : Answer::kNo; };
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Answer a = predictions[2 * i], b = predictions[2 * i + 1];
    const bool ca = a == gold(pairs[i].a.yes), cb = b == gold(pairs[i].b.yes);
    correct += ca + cb;
    pair_correct += ca && cb;
    flips += a != Answer::kInvalid && b != Answer::kInvalid && a != b;
    m.invalid += (a == Answer::kInvalid) + (b == Answer::kInvalid);
  }
  const double n = static_cast<double>(pairs.size());
  m.sample_acc = 100.0 * static_cast<double>(correct) / (2.0 * n);
  m.pair_acc = 100.0 * static_cast<double>(pair_correct) / n;
  m.flip_rate = 100.0 * static_cast<double>(flips) / n;
  return m;
}

DiagMetrics clique_baseline(const std::vector<MatchedPair>& pairs, const PairwisePredictor& predictor) {
  std::vector<Answer> preds;
  preds.reserve(2 * pairs.size());
  for (const auto& p : pairs)
    for (const DiagSample* s : {&p.a, &p.b}) preds.push_back(predictor(clique_expand(s->graph), s->center, s->u, s->v));
  return diag_metrics(preds, pairs);
}

Answer pairwise_majority_predictor(const PairMultiset& edges, VertexId c, VertexId u, VertexId v) {
  auto present = [&](VertexId a, VertexId b) {
    auto it = edges.find({std::min(a, b), std::max(a, b)});
    return it != edges.end() && it->second > 0;
  };
  const int votes = present(c, u) + present(c, v) + present(u, v);
  return votes >= 2 ? Answer::kYes : Answer::kNo;
}

void write_diag_jsonl(std::ostream& os, const std::vector<MatchedPair>& pairs) {
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["pair_id"] = p.id;
    j["split"] = p.test ? "test" : "train";
    j["signature"] = p.signature;
    j["query"] = {{"center", p.a.center}, {"u", p.a.u}, {"v", p.a.v}};
    j["A"] = {{"label", p.a.yes ? "Yes" : "No"}, {"hypergraph", to_hgjl_records(p.a.graph)}};
    j["B"] = {{"label", p.b.yes ? "Yes" : "No"}, {"hypergraph", to_hgjl_records(p.b.graph)}};
    os << j.dump() << '\n';
  }
}

std::vector<MatchedPair> read_diag_jsonl(std::istream& is) {
  std::vector<MatchedPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MatchedPair p;
      p.id = j.at("pair_id").get<std::uint64_t>();
      const auto split = j.at("split").get<std::string>();
      if (split != "train" && split != "test") fail_data("unknown split '" + split + "'");
      p.test = split == "test";
      p.signature = j.at("signature").get<std::string>();
      const auto& q = j.at("query");
      for (auto [side, key] : {std::pair{&p.a, "A"}, std::pair{&p.b, "B"}}) {
        const auto& sj = j.at(key);
        const auto lab = sj.at("label").get<std::string>();
        if (lab != "Yes" && lab != "No") fail_data("label must be Yes or No");
        side->yes = lab == "Yes";
        side->graph = from_hgjl_records(sj.at("hypergraph"));
        side->center = q.at("center").get<VertexId>();
        side->u = q.at("u").get<VertexId>();
        side->v = q.at("v").get<VertexId>();
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      fail_data("malformed record: diagnostic line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "diagnostic line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace hgtok
