#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hgtok/bench.hpp"
#include "hgtok/diagnostic.hpp"
#include "hgtok/error.hpp"
#include "hgtok/hgjl.hpp"

using namespace hgtok;
namespace fs = std::filesystem;

namespace {

const std::string kMini = std::string(HGTOK_SOURCE_DIR) + "/data/mini_corpus";

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("hgtok_bench_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path copy_mini(const std::string& name) {
  const fs::path dst = scratch(name);
  for (const auto& entry : fs::directory_iterator(kMini)) fs::copy_file(entry.path(), dst / entry.path().filename());
  return dst;
}

ErrorKind kind_of(const std::function<void()>& f, std::string* msg = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (msg) *msg = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kUsage;
}

}  // namespace

TEST(Ingest, MiniCorpusMatchesRecount) {
  const Dataset d = ingest(kMini);
  // Independent recount straight from the records.
  std::size_t incidences = 0;
  for (const auto& e : d.graph.hyperedge_records()) incidences += e.members.size();
  EXPECT_EQ(d.manifest.num_vertices, d.graph.vertex_records().size());
  EXPECT_EQ(d.manifest.num_hyperedges, d.graph.hyperedge_records().size());
  EXPECT_EQ(d.manifest.num_incidences, incidences);
  EXPECT_EQ(d.manifest.num_vertices, 16u);
  EXPECT_EQ(d.manifest.num_incidences, 25u);
  EXPECT_EQ(d.vc.ids[0].size() + d.vc.ids[1].size() + d.vc.ids[2].size(), 16u);
  EXPECT_EQ(recompute_manifest(d.graph, d.vc, d.hec, d.manifest), d.manifest);
}

TEST(Ingest, DanglingMember) {
  const fs::path dir = copy_mini("dangling");
  std::ofstream(dir / "hypergraph.hgjl", std::ios::app) << "";
  // Point one member at a vertex that does not exist.
  std::ifstream in(dir / "hypergraph.hgjl");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  const auto pos = text.find("\"members\":[1,2,3]");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 17, "\"members\":[1,2,99]");
  std::ofstream(dir / "hypergraph.hgjl", std::ios::trunc) << text;
  std::string msg;
  EXPECT_EQ(kind_of([&] { ingest(dir.string()); }, &msg), ErrorKind::kData);
  EXPECT_NE(msg.find("99"), std::string::npos) << msg;
}

TEST(Ingest, SplitOverlap) {
  const fs::path dir = copy_mini("overlap");
  std::ofstream(dir / "vc_test.txt", std::ios::app) << "1\n";
  std::string msg;
  EXPECT_EQ(kind_of([&] { ingest(dir.string()); }, &msg), ErrorKind::kData);
  EXPECT_NE(msg.find("split overlap"), std::string::npos) << msg;
}

TEST(Ingest, ManifestMismatch) {
  const fs::path dir = copy_mini("mismatch");
  std::ifstream in(dir / "manifest.json");
  auto j = nlohmann::json::parse(in);
  j["num_incidences"] = 24;
  std::ofstream(dir / "manifest.json", std::ios::trunc) << j.dump();
  std::string msg;
  EXPECT_EQ(kind_of([&] { ingest(dir.string()); }, &msg), ErrorKind::kData);
  EXPECT_NE(msg.find("manifest mismatch"), std::string::npos) << msg;
}

TEST(Ingest, UnknownSplitId) {
  const fs::path dir = copy_mini("unknown");
  std::ofstream(dir / "hec_test.txt", std::ios::app) << "42\n";
  EXPECT_EQ(kind_of([&] { ingest(dir.string()); }), ErrorKind::kData);
}

TEST(Ingest, MalformedSplitLine) {
  const fs::path dir = copy_mini("malformed");
  std::ofstream(dir / "vc_test.txt", std::ios::app) << "abc\n";
  std::string msg;
  EXPECT_EQ(kind_of([&] { ingest(dir.string()); }, &msg), ErrorKind::kData);
  EXPECT_NE(msg.find("malformed record"), std::string::npos) << msg;
}

TEST(Export, IngestExportIsIdentity) {
  const Dataset d = ingest(kMini);
  const fs::path out = scratch("export");
  export_dataset(d, out.string());
  const Dataset back = ingest(out.string());
  EXPECT_EQ(to_hgjl_string(back.graph), to_hgjl_string(d.graph));
  EXPECT_EQ(back.manifest, d.manifest);
  EXPECT_EQ(back.vc, d.vc);
  EXPECT_EQ(back.hec, d.hec);
  // Byte-for-byte: the shipped corpus is already canonical.
  for (const char* f : {"hypergraph.hgjl", "vc_train.txt", "hec_test.txt", "manifest.json"}) {
    std::ifstream a(fs::path(kMini) / f), b(out / f);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << f;
  }
}

TEST(Stats, HA) {
  const auto s = stats(core_pair().first);
  EXPECT_EQ(s.num_vertices, 6u);
  EXPECT_EQ(s.num_hyperedges, 4u);
  EXPECT_EQ(s.num_incidences, 12u);
  EXPECT_EQ(s.order_histogram, (std::map<std::size_t, std::size_t>{{3, 4}}));
  EXPECT_EQ(s.degree_histogram, (std::map<std::size_t, std::size_t>{{2, 6}}));
}

TEST(Stats, Empty) {
  const auto s = stats(Hypergraph{});
  EXPECT_EQ(s.num_vertices, 0u);
  EXPECT_EQ(s.num_hyperedges, 0u);
  EXPECT_EQ(s.num_incidences, 0u);
  EXPECT_TRUE(s.degree_histogram.empty());
  EXPECT_TRUE(s.order_histogram.empty());
}

TEST(Stats, DoubleCountIdentityOnRandomHypergraphs) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 30, m = rng() % 20;
    std::vector<VertexId> vs(n);
    std::iota(vs.begin(), vs.end(), VertexId{0});
    std::vector<std::vector<VertexId>> edges;
    for (std::size_t e = 0; e < m; ++e) {
      std::vector<VertexId> pool = vs;
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(1 + rng() % n);
      edges.push_back(pool);
    }
    const auto s = stats(Hypergraph::from_edges(vs, edges));
    EXPECT_EQ(s.num_incidences, s.sum_hyperedge_orders);
    EXPECT_EQ(s.num_incidences, s.sum_vertex_degrees);
  }
}

TEST(Ccdf, HandValues) {
  auto c = ccdf({1, 2, 2, 4});
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0], (std::pair<std::uint64_t, double>{1, 1.0}));
  EXPECT_EQ(c[1], (std::pair<std::uint64_t, double>{2, 0.75}));
  EXPECT_EQ(c[2], (std::pair<std::uint64_t, double>{4, 0.25}));
  c = ccdf({3, 3, 3, 3});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], (std::pair<std::uint64_t, double>{3, 1.0}));
}

TEST(Ccdf, EmptyIsAnError) { EXPECT_THROW(ccdf({}), Error); }

TEST(Ccdf, MonotoneOnRandomInputs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint64_t> v(1 + rng() % 50);
    for (auto& x : v) x = 1 + rng() % 20;
    const auto c = ccdf(v);
    EXPECT_EQ(c.front().second, 1.0);
    EXPECT_EQ(c.front().first, *std::min_element(v.begin(), v.end()));
    for (std::size_t i = 1; i < c.size(); ++i) {
      EXPECT_GT(c[i].first, c[i - 1].first);
      EXPECT_LE(c[i].second, c[i - 1].second);
      EXPECT_GT(c[i].second, 0.0);
    }
  }
}

TEST(Ccdf, CsvFormat) {
  std::ostringstream os;
  write_ccdf_csv(os, ccdf({1, 2, 2, 4}));
  EXPECT_EQ(os.str(), "value,fraction\n1,1\n2,0.75\n4,0.25\n");
}
