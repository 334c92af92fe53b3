#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hgtok/config.hpp"
#include "hgtok/error.hpp"
#include "hgtok/semantic.hpp"
#include "hgtok/token_export.hpp"

using namespace hgtok;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hgtok_unit_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(RunConfigText, DefaultsAndOverrides) {
  const RunConfig d = parse_run_config("");
  EXPECT_EQ(d.tmpl.layer_budgets, (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(d.lm.d_model, 128u);
  const RunConfig c = parse_run_config("# comment\n\nbudgets = 3,2\nlr=0.01\nwith_overview=false\nseed=9\n");
  EXPECT_EQ(c.tmpl.layer_budgets, (std::vector<std::size_t>{3, 2}));
  EXPECT_EQ(c.train.lr, 0.01);
  EXPECT_FALSE(c.tmpl.with_overview);
  EXPECT_EQ(c.seed, 9u);
}

TEST(RunConfigText, RoundTrip) {
  RunConfig c = parse_run_config("budgets=4,3\norder_bounds=2,5\nlambda_rel=0.3\nd_llm=64\nlm_heads=2\n");
  const std::string text = to_config_text(c);
  EXPECT_EQ(to_config_text(parse_run_config(text)), text);
}

TEST(RunConfigText, RejectsBadInput) {
  for (const char* bad : {"nonsense=1\n", "budgets\n", "lr=abc\n", "epochs=-1\n", "with_overview=maybe\n",
                          "budgets=\n", "center_role=edge\n", "budgets=100,100\n"}) {
    try {
      parse_run_config(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kUsage) << bad;
    }
  }
  EXPECT_THROW(load_run_config(scratch("missing.cfg").string()), Error);
}

TEST(Semantic, StubIsDeterministicUnitNormAndTextKeyed) {
  const Hypergraph h({{1, "apple", {}}, {2, std::nullopt, {}}, {3, "apple", {}}},
                     {{0, {1, 2}, "fruit", {}}, {1, {2, 3}, std::nullopt, {}}});
  const auto a = SemanticProvider::stub(8, 5), b = SemanticProvider::stub(8, 5), other = SemanticProvider::stub(8, 6);
  std::vector<double> x(8), y(8), z(8);
  a.vertex(h, 0, x);
  b.vertex(h, 0, y);
  EXPECT_EQ(x, y);
  double norm = 0;
  for (double v : x) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-12);
  a.vertex(h, 2, z);  // same text as vertex 1
  EXPECT_EQ(x, z);
  a.vertex(h, 1, z);
  EXPECT_NE(x, z);
  other.vertex(h, 0, z);
  EXPECT_NE(x, z);
  EXPECT_TRUE(a.hyperedge(h, 0, x));
  EXPECT_FALSE(a.hyperedge(h, 1, x));
  EXPECT_THROW(SemanticProvider::stub(0, 1), Error);
  std::vector<double> wrong(3);
  EXPECT_THROW(a.vertex(h, 0, wrong), Error);
}

TEST(Semantic, EmbeddingTablesRoundTripAndLookup) {
  EmbeddingTable t{3, 2, {0.5f, -1.0f, 2.0f, 3.0f, 1e-7f, -0.0f}};
  const auto path = scratch("emb.bin").string();
  write_embedding_table(t, path);
  EXPECT_EQ(fs::file_size(path), 6u + 8u + 6u * 4u);
  const EmbeddingTable r = read_embedding_table(path);
  EXPECT_EQ(r.count, 3u);
  EXPECT_EQ(r.dim, 2u);
  EXPECT_EQ(r.values, t.values);

  const Hypergraph h = Hypergraph::from_edges({{0, 2}});
  const auto p = SemanticProvider::tables(r, EmbeddingTable{1, 2, {7.0f, 8.0f}});
  std::vector<double> out(2);
  p.vertex(h, 1, out);
  EXPECT_EQ(out, (std::vector<double>{1e-7f, -0.0f}));
  EXPECT_TRUE(p.hyperedge(h, 0, out));
  EXPECT_EQ(out, (std::vector<double>{7.0, 8.0}));

  const Hypergraph far = Hypergraph::from_edges({{0, 5}});
  EXPECT_THROW(p.vertex(far, 1, out), Error);
  EXPECT_THROW(SemanticProvider::tables(r, EmbeddingTable{1, 3, {1, 2, 3}}), Error);
  std::ofstream(scratch("junk.bin")) << "NOTEMB";
  EXPECT_THROW(read_embedding_table(scratch("junk.bin").string()), Error);
}

TEST(TokenExport, ByteLayoutAndRoundTrip) {
  Matrix<float> m(2, 3);
  for (std::size_t i = 0; i < 6; ++i) m.storage()[i] = static_cast<float>(i) - 2.5f;
  std::ostringstream os;
  write_token_export(os, m);
  const std::string bytes = os.str();
  ASSERT_EQ(bytes.size(), 6u + 8u + 24u);
  EXPECT_EQ(bytes.substr(0, 6), "HGTOK1");
  EXPECT_EQ(bytes.substr(6, 8), std::string("\x02\0\0\0\x03\0\0\0", 8));
  std::istringstream is(bytes);
  const Matrix<float> r = read_token_export(is);
  EXPECT_EQ(r.rows(), 2u);
  EXPECT_EQ(r.cols(), 3u);
  EXPECT_EQ(r.storage(), m.storage());
}

TEST(TokenExport, RejectsMalformedFiles) {
  Matrix<float> m(1, 2, 1.0f);
  std::ostringstream os;
  write_token_export(os, m);
  const std::string good = os.str();
  for (const std::string& bad : {good.substr(0, good.size() - 1), good + "x", std::string("HGTOK2") + good.substr(6),
                                 good.substr(0, 9)}) {
    std::istringstream is(bad);
    try {
      read_token_export(is);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kData);
    }
  }
}
