#include <gtest/gtest.h>

#include <random>

#include "hgtok/kernels.hpp"

using namespace hgtok;

namespace {

Matrix<double> random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> n;
  Matrix<double> m(r, c);
  for (auto& x : m.storage()) x = n(rng);
  return m;
}

void expect_near(const Matrix<double>& a, const Matrix<double>& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.storage()[i], b.storage()[i], tol) << i;
}

}  // namespace

TEST(Kernels, LinearMatchesReference) {
  std::mt19937_64 rng(1);
  for (std::size_t rows : {1u, 3u, 4u, 7u, 13u}) {
    const auto x = random_matrix(rng, rows, 9), w = random_matrix(rng, 5, 9), b = random_matrix(rng, 1, 5);
    Matrix<double> y1(rows, 5), y2(rows, 5);
    kernels::linear<double>(x.cview(), w.cview(), b.storage(), y1.view());
    kernels::reference::linear<double>(x.cview(), w.cview(), b.storage(), y2.view());
    expect_near(y1, y2, 1e-12);

    const auto dy = random_matrix(rng, rows, 5);
    Matrix<double> dx1(rows, 9), dx2(rows, 9), dw1(5, 9), dw2(5, 9);
    std::vector<double> db1(5), db2(5);
    kernels::linear_backward<double>(x.cview(), w.cview(), dy.cview(), dx1.view(), dw1.view(), db1);
    kernels::reference::linear_backward<double>(x.cview(), w.cview(), dy.cview(), dx2.view(), dw2.view(), db2);
    expect_near(dx1, dx2, 1e-12);
    expect_near(dw1, dw2, 1e-12);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(db1[i], db2[i], 1e-12);
  }
}

TEST(Kernels, LayerNormMatchesReference) {
  std::mt19937_64 rng(2);
  const auto x = random_matrix(rng, 6, 10), g = random_matrix(rng, 1, 10), b = random_matrix(rng, 1, 10);
  Matrix<double> y1(6, 10), y2(6, 10), h1(6, 10), h2(6, 10);
  std::vector<double> r1(6), r2(6);
  kernels::layer_norm<double>(x.cview(), g.storage(), b.storage(), y1.view(), h1.view(), r1);
  kernels::reference::layer_norm<double>(x.cview(), g.storage(), b.storage(), y2.view(), h2.view(), r2);
  expect_near(y1, y2, 1e-12);
  const auto dy = random_matrix(rng, 6, 10);
  Matrix<double> dx1(6, 10), dx2(6, 10);
  std::vector<double> dg1(10), dg2(10), db1(10), db2(10);
  kernels::layer_norm_backward<double>(dy.cview(), h1.cview(), r1, g.storage(), dx1.view(), dg1, db1);
  kernels::reference::layer_norm_backward<double>(dy.cview(), h2.cview(), r2, g.storage(), dx2.view(), dg2, db2);
  expect_near(dx1, dx2, 1e-12);
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(dg1[i], dg2[i], 1e-12);
    EXPECT_NEAR(db1[i], db2[i], 1e-12);
  }
}

TEST(Kernels, AttentionMatchesReferenceAndIsCausal) {
  std::mt19937_64 rng(3);
  const std::size_t len = 11, heads = 2, d = 8;
  const auto qkv = random_matrix(rng, len, 3 * d);
  Matrix<double> o1(len, d), o2(len, d), p1(heads * len, len), p2(heads * len, len);
  kernels::causal_attention<double>(qkv.cview(), heads, o1.view(), p1.view());
  kernels::reference::causal_attention<double>(qkv.cview(), heads, o2.view(), p2.view());
  expect_near(o1, o2, 1e-12);
  for (std::size_t r = 0; r < heads * len; ++r) {
    const std::size_t t = r % len;
    double sum = 0;
    for (std::size_t s = 0; s <= t; ++s) sum += p1(r, s);
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  const auto dout = random_matrix(rng, len, d);
  Matrix<double> g1(len, 3 * d), g2(len, 3 * d);
  kernels::causal_attention_backward<double>(qkv.cview(), heads, p1.cview(), dout.cview(), g1.view());
  kernels::reference::causal_attention_backward<double>(qkv.cview(), heads, p2.cview(), dout.cview(), g2.view());
  expect_near(g1, g2, 1e-12);

  // Changing the last row must not move any earlier output.
  auto qkv2 = qkv;
  for (std::size_t c = 0; c < 3 * d; ++c) qkv2(len - 1, c) += 1.0;
  Matrix<double> o3(len, d), p3(heads * len, len);
  kernels::causal_attention<double>(qkv2.cview(), heads, o3.view(), p3.view());
  for (std::size_t t = 0; t + 1 < len; ++t)
    for (std::size_t c = 0; c < d; ++c) EXPECT_EQ(o3(t, c), o1(t, c));
}

TEST(Kernels, PropagationHalfStepsMatchReference) {
  const Hypergraph h = Hypergraph::from_edges({1, 2, 3, 4, 5, 6}, {{1, 2, 3}, {3, 4}, {1, 4, 5}, {2}});
  std::mt19937_64 rng(4);
  const auto vs = random_matrix(rng, 6, 5), off = random_matrix(rng, 3, 5), prev = random_matrix(rng, 6, 5);
  Matrix<double> e1(4, 5), e2(4, 5), v1(6, 5), v2(6, 5);
  kernels::hyperedge_mean<double>(h, vs.cview(), e1.view());
  kernels::reference::hyperedge_mean<double>(h, vs.cview(), e2.view());
  expect_near(e1, e2, 1e-12);
  const std::vector<std::size_t> bucket{0, 1, 2, 1};
  kernels::vertex_mean_with_offsets<double>(h, e1.cview(), bucket, off.cview(), prev.cview(), v1.view());
  kernels::reference::vertex_mean_with_offsets<double>(h, e1.cview(), bucket, off.cview(), prev.cview(), v2.view());
  expect_near(v1, v2, 1e-12);
  // Vertex 6 is isolated and keeps its previous state.
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(v1(5, k), prev(5, k));
}
