#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "../support/train_fixture.hpp"
#include "hgtok/diagnostic.hpp"
#include "hgtok/error.hpp"
#include "hgtok/trainer.hpp"

using namespace hgtok;

namespace {

const fixture::TinySetup& setup() {
  static const fixture::TinySetup s = fixture::tiny_setup(21, 4);
  return s;
}

}  // namespace

TEST(CrossEntropy, PerfectAndUniform) {
  Matrix<double> logits(3, 4, 0.0);
  std::vector<int> t{1, -1, 3};
  auto [loss, n] = cross_entropy<double>(logits, t, 1.0, nullptr);
  EXPECT_EQ(n, 2u);
  EXPECT_NEAR(loss, std::log(4.0), 1e-15);
  logits(0, 1) = logits(2, 3) = 1e3;
  std::tie(loss, n) = cross_entropy<double>(logits, t, 1.0, nullptr);
  EXPECT_EQ(loss, 0.0);
  const std::vector<int> none{-1, -1, -1};
  std::tie(loss, n) = cross_entropy<double>(logits, none, 1.0, nullptr);
  EXPECT_EQ(loss, 0.0);
  EXPECT_EQ(n, 0u);
}

TEST(RelationPairs, GroundTruthOnHA) {
  const Hypergraph ha = core_pair().first;
  TemplateSpec spec;
  spec.layer_budgets = {2, 2};
  spec.with_overview = false;
  const HidtoSequence s = serialize(ha, {CenterRole::kVertex, 1}, Template::build(spec), 0);
  // Slots 1, 2 are hyperedges; 3, 4 hang under slot 1 and 5, 6 under slot 2.
  EXPECT_EQ(s.relation(1, 3), Relation::kIncidence);
  EXPECT_EQ(s.relation(0, 1), Relation::kIncidence);
  EXPECT_EQ(s.relation(3, 4), Relation::kCoMember);
  EXPECT_EQ(s.relation(1, 2), Relation::kUnrelated);
  // Members of different sampled hyperedges that share none of them.
  for (std::size_t i : {3, 4})
    for (std::size_t j : {5, 6}) EXPECT_EQ(s.relation(i, j), Relation::kUnrelated);

  const auto pairs = sample_relation_pairs(s, 9, 4);
  EXPECT_EQ(pairs.size(), 9u);
  std::array<std::size_t, 3> seen{};
  for (const auto& p : pairs) {
    EXPECT_LT(p.i, p.j);
    EXPECT_EQ(p.label, s.relation(p.i, p.j));
    ++seen[static_cast<std::size_t>(p.label)];
  }
  for (auto c : seen) EXPECT_GE(c, 2u);
  EXPECT_EQ(sample_relation_pairs(s, 9, 4).size(), pairs.size());
  EXPECT_EQ(sample_relation_pairs(s, 1000, 4).size(), 21u);  // C(7, 2)
}

TEST(Loss, AdditivityAndZeroLambda) {
  const auto& s = setup();
  const TinyLm lm = make_frozen_lm(s.cfg);
  const auto p = HipParams<double>::init(s.hip, 1);
  TrainConfig cfg = s.cfg.train;
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    cfg.lambda_ord = static_cast<double>(rng() % 100) / 37.0;
    cfg.lambda_rel = static_cast<double>(rng() % 100) / 41.0;
    const LossReport r = example_loss<double>(lm, p, s.examples[trial % s.examples.size()], cfg, nullptr);
    EXPECT_NEAR(r.total, r.lm + cfg.lambda_ord * r.ord + cfg.lambda_rel * r.rel, 1e-9);
    EXPECT_GE(r.lm, 0.0);
    EXPECT_GE(r.ord, 0.0);
    EXPECT_GE(r.rel, 0.0);
  }
  cfg.lambda_ord = cfg.lambda_rel = 0;
  const LossReport z = example_loss<double>(lm, p, s.examples[0], cfg, nullptr);
  EXPECT_EQ(z.total, z.lm);
}

TEST(Loss, TotalGradientFiniteDifferences) {
  const auto& s = setup();
  const TinyLm lm = make_frozen_lm(s.cfg);
  auto p = HipParams<double>::init(s.hip, 3);
  const Example& ex = s.examples[1];
  const TrainConfig& cfg = s.cfg.train;
  auto g = HipParams<double>::zeros(s.hip);
  example_loss<double>(lm, p, ex, cfg, &g);
  std::mt19937_64 rng(3);
  double worst = 0;
  for (int k = 0; k < 10; ++k) {
    // Favour entries with a material gradient so the check is informative.
    std::size_t i;
    do i = rng() % p.data.size();
    while (std::abs(g.data[i]) < 1e-6);
    const double keep = p.data[i];
    p.data[i] = keep + 1e-5;
    const double up = example_loss<double>(lm, p, ex, cfg, nullptr).total;
    p.data[i] = keep - 1e-5;
    const double down = example_loss<double>(lm, p, ex, cfg, nullptr).total;
    p.data[i] = keep;
    const double fd = (up - down) / 2e-5;
    worst = std::max(worst, std::abs(fd - g.data[i]) / std::max(std::abs(fd), std::abs(g.data[i])));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Train, FrozenLmMovingProjectorAndDeterminism) {
  const auto& s = setup();
  const TinyLm lm = make_frozen_lm(s.cfg);
  const std::string before = lm.parameter_bytes();
  auto run = [&] {
    auto p = HipParams<float>::init(s.hip, s.cfg.seed);
    TrainConfig cfg = s.cfg.train;
    cfg.epochs = 5;  // 4 pairs -> 8 examples -> 4 steps per epoch
    std::ostringstream log;
    train(lm, p, s.examples, cfg, &log);
    return std::make_pair(p, log.str());
  };
  const auto [p1, log1] = run();
  const auto [p2, log2] = run();
  EXPECT_EQ(lm.parameter_bytes(), before);
  EXPECT_NE(p1.data, HipParams<float>::init(s.hip, s.cfg.seed).data);
  EXPECT_EQ(p1.data, p2.data);
  EXPECT_EQ(log1, log2);
  EXPECT_EQ(log1.rfind("step,L_lm,L_ord,L_rel,total\n1,", 0), 0u);
  EXPECT_EQ(std::count(log1.begin(), log1.end(), '\n'), 21);
}

TEST(Train, ZeroGradientBatchLeavesParamsUnchanged) {
  const auto& s = setup();
  // An all-zero LM has uniform logits whatever its input, so no gradient reaches T(c).
  const TinyLm base = make_frozen_lm(s.cfg);
  const TinyLm flat = TinyLm::from_parameters(base.config(), std::vector<float>(base.parameter_count(), 0.0f));
  auto p = HipParams<float>::init(s.hip, 1);
  const auto keep = p.data;
  TrainConfig cfg = s.cfg.train;
  cfg.lambda_ord = cfg.lambda_rel = 0;
  AdamState opt;
  const std::vector<const Example*> batch{&s.examples[0], &s.examples[1]};
  train_step(flat, p, opt, batch, cfg, 10);
  EXPECT_EQ(p.data, keep);
}

TEST(Train, ScheduleWarmupThenCosine) {
  TrainConfig cfg;
  cfg.lr = 1.0;
  cfg.warmup_ratio = 0.1;
  EXPECT_NEAR(scheduled_lr(cfg, 0, 100), 0.1, 1e-12);
  EXPECT_NEAR(scheduled_lr(cfg, 9, 100), 1.0, 1e-12);
  EXPECT_NEAR(scheduled_lr(cfg, 10, 100), 1.0, 1e-12);
  EXPECT_NEAR(scheduled_lr(cfg, 55, 100), 0.5, 1e-12);
  for (std::size_t t = 11; t < 100; ++t) EXPECT_LE(scheduled_lr(cfg, t, 100), scheduled_lr(cfg, t - 1, 100));
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  cfg.lr = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.lambda_ord = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.batch = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Evaluate, AccuracyIsTheRecountedMean) {
  const auto& s = setup();
  const TinyLm lm = make_frozen_lm(s.cfg);
  const auto p = HipParams<float>::init(s.hip, 2);
  const EvalReport r = evaluate(lm, p, s.examples, 4);
  ASSERT_EQ(r.predictions.size(), s.examples.size());
  std::size_t correct = 0, invalid = 0;
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    const auto& pr = r.predictions[i];
    EXPECT_EQ(pr.label, parse_answer(pr.text, s.examples[i].labels));
    EXPECT_EQ(pr.correct, pr.label == s.examples[i].gold);
    correct += pr.correct;
    invalid += !pr.label;
  }
  EXPECT_DOUBLE_EQ(r.accuracy, 100.0 * static_cast<double>(correct) / static_cast<double>(r.predictions.size()));
  EXPECT_EQ(r.invalid, invalid);
}
