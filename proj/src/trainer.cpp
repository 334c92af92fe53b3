#include "hgtok/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "hgtok/error.hpp"
#include "hgtok/rng.hpp"

namespace hgtok {

void TrainConfig::validate() const {
  if (!(lr > 0)) fail_usage("lr must be positive");
  if (lambda_ord < 0 || lambda_rel < 0) fail_usage("loss weights must be nonnegative");
  if (warmup_ratio < 0 || warmup_ratio > 1) fail_usage("warmup ratio must lie in [0, 1]");
  if (batch == 0) fail_usage("batch size must be positive");
  if (weight_decay < 0 || grad_clip < 0) fail_usage("weight decay and clip norm must be nonnegative");
}

std::vector<RelationPair> sample_relation_pairs(const HidtoSequence& seq, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> real;
  for (std::size_t i = 0; i < seq.detail_size; ++i)
    if (seq.is_real_detail(i)) real.push_back(i);
  std::array<std::vector<RelationPair>, kNumRelations> by_class;
  for (std::size_t a = 0; a < real.size(); ++a)
    for (std::size_t b = a + 1; b < real.size(); ++b) {
      const Relation r = seq.relation(real[a], real[b]);
      by_class[static_cast<std::size_t>(r)].push_back({real[a], real[b], r});
    }
  Rng rng(derive_key(seed, {stream_tag::kRelations}));
  for (auto& pool : by_class)
    for (std::size_t i = 0; i + 1 < pool.size(); ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);

  std::vector<RelationPair> out;
  std::array<std::size_t, kNumRelations> cursor{};
  // Cycle incidence, co-member, unrelated.
  constexpr std::array<Relation, kNumRelations> order{Relation::kIncidence, Relation::kCoMember, Relation::kUnrelated};
  bool progress = true;
  while (out.size() < k && progress) {
    progress = false;
    for (Relation r : order) {
      const auto c = static_cast<std::size_t>(r);
      if (out.size() >= k || cursor[c] >= by_class[c].size()) continue;
      out.push_back(by_class[c][cursor[c]++]);
      progress = true;
    }
  }
  return out;
}

template <class T>
std::pair<double, std::size_t> cross_entropy(const Matrix<T>& logits, std::span<const int> targets, double scale,
                                             Matrix<T>* grad) {
  if (targets.size() != logits.rows()) fail_numeric("cross-entropy targets do not match the logit rows");
  std::size_t count = 0;
  for (int t : targets) count += t >= 0;
  if (grad) grad->resize(logits.rows(), logits.cols());
  if (count == 0) return {0.0, 0};
  double total = 0;
  const T g = static_cast<T>(scale / static_cast<double>(count));
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (targets[i] < 0) continue;
    const auto y = static_cast<std::size_t>(targets[i]);
    if (y >= logits.cols()) fail_numeric("cross-entropy target out of range");
    auto row = logits.row(i);
    const T mx = *std::max_element(row.begin(), row.end());
    T z = 0;
    for (T v : row) z += std::exp(v - mx);
    total += static_cast<double>(std::log(z) - (row[y] - mx));
    if (grad) {
      for (std::size_t k = 0; k < row.size(); ++k) (*grad)(i, k) = std::exp(row[k] - mx) / z * g;
      (*grad)(i, y) -= g;
    }
  }
  return {total / static_cast<double>(count), count};
}

template <class T>
LossReport example_loss(const TinyLm& lm, const HipParams<T>& params, const Example& ex, const TrainConfig& cfg,
                        HipParams<T>* grads, double grad_scale) {
  Matrix<T> features(ex.features.rows(), ex.features.cols());
  std::copy(ex.features.storage().begin(), ex.features.storage().end(), features.storage().begin());
  const HipCache<T> cache = hip_forward(params, features.cview(), ex.pattern);

  LossReport r;
  const LmInput<T> in{ex.dialogue.ids, ex.dialogue.region_begin, cache.tokens.cview()};
  Matrix<T> d_region;
  const LmLossResult lmr = grads ? lm.loss_and_backward<T>(in, ex.dialogue.ids, ex.dialogue.mask, &d_region, nullptr)
                                 : lm.loss<T>(in, ex.dialogue.ids, ex.dialogue.mask);
  r.lm = lmr.loss;
  r.supervised_tokens = lmr.count;

  const OrdLogits<T> ord = aux_ord_logits(cache, params, ex.order_targets);
  Matrix<T> d_ord;
  const auto [lo, no] = cross_entropy(ord.logits, ex.order_targets, cfg.lambda_ord * grad_scale, grads ? &d_ord : nullptr);
  r.ord = lo;
  r.eligible_slots = no;

  std::vector<SlotPair> pairs;
  std::vector<int> rel_targets;
  for (const auto& p : ex.relations) {
    pairs.emplace_back(p.i, p.j);
    rel_targets.push_back(static_cast<int>(p.label));
  }
  const Matrix<T> rel = aux_rel_logits(cache, params, pairs, ex.detail_size);
  Matrix<T> d_rel;
  const auto [lr, nr] = cross_entropy(rel, rel_targets, cfg.lambda_rel * grad_scale, grads ? &d_rel : nullptr);
  r.rel = lr;
  r.pairs = nr;
  r.total = r.lm + cfg.lambda_ord * r.ord + cfg.lambda_rel * r.rel;
  if (!std::isfinite(r.total)) fail_numeric("non-finite training loss");

  if (grads) {
    const T s = static_cast<T>(grad_scale);
    for (T& x : d_region.storage()) x *= s;
    HipUpstream<T> up;
    up.d_tokens = d_region.cview();
    up.d_ord = d_ord.cview();
    up.pairs = pairs;
    up.d_rel = d_rel.cview();
    if (pairs.empty()) up.d_rel = {};
    hip_backward(cache, params, up, *grads);
  }
  return r;
}

double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  const auto warm = static_cast<std::size_t>(std::ceil(cfg.warmup_ratio * static_cast<double>(total_steps)));
  if (step < warm) return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warm);
  const double span = static_cast<double>(std::max<std::size_t>(1, total_steps - warm));
  const double progress = std::min(1.0, static_cast<double>(step - warm) / span);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

LossReport train_step(const TinyLm& lm, HipParams<float>& params, AdamState& opt,
                      const std::vector<const Example*>& batch, const TrainConfig& cfg, std::size_t total_steps) {
  if (batch.empty()) fail_usage("empty batch");
  HipParams<float> grads = HipParams<float>::zeros(params.config);
  grads.generation = params.generation;
  LossReport mean;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const Example* ex : batch) {
    const LossReport r = example_loss<float>(lm, params, *ex, cfg, &grads, inv);
    mean.lm += r.lm * inv;
    mean.ord += r.ord * inv;
    mean.rel += r.rel * inv;
    mean.total += r.total * inv;
    mean.supervised_tokens += r.supervised_tokens;
    mean.eligible_slots += r.eligible_slots;
    mean.pairs += r.pairs;
  }

  double norm2 = 0;
  for (float g : grads.data) norm2 += static_cast<double>(g) * g;
  if (!std::isfinite(norm2)) fail_numeric("non-finite gradient");
  double clip = 1.0;
  if (cfg.grad_clip > 0 && std::sqrt(norm2) > cfg.grad_clip) clip = cfg.grad_clip / std::sqrt(norm2);

  if (opt.m.size() != params.data.size()) {
    opt.m.assign(params.data.size(), 0.0f);
    opt.v.assign(params.data.size(), 0.0f);
  }
  const double lr = scheduled_lr(cfg, opt.step, total_steps);
  ++opt.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
  const auto b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  for (std::size_t i = 0; i < params.data.size(); ++i) {
    const float g = static_cast<float>(grads.data[i] * clip);
    opt.m[i] = b1 * opt.m[i] + (1 - b1) * g;
    opt.v[i] = b2 * opt.v[i] + (1 - b2) * g * g;
    const double mhat = opt.m[i] / bc1, vhat = opt.v[i] / bc2;
    const double upd = mhat / (std::sqrt(vhat) + cfg.adam_eps) + cfg.weight_decay * params.data[i];
    params.data[i] = static_cast<float>(params.data[i] - lr * upd);
  }
  ++params.generation;
  return mean;
}

std::size_t total_train_steps(std::size_t num_examples, const TrainConfig& cfg) {
  return cfg.epochs * ((num_examples + cfg.batch - 1) / cfg.batch);
}

void train(const TinyLm& lm, HipParams<float>& params, const std::vector<Example>& examples, const TrainConfig& cfg,
           std::ostream* log, const std::function<void(std::size_t, const LossReport&)>& on_step) {
  cfg.validate();
  if (examples.empty()) fail_data("no training examples");
  const std::size_t total = total_train_steps(examples.size(), cfg);
  AdamState opt;
  if (log) *log << "step,L_lm,L_ord,L_rel,total\n";
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_key(cfg.seed, {stream_tag::kShuffle, epoch}));
    for (std::size_t i = 0; i + 1 < order.size(); ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      std::vector<const Example*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch); ++i) batch.push_back(&examples[order[i]]);
      const LossReport r = train_step(lm, params, opt, batch, cfg, total);
      ++step;
      if (log) {
        char line[160];
        std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f,%.6f\n", step, r.lm, r.ord, r.rel, r.total);
        *log << line;
      }
      if (on_step) on_step(step, r);
    }
  }
}

Matrix<float> project_tokens(const HipParams<float>& params, const Example& ex) {
  Matrix<float> features(ex.features.rows(), ex.features.cols());
  std::copy(ex.features.storage().begin(), ex.features.storage().end(), features.storage().begin());
  return hip_forward(params, features.cview(), ex.pattern).tokens;
}

Prediction predict(const TinyLm& lm, const HipParams<float>& params, const Example& ex, std::size_t max_new) {
  const Matrix<float> tokens = project_tokens(params, ex);
  const LmInput<float> in{ex.prompt.ids, ex.prompt.region_begin, tokens.cview()};
  Prediction p;
  p.text = decode_bytes(lm.generate(in, max_new));
  p.label = parse_answer(p.text, ex.labels);
  p.correct = p.label && *p.label == ex.gold;
  return p;
}

EvalReport evaluate(const TinyLm& lm, const HipParams<float>& params, const std::vector<Example>& examples,
                    std::size_t max_new) {
  EvalReport r;
  std::size_t correct = 0;
  for (const Example& ex : examples) {
    r.predictions.push_back(predict(lm, params, ex, max_new));
    correct += r.predictions.back().correct;
    r.invalid += !r.predictions.back().label;
  }
  r.accuracy = examples.empty() ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(examples.size());
  return r;
}

template std::pair<double, std::size_t> cross_entropy<float>(const Matrix<float>&, std::span<const int>, double,
                                                             Matrix<float>*);
template std::pair<double, std::size_t> cross_entropy<double>(const Matrix<double>&, std::span<const int>, double,
                                                              Matrix<double>*);
template LossReport example_loss<float>(const TinyLm&, const HipParams<float>&, const Example&, const TrainConfig&,
                                        HipParams<float>*, double);
template LossReport example_loss<double>(const TinyLm&, const HipParams<double>&, const Example&, const TrainConfig&,
                                         HipParams<double>*, double);

}  // namespace hgtok
