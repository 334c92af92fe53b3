#pragma once

// Projector-only training against a frozen TinyLm: masked LM loss on the
// answer span, order-bucket and relation auxiliary losses, AdamW with a
// warmup + cosine schedule, and greedy-decoding evaluation.

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hgtok/hidto.hpp"
#include "hgtok/hip.hpp"
#include "hgtok/protocol.hpp"
#include "hgtok/tiny_lm.hpp"

namespace hgtok {

struct TrainConfig {
  double lr = 2e-3;
  double warmup_ratio = 0.03;
  double lambda_ord = 0.1;
  double lambda_rel = 0.1;
  std::size_t epochs = 2;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  std::size_t k_rel = 16;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  std::size_t max_new_tokens = 32;
  void validate() const;
};

struct RelationPair {
  std::size_t i = 0, j = 0;  // i < j, both real detail slots
  Relation label = Relation::kUnrelated;
};

// Up to k pairs, cycling over the three classes so each is represented when
// available. Pairs are canonical (i < j).
std::vector<RelationPair> sample_relation_pairs(const HidtoSequence& seq, std::size_t k, std::uint64_t seed);

// Everything one training/evaluation sample needs; independent of parameters.
struct Example {
  Matrix<double> features;       // encapsulated tokens
  IncidencePattern pattern;
  std::size_t detail_size = 0;
  std::vector<int> order_targets;
  std::vector<RelationPair> relations;
  DialogueSample dialogue;        // prompt + gold answer
  DialogueSample prompt;          // prompt only, for decoding
  std::vector<std::string> labels;
  std::size_t gold = 0;           // index into labels
};

struct LossReport {
  double lm = 0, ord = 0, rel = 0, total = 0;
  std::size_t supervised_tokens = 0, eligible_slots = 0, pairs = 0;
};

// Mean softmax cross-entropy of rows with target >= 0; writes d(logits) scaled
// by `scale / count` into grad when non-null. Returns {loss, count}.
template <class T>
std::pair<double, std::size_t> cross_entropy(const Matrix<T>& logits, std::span<const int> targets, double scale,
                                             Matrix<T>* grad);

// Loss for one example; accumulates parameter gradients (scaled by grad_scale)
// into grads when non-null.
template <class T>
LossReport example_loss(const TinyLm& lm, const HipParams<T>& params, const Example& ex, const TrainConfig& cfg,
                        HipParams<T>* grads, double grad_scale = 1.0);

struct AdamState {
  std::vector<float> m, v;
  std::size_t step = 0;
};

// Warmup (linear) then cosine decay to zero over total_steps.
double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps);

// One optimizer step over a batch. Throws a numeric error (without touching
// params) when any loss is non-finite.
LossReport train_step(const TinyLm& lm, HipParams<float>& params, AdamState& opt, const std::vector<const Example*>& batch,
                      const TrainConfig& cfg, std::size_t total_steps);

// Runs cfg.epochs over the examples in seeded shuffled order. When log is
// non-null, one CSV row "step,L_lm,L_ord,L_rel,total" is written per step.
void train(const TinyLm& lm, HipParams<float>& params, const std::vector<Example>& examples, const TrainConfig& cfg,
           std::ostream* log, const std::function<void(std::size_t, const LossReport&)>& on_step = {});

std::size_t total_train_steps(std::size_t num_examples, const TrainConfig& cfg);

struct Prediction {
  std::string text;                  // decoded answer bytes
  std::optional<std::size_t> label;  // parsed label, nullopt when invalid
  bool correct = false;
};

struct EvalReport {
  std::vector<Prediction> predictions;
  double accuracy = 0;  // percent
  std::size_t invalid = 0;
};

Matrix<float> project_tokens(const HipParams<float>& params, const Example& ex);
Prediction predict(const TinyLm& lm, const HipParams<float>& params, const Example& ex, std::size_t max_new);
EvalReport evaluate(const TinyLm& lm, const HipParams<float>& params, const std::vector<Example>& examples,
                    std::size_t max_new);

}  // namespace hgtok
