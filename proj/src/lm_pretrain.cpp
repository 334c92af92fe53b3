#include "hgtok/lm_pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "hgtok/error.hpp"
#include "hgtok/rng.hpp"

namespace hgtok {

namespace {

constexpr const char* kWords[] = {
    "apple", "river", "stone", "cloud", "garden", "window", "silver", "forest", "candle", "bridge",
    "harbor", "pepper", "meadow", "rocket", "violin", "marble", "lantern", "pillow", "desert", "falcon",
    "copper", "island", "mirror", "orchid", "saddle", "tunnel", "walnut", "anchor", "basket", "cotton",
    "dragon", "engine", "feather", "glacier", "hammer", "jacket", "kettle", "ladder", "magnet", "needle",
    "oyster", "pebble", "quartz", "ribbon", "shadow", "thunder", "velvet", "wizard"};
constexpr std::size_t kNumWords = sizeof(kWords) / sizeof(kWords[0]);

std::vector<std::size_t> distinct_words(Rng& rng, std::size_t k) {
  std::vector<std::size_t> pool(kNumWords);
  for (std::size_t i = 0; i < kNumWords; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(kNumWords - i)]);
  pool.resize(k);
  return pool;
}

std::string join_words(const std::vector<std::size_t>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ", ";
    s += kWords[ids[i]];
  }
  return s;
}

PretrainDocument membership(Rng& rng) {
  const std::size_t k = 3 + rng.index(6);
  auto ids = distinct_words(rng, k + 1);
  const std::size_t outsider = ids.back();
  ids.pop_back();
  const bool yes = rng.index(2) == 0;
  const std::size_t probe = yes ? ids[rng.index(k)] : outsider;
  return {"Given a list of words: " + join_words(ids) + ".\nQuestion: Does the list contain the word " +
              kWords[probe] + "? Directly answer Yes or No.\nAnswer: ",
          yes ? "Yes" : "No"};
}

PretrainDocument pair_together(Rng& rng) {
  // Several groups; asks whether two words share a group.
  const std::size_t groups = 2 + rng.index(3);
  auto ids = distinct_words(rng, groups * 3);
  std::string text = "Given some groups of words:";
  for (std::size_t g = 0; g < groups; ++g)
    text += " (" + join_words({ids[3 * g], ids[3 * g + 1], ids[3 * g + 2]}) + ")";
  const bool yes = rng.index(2) == 0;
  const std::size_t g = rng.index(groups);
  const std::size_t a = ids[3 * g + rng.index(3)];
  std::size_t b;
  if (yes) {
    do b = ids[3 * g + rng.index(3)];
    while (b == a);
  } else {
    const std::size_t h = (g + 1 + rng.index(groups - 1)) % groups;
    b = ids[3 * h + rng.index(3)];
  }
  text += ".\nQuestion: Do the words " + std::string(kWords[a]) + " and " + kWords[b] +
          " occur in a single group? Directly answer Yes or No.\nAnswer: ";
  return {text, yes ? "Yes" : "No"};
}

PretrainDocument compare(Rng& rng) {
  const std::size_t a = rng.index(100);
  std::size_t b;
  do b = rng.index(100);
  while (b == a);
  return {"Given two numbers: " + std::to_string(a) + " and " + std::to_string(b) +
              ".\nQuestion: Is the first number larger than the second? Directly answer Yes or No.\nAnswer: ",
          a > b ? "Yes" : "No"};
}

PretrainDocument tagged(Rng& rng) {
  const std::size_t classes = 2 + rng.index(6);
  const std::size_t tag = rng.index(classes);
  const auto ids = distinct_words(rng, 2 + rng.index(4));
  std::string cands;
  for (std::size_t c = 0; c < classes; ++c) cands += (c ? ", class " : "class ") + std::to_string(c);
  return {"Given a note tagged class " + std::to_string(tag) + ": " + join_words(ids) +
              ".\nQuestion: Which category is the note tagged with? Candidates: " + cands +
              ". Answer with exactly one category name.\nAnswer: ",
          "class " + std::to_string(tag)};
}

}  // namespace

void LmPretrainConfig::validate() const {
  if (batch == 0) fail_usage("pretrain batch must be positive");
  if (!(lr > 0) || !std::isfinite(lr)) fail_usage("pretrain lr must be positive");
  if (warmup_ratio < 0 || warmup_ratio > 1) fail_usage("pretrain warmup_ratio must be in [0, 1]");
}

PretrainDocument pretrain_document(std::uint64_t key) {
  Rng rng(key);
  switch (rng.index(4)) {
    case 0: return membership(rng);
    case 1: return pair_together(rng);
    case 2: return compare(rng);
    default: return tagged(rng);
  }
}

std::vector<int> encode_document(const PretrainDocument& d) {
  std::vector<int> ids{vocab::kBos};
  for (unsigned char c : d.prompt) ids.push_back(c);
  for (unsigned char c : d.answer) ids.push_back(c);
  ids.push_back(vocab::kEos);
  return ids;
}

TinyLm pretrain_lm(const TinyLm& init, const LmPretrainConfig& cfg, std::uint64_t seed, std::ostream* log) {
  cfg.validate();
  std::vector<float> theta(init.parameters().begin(), init.parameters().end());
  if (cfg.steps == 0) return TinyLm::from_parameters(init.config(), std::move(theta));
  std::vector<float> m(theta.size(), 0.0f), v(theta.size(), 0.0f);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const auto warmup = static_cast<std::size_t>(std::ceil(cfg.warmup_ratio * static_cast<double>(cfg.steps)));
  if (log) *log << "step,loss\n";

  TinyLm lm = TinyLm::from_parameters(init.config(), theta);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    LmGrads<float> g;
    double loss = 0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const auto doc = pretrain_document(derive_key(seed, {stream_tag::kLm, step, b}));
      std::vector<int> ids = encode_document(doc);
      if (ids.size() > init.config().max_len) ids.resize(init.config().max_len);
      std::vector<std::uint8_t> mask(ids.size(), 1);
      mask[0] = 0;
      LmInput<float> in{ids, 0, {}};
      LmGrads<float> gi;
      loss += lm.loss_and_backward<float>(in, ids, mask, nullptr, &gi).loss / static_cast<double>(cfg.batch);
      if (g.data.empty()) g.data.assign(gi.data.size(), 0.0f);
      for (std::size_t i = 0; i < gi.data.size(); ++i) g.data[i] += gi.data[i] / static_cast<float>(cfg.batch);
    }
    double norm2 = 0;
    for (float x : g.data) norm2 += static_cast<double>(x) * x;
    if (!std::isfinite(norm2)) fail_numeric("non-finite gradient during LM pretraining");
    const double clip = cfg.grad_clip > 0 && std::sqrt(norm2) > cfg.grad_clip ? cfg.grad_clip / std::sqrt(norm2) : 1.0;
    double lr = cfg.lr;
    if (step < warmup) {
      lr *= static_cast<double>(step + 1) / static_cast<double>(warmup);
    } else {
      const double p = static_cast<double>(step - warmup) / static_cast<double>(std::max<std::size_t>(1, cfg.steps - warmup));
      lr *= 0.5 * (1 + std::cos(std::numbers::pi * p));
    }
    const double bc1 = 1 - std::pow(b1, static_cast<double>(step + 1));
    const double bc2 = 1 - std::pow(b2, static_cast<double>(step + 1));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g.data[i] * clip;
      m[i] = static_cast<float>(b1 * m[i] + (1 - b1) * gi);
      v[i] = static_cast<float>(b2 * v[i] + (1 - b2) * gi * gi);
      theta[i] = static_cast<float>(theta[i] - lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps));
    }
    lm = TinyLm::from_parameters(init.config(), theta);
    if (log) {
      char line[64];
      std::snprintf(line, sizeof line, "%zu,%.6f\n", step + 1, loss);
      *log << line << std::flush;
    }
  }
  return lm;
}

}  // namespace hgtok
