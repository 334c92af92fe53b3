#pragma once

// Generic next-byte pretraining for the tiny LM before it is frozen. The corpus
// is synthetic question/answer text with no hypergraph content: word-list
// membership and comparison questions answered Yes/No, and tagged notes whose
// tag must be picked from a candidate list.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "hgtok/tiny_lm.hpp"

namespace hgtok {

struct LmPretrainConfig {
  std::size_t steps = 0;
  std::size_t batch = 16;
  double lr = 3e-3;
  double warmup_ratio = 0.05;
  double grad_clip = 1.0;
  void validate() const;
};

struct PretrainDocument {
  std::string prompt;  // ends with "Answer: "
  std::string answer;
};

PretrainDocument pretrain_document(std::uint64_t key);

// BOS + prompt + answer + EOS.
std::vector<int> encode_document(const PretrainDocument& d);

// Adam on every LM parameter with full-sequence next-byte loss. Deterministic
// in (init, cfg, seed). Writes "step,loss" rows to log when given.
TinyLm pretrain_lm(const TinyLm& init, const LmPretrainConfig& cfg, std::uint64_t seed, std::ostream* log = nullptr);

}  // namespace hgtok
