#pragma once

// Turns (hypergraph, center, task) into training/evaluation Examples:
// serialization, overview propagation, encapsulation, prompts and dialogues.

#include <ostream>
#include <string>
#include <vector>

#include "hgtok/config.hpp"
#include "hgtok/diagnostic.hpp"
#include "hgtok/hidto.hpp"
#include "hgtok/protocol.hpp"
#include "hgtok/semantic.hpp"
#include "hgtok/trainer.hpp"

namespace hgtok {

// "class 0", "class 1", ...
std::vector<std::string> class_label_names(std::size_t num_classes);

class ExampleBuilder {
 public:
  ExampleBuilder(const RunConfig& cfg, SemanticProvider psi);

  const Template& tmpl() const { return tmpl_; }
  const SemanticProvider& psi() const { return psi_; }
  HipConfig hip_config() const;
  std::uint64_t seed() const { return cfg_.seed; }

  // Aggregation states for the whole hypergraph; reuse across centers of the
  // same graph. Only needed when the template has an overview segment.
  PropagationStates propagation(const Hypergraph& h) const;

  // sample_seed keys the incidence-tree sampling and relation-pair draws.
  // states may be null, in which case they are computed on the fly.
  Example build(const Hypergraph& h, const Center& c, Task task, const std::vector<std::string>& labels,
                std::size_t gold, std::uint64_t sample_seed, const PropagationStates* states = nullptr) const;

  // Serialization + features only (no prompt).
  HidtoSequence sequence(const Hypergraph& h, const Center& c, std::uint64_t sample_seed) const;
  EncapsulatedTokens tokens(const Hypergraph& h, const HidtoSequence& seq, const PropagationStates* states) const;

 private:
  RunConfig cfg_;
  Template tmpl_;
  SemanticProvider psi_;
  Matrix<double> bucket_vectors_;
};

// The frozen LM for a run: seeded initialization, then cfg.lm_pretrain_steps
// of generic next-byte training (see lm_pretrain.hpp).
TinyLm make_frozen_lm(const RunConfig& cfg, std::ostream* log = nullptr);

// Diagnostic template: vertex center, no overview segment.
RunConfig diagnostic_run_config(RunConfig base);

// Two examples per pair (side A then side B). Both sides share the
// sampling seed, so they differ only through their hyperedges.
std::vector<Example> diagnostic_examples(const ExampleBuilder& builder, const std::vector<MatchedPair>& pairs);

}  // namespace hgtok
