#pragma once

// Run configuration read from a key=value text file. Blank lines and lines
// starting with '#' are ignored; unknown keys are usage errors.

#include <cstdint>
#include <string>

#include "hgtok/hidto.hpp"
#include "hgtok/hip.hpp"
#include "hgtok/tiny_lm.hpp"
#include "hgtok/trainer.hpp"

namespace hgtok {

struct RunConfig {
  std::uint64_t seed = 0;
  TemplateSpec tmpl;
  std::size_t d_text = 64;
  std::size_t d_core = 384;
  std::size_t d_sidecar = 64;
  TinyLmConfig lm;  // lm.d_model is d_llm
  std::size_t context_limit = 1024;
  TrainConfig train;
  // Generic next-byte pretraining of the LM before it is frozen; 0 keeps the
  // random initialization.
  std::size_t lm_pretrain_steps = 200;

  HipConfig hip(std::size_t d_struct) const;
  void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
// Inverse of parse_run_config for every key it understands.
std::string to_config_text(const RunConfig& c);

}  // namespace hgtok
