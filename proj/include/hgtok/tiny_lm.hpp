#pragma once

// Small pre-norm decoder-only transformer over a byte vocabulary. Its weights
// are fixed at construction; callers only ever read them. Inputs mix token ids
// with directly supplied embedding rows for one contiguous region.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hgtok/tensor.hpp"

namespace hgtok {

namespace vocab {
inline constexpr int kBos = 256;
inline constexpr int kEos = 257;
inline constexpr int kHypergraph = 258;  // placeholder for the spliced region
inline constexpr int kPad = 259;
inline constexpr int kSize = 260;
}  // namespace vocab

struct TinyLmConfig {
  std::size_t vocab = vocab::kSize;
  std::size_t d_model = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t max_len = 1024;
  std::size_t mlp_ratio = 4;
  void validate() const;
  bool operator==(const TinyLmConfig&) const = default;
};

// A token sequence where positions [region_begin, region_begin + region.rows)
// take their input embedding from `region` instead of the token table.
template <class T>
struct LmInput {
  std::span<const int> ids;  // full length; ids inside the region are ignored
  std::size_t region_begin = 0;
  ConstMatrixView<T> region;  // may be empty
};

template <class T>
struct LmLayerCache {
  Matrix<T> x_in;  // residual stream entering the layer
  Matrix<T> ln1, ln1_hat;
  std::vector<T> ln1_rstd;
  Matrix<T> qkv, attn, probs;
  Matrix<T> x_mid;
  Matrix<T> ln2, ln2_hat;
  std::vector<T> ln2_rstd;
  Matrix<T> fc_pre, fc_act;
};

template <class T>
struct LmCache {
  std::vector<LmLayerCache<T>> layers;
  Matrix<T> x_out, ln_f, ln_f_hat;
  std::vector<T> ln_f_rstd;
};

// Parameter gradients in the model's flat layout.
template <class T>
struct LmGrads {
  std::vector<T> data;
};

struct LmLossResult {
  double loss = 0;         // mean NLL over supervised positions
  std::size_t count = 0;   // supervised positions
};

class TinyLm {
 public:
  // Deterministic random initialization from seed: embeddings N(0, 1), weights
  // N(0, 1/fan_in), residual output projections further scaled by 1/sqrt(2 * layers).
  static TinyLm init(const TinyLmConfig& cfg, std::uint64_t seed);
  static TinyLm from_parameters(const TinyLmConfig& cfg, std::vector<float> theta);

  const TinyLmConfig& config() const { return cfg_; }
  std::span<const float> parameters() const { return theta_; }
  // Raw little-endian float32 bytes of all parameters.
  std::string parameter_bytes() const;
  std::size_t parameter_count() const { return theta_.size(); }

  // Forward over the full sequence; returns the cache needed by loss/backward.
  template <class T>
  LmCache<T> forward(const LmInput<T>& in) const;

  // logits (rows = positions.size()) for the given positions of a cached forward.
  template <class T>
  Matrix<T> logits(const LmCache<T>& cache, std::span<const std::size_t> positions) const;

  // Mean NLL of targets[t] at every t with mask[t] (predicted from position t-1),
  // plus the gradient with respect to the region rows. Parameter gradients are
  // accumulated into param_grads when it is non-null. The model itself is const.
  template <class T>
  LmLossResult loss_and_backward(const LmInput<T>& in, std::span<const int> targets, std::span<const std::uint8_t> mask,
                                 Matrix<T>* d_region, LmGrads<T>* param_grads) const;

  // Loss only.
  template <class T>
  LmLossResult loss(const LmInput<T>& in, std::span<const int> targets, std::span<const std::uint8_t> mask) const;

  // Greedy decoding with a key/value cache, stopping at EOS or after max_new tokens.
  std::vector<int> generate(const LmInput<float>& prompt, std::size_t max_new) const;

  enum Slot : std::size_t {
    kTokEmb, kPosEmb, kLnFGain, kLnFBias, kHead,
    // per layer, offset by kGlobalSlots + layer * kLayerSlots
    kLn1Gain = 0, kLn1Bias, kWqkv, kBqkv, kWo, kBo, kLn2Gain, kLn2Bias, kWfc, kBfc, kWproj, kBproj,
  };
  static constexpr std::size_t kGlobalSlots = 5;
  static constexpr std::size_t kLayerSlots = 12;

  struct Slice {
    std::size_t rows, cols, offset;
  };
  const Slice& slice(std::size_t global) const { return layout_[global]; }
  const Slice& layer_slice(std::size_t layer, std::size_t s) const {
    return layout_[kGlobalSlots + layer * kLayerSlots + s];
  }

 private:
  TinyLmConfig cfg_;
  std::vector<Slice> layout_;
  std::vector<float> theta_;
  std::vector<double> theta_d_;  // double copy for the double-precision path

  void build_layout();
  template <class T>
  const T* weights() const;
};

// SHA-256 of TinyLm::parameter_bytes(), lower-case hex.
std::string parameter_hash(const TinyLm& lm);

}  // namespace hgtok
