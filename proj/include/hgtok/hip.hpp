#pragma once

// Incidence projector: role-conditioned stems, one bidirectional
// vertex<->hyperedge set-attention block, and an output MLP into the LM
// embedding space. Also hosts the two auxiliary heads and the analytic backward.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hgtok/hidto.hpp"
#include "hgtok/tensor.hpp"

namespace hgtok {

struct HipConfig {
  std::size_t d_text = 0;
  std::size_t d_struct = 0;
  std::size_t d_core = 384;
  std::size_t d_sidecar = 64;
  std::size_t d_llm = 128;
  std::size_t num_order_buckets = 4;

  std::size_t d_hidden() const { return d_core + d_sidecar; }
  std::size_t d_att() const { return d_hidden(); }
  void validate() const;
  bool operator==(const HipConfig&) const = default;
};

// Parameters in declaration order; this order drives initialization and the
// checkpoint layout.
enum class HipParam : std::uint8_t {
  kLnAGain, kLnABias, kWSem,
  kLnSGain, kLnSBias, kWStrVertex, kWStrHyperedge, kWStrOverview, kWStrPad,
  kLnH0Gain, kLnH0Bias,
  kWq, kWk, kWEdgeFromVertex, kWVertexFromEdge,
  kPhiEW1, kPhiEB1, kPhiEW2, kPhiEB2, kLnEGain, kLnEBias,
  kPhiVW1, kPhiVB1, kPhiVW2, kPhiVB2, kLnVGain, kLnVBias,
  kOutW1, kOutB1, kOutW2, kOutB2,
  kOrdW, kOrdB, kRelW, kRelB,
};
inline constexpr std::size_t kNumHipParams = 35;

enum class ParamKind : std::uint8_t { kWeight, kBias, kGain };

struct ParamSlice {
  const char* name;
  ParamKind kind;
  std::size_t rows;
  std::size_t cols;  // 1 for vectors
  std::size_t offset;
  std::size_t size() const { return rows * cols; }
};

std::array<ParamSlice, kNumHipParams> hip_layout(const HipConfig& c);
std::size_t hip_param_count(const HipConfig& c);

template <class T>
struct HipParams {
  HipConfig config;
  std::array<ParamSlice, kNumHipParams> layout{};
  std::vector<T> data;
  // Bumped by every optimizer update; caches remember the value they saw.
  std::uint64_t generation = 0;

  static HipParams zeros(const HipConfig& c);
  // Gaussian weights with std 1/sqrt(fan_in); LN gains 1; biases 0.
  static HipParams init(const HipConfig& c, std::uint64_t seed);

  const ParamSlice& slice(HipParam p) const { return layout[static_cast<std::size_t>(p)]; }
  MatrixView<T> mat(HipParam p) {
    const auto& s = slice(p);
    return {data.data() + s.offset, s.rows, s.cols};
  }
  ConstMatrixView<T> mat(HipParam p) const {
    const auto& s = slice(p);
    return {data.data() + s.offset, s.rows, s.cols};
  }
  std::span<T> vec(HipParam p) {
    const auto& s = slice(p);
    return {data.data() + s.offset, s.size()};
  }
  std::span<const T> vec(HipParam p) const {
    const auto& s = slice(p);
    return {data.data() + s.offset, s.size()};
  }

  template <class U>
  HipParams<U> cast() const {
    HipParams<U> out;
    out.config = config;
    out.layout = layout;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

// HIPCK1: magic, six little-endian u32 dims, then float32 parameters.
void save_checkpoint(const HipParams<float>& p, const std::string& path);
HipParams<float> load_checkpoint(const std::string& path);
// Shape check only; throws a data error naming the first disagreeing dim.
void check_checkpoint_config(const HipConfig& expected, const HipConfig& found);

// Per-row layer-norm scratch.
template <class T>
struct LnCache {
  Matrix<T> xhat;
  std::vector<T> rstd;
};

// Two-layer GELU map applied to a row subset.
template <class T>
struct MlpCache {
  std::vector<std::uint32_t> rows;  // slot indices the map was applied to
  Matrix<T> in;                      // [h0 || m] or h1
  Matrix<T> pre;                     // first-layer pre-activation
  Matrix<T> act;                     // gelu(pre)
};

template <class T>
struct HipCache {
  std::uint64_t generation = 0;
  std::size_t rows = 0;
  IncidencePattern pattern;

  Matrix<T> a_norm, s_norm;  // post-LN stem inputs
  LnCache<T> ln_a, ln_s, ln_h0, ln_e, ln_v;
  Matrix<T> h0;
  Matrix<T> q, k, msg_ev;            // W_q h0, W_k h0, W_{e<-v} h0
  std::vector<std::vector<T>> alpha;  // per slot, over M(e)
  Matrix<T> m_e;
  MlpCache<T> phi_e;
  Matrix<T> h_tilde;
  Matrix<T> k_tilde, msg_ve;         // W_k h~, W_{v<-e} h~
  std::vector<std::vector<T>> beta;   // per slot, over N(v)
  Matrix<T> m_v;
  MlpCache<T> phi_v;
  Matrix<T> h1;
  MlpCache<T> out_mlp;
  Matrix<T> tokens;                   // T(c), rows x d_llm
};

// features: rows = slots, cols = d_text + d_struct.
template <class T>
HipCache<T> hip_forward(const HipParams<T>& p, ConstMatrixView<T> features, const IncidencePattern& pattern);

// Order logits for every row (rows x buckets); eligible[i] is targets[i] >= 0.
template <class T>
struct OrdLogits {
  Matrix<T> logits;
  std::vector<bool> eligible;
};
template <class T>
OrdLogits<T> aux_ord_logits(const HipCache<T>& cache, const HipParams<T>& p, std::span<const int> targets);

using SlotPair = std::pair<std::size_t, std::size_t>;
// 3-class logits for [h1_i || h1_j]; pairs must lie in [0, detail_size).
template <class T>
Matrix<T> aux_rel_logits(const HipCache<T>& cache, const HipParams<T>& p, std::span<const SlotPair> pairs,
                         std::size_t detail_size);

template <class T>
struct HipUpstream {
  ConstMatrixView<T> d_tokens;       // rows x d_llm (may be empty)
  ConstMatrixView<T> d_ord;          // rows x buckets (may be empty)
  std::span<const SlotPair> pairs;   // pairs behind d_rel
  ConstMatrixView<T> d_rel;          // pairs x 3 (may be empty)
};

// Accumulates parameter gradients into grads (same layout as p).
template <class T>
void hip_backward(const HipCache<T>& cache, const HipParams<T>& p, const HipUpstream<T>& up, HipParams<T>& grads);

}  // namespace hgtok
