#include "hgtok/tiny_lm.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstring>

#include "hgtok/error.hpp"
#include "hgtok/kernels.hpp"
#include "hgtok/rng.hpp"

namespace hgtok {

void TinyLmConfig::validate() const {
  if (vocab < vocab::kSize) fail_usage("LM vocabulary must cover bytes and special tokens");
  if (d_model == 0 || layers == 0 || heads == 0 || max_len == 0 || mlp_ratio == 0)
    fail_usage("LM dimensions must be positive");
  if (d_model % heads != 0) fail_usage("d_model must be divisible by the head count");
}

void TinyLm::build_layout() {
  const std::size_t d = cfg_.d_model, f = cfg_.mlp_ratio * d;
  layout_.clear();
  std::size_t off = 0;
  auto add = [&](std::size_t r, std::size_t c) {
    layout_.push_back({r, c, off});
    off += r * c;
  };
  add(cfg_.vocab, d);    // token embedding
  add(cfg_.max_len, d);  // positional embedding
  add(d, 1);             // final LN
  add(d, 1);
  add(cfg_.vocab, d);    // head
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    add(d, 1);
    add(d, 1);
    add(3 * d, d);
    add(3 * d, 1);
    add(d, d);
    add(d, 1);
    add(d, 1);
    add(d, 1);
    add(f, d);
    add(f, 1);
    add(d, f);
    add(d, 1);
  }
}

TinyLm TinyLm::init(const TinyLmConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TinyLm lm;
  lm.cfg_ = cfg;
  lm.build_layout();
  const auto& last = lm.layout_.back();
  lm.theta_.assign(last.offset + last.rows * last.cols, 0.0f);
  auto fill = [&](const Slice& s, std::size_t index, double sd) {
    Rng rng(derive_key(seed, {stream_tag::kLm, index}));
    for (std::size_t i = 0; i < s.rows * s.cols; ++i) lm.theta_[s.offset + i] = static_cast<float>(sd * rng.normal());
  };
  auto ones = [&](const Slice& s) { std::fill_n(lm.theta_.begin() + s.offset, s.rows, 1.0f); };
  const double resid = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.layers));
  fill(lm.layout_[kTokEmb], kTokEmb, 1.0);
  fill(lm.layout_[kPosEmb], kPosEmb, 1.0);
  ones(lm.layout_[kLnFGain]);
  fill(lm.layout_[kHead], kHead, 1.0 / std::sqrt(static_cast<double>(cfg.d_model)));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::size_t base = kGlobalSlots + l * kLayerSlots;
    ones(lm.layout_[base + kLn1Gain]);
    ones(lm.layout_[base + kLn2Gain]);
    for (std::size_t s : {kWqkv, kWo, kWfc, kWproj}) {
      const Slice& sl = lm.layout_[base + s];
      double sd = 1.0 / std::sqrt(static_cast<double>(sl.cols));
      if (s == kWo || s == kWproj) sd *= resid;
      fill(sl, base + s, sd);
    }
  }
  lm.theta_d_.assign(lm.theta_.begin(), lm.theta_.end());
  return lm;
}

TinyLm TinyLm::from_parameters(const TinyLmConfig& cfg, std::vector<float> theta) {
  cfg.validate();
  TinyLm lm;
  lm.cfg_ = cfg;
  lm.build_layout();
  const auto& last = lm.layout_.back();
  if (theta.size() != last.offset + last.rows * last.cols) fail_data("LM parameter count does not match its config");
  lm.theta_ = std::move(theta);
  lm.theta_d_.assign(lm.theta_.begin(), lm.theta_.end());
  return lm;
}

std::string TinyLm::parameter_bytes() const {
  std::string out(theta_.size() * sizeof(float), '\0');
  std::memcpy(out.data(), theta_.data(), out.size());
  return out;
}

template <>
const float* TinyLm::weights<float>() const {
  return theta_.data();
}
template <>
const double* TinyLm::weights<double>() const {
  return theta_d_.data();
}

namespace {

template <class T>
ConstMatrixView<T> mat(const T* base, const TinyLm::Slice& s) {
  return {base + s.offset, s.rows, s.cols};
}
template <class T>
std::span<const T> vec(const T* base, const TinyLm::Slice& s) {
  return {base + s.offset, s.rows * s.cols};
}
template <class T>
MatrixView<T> gmat(LmGrads<T>* g, const TinyLm::Slice& s) {
  if (!g) return {};
  return {g->data.data() + s.offset, s.rows, s.cols};
}
template <class T>
std::span<T> gvec(LmGrads<T>* g, const TinyLm::Slice& s) {
  if (!g) return {};
  return {g->data.data() + s.offset, s.rows * s.cols};
}

template <class T>
void layer_norm_into(ConstMatrixView<T> x, std::span<const T> gain, std::span<const T> bias, Matrix<T>& y,
                     Matrix<T>& xhat, std::vector<T>& rstd) {
  y.resize(x.rows, x.cols);
  xhat.resize(x.rows, x.cols);
  rstd.assign(x.rows, T(0));
  kernels::layer_norm<T>(x, gain, bias, y.view(), xhat.view(), rstd);
}

}  // namespace

template <class T>
LmCache<T> TinyLm::forward(const LmInput<T>& in) const {
  const std::size_t n = in.ids.size(), d = cfg_.d_model;
  if (n == 0) fail_data("empty LM input");
  if (n > cfg_.max_len)
    fail_data("sequence of " + std::to_string(n) + " tokens exceeds the context limit " + std::to_string(cfg_.max_len));
  const std::size_t rb = in.region_begin, re = in.region.empty() ? rb : rb + in.region.rows;
  if (re > n) fail_data("hypergraph region extends past the sequence");
  if (!in.region.empty() && in.region.cols != d) fail_numeric("region width does not match d_model");
  const T* w = weights<T>();

  LmCache<T> c;
  Matrix<T> x(n, d);
  const auto tok = mat(w, layout_[kTokEmb]);
  const auto pos = mat(w, layout_[kPosEmb]);
  for (std::size_t t = 0; t < n; ++t) {
    const T* src;
    if (t >= rb && t < re) {
      src = in.region.data + (t - rb) * d;
    } else {
      const int id = in.ids[t];
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab) fail_data("token id out of vocabulary");
      src = tok.data + static_cast<std::size_t>(id) * d;
    }
    for (std::size_t k = 0; k < d; ++k) x(t, k) = src[k] + pos(t, k);
  }

  c.layers.resize(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    auto& L = c.layers[l];
    auto S = [&](std::size_t s) -> const Slice& { return layer_slice(l, s); };
    L.x_in = x;
    layer_norm_into<T>(x.cview(), vec(w, S(kLn1Gain)), vec(w, S(kLn1Bias)), L.ln1, L.ln1_hat, L.ln1_rstd);
    L.qkv.resize(n, 3 * d);
    kernels::linear<T>(L.ln1.cview(), mat(w, S(kWqkv)), vec(w, S(kBqkv)), L.qkv.view());
    L.attn.resize(n, d);
    L.probs.resize(cfg_.heads * n, n);
    kernels::causal_attention<T>(L.qkv.cview(), cfg_.heads, L.attn.view(), L.probs.view());
    Matrix<T> o(n, d);
    kernels::linear<T>(L.attn.cview(), mat(w, S(kWo)), vec(w, S(kBo)), o.view());
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += o.data()[i];
    L.x_mid = x;
    layer_norm_into<T>(x.cview(), vec(w, S(kLn2Gain)), vec(w, S(kLn2Bias)), L.ln2, L.ln2_hat, L.ln2_rstd);
    L.fc_pre.resize(n, cfg_.mlp_ratio * d);
    kernels::linear<T>(L.ln2.cview(), mat(w, S(kWfc)), vec(w, S(kBfc)), L.fc_pre.view());
    L.fc_act.resize(n, L.fc_pre.cols());
    for (std::size_t i = 0; i < L.fc_pre.size(); ++i) L.fc_act.data()[i] = kernels::gelu(L.fc_pre.data()[i]);
    kernels::linear<T>(L.fc_act.cview(), mat(w, S(kWproj)), vec(w, S(kBproj)), o.view());
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += o.data()[i];
  }
  c.x_out = x;
  layer_norm_into<T>(x.cview(), vec(w, layout_[kLnFGain]), vec(w, layout_[kLnFBias]), c.ln_f, c.ln_f_hat,
                     c.ln_f_rstd);
  return c;
}

template <class T>
Matrix<T> TinyLm::logits(const LmCache<T>& cache, std::span<const std::size_t> positions) const {
  const std::size_t d = cfg_.d_model;
  Matrix<T> h(positions.size(), d);
  for (std::size_t i = 0; i < positions.size(); ++i) std::copy_n(cache.ln_f.row(positions[i]).data(), d, h.row(i).data());
  Matrix<T> out(positions.size(), cfg_.vocab);
  kernels::linear<T>(h.cview(), mat(weights<T>(), layout_[kHead]), {}, out.view());
  return out;
}

namespace {
std::vector<std::size_t> supervised_positions(std::span<const int> targets, std::span<const std::uint8_t> mask,
                                              std::size_t n) {
  if (targets.size() != n || mask.size() != n) fail_data("targets and mask must match the input length");
  std::vector<std::size_t> pos;
  for (std::size_t t = 0; t < n; ++t) {
    if (!mask[t]) continue;
    if (t == 0) fail_data("the first position cannot be supervised");
    pos.push_back(t - 1);
  }
  if (pos.empty()) fail_data("empty answer: no supervised positions");
  return pos;
}
}  // namespace

template <class T>
LmLossResult TinyLm::loss(const LmInput<T>& in, std::span<const int> targets, std::span<const std::uint8_t> mask) const {
  const auto pos = supervised_positions(targets, mask, in.ids.size());
  const LmCache<T> c = forward(in);
  const Matrix<T> lg = logits(c, pos);
  double total = 0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    auto row = lg.row(i);
    const T mx = *std::max_element(row.begin(), row.end());
    double z = 0;
    for (T v : row) z += std::exp(static_cast<double>(v - mx));
    const int y = targets[pos[i] + 1];
    total += std::log(z) - static_cast<double>(row[static_cast<std::size_t>(y)] - mx);
  }
  return {total / static_cast<double>(pos.size()), pos.size()};
}

template <class T>
LmLossResult TinyLm::loss_and_backward(const LmInput<T>& in, std::span<const int> targets, std::span<const std::uint8_t> mask,
                                       Matrix<T>* d_region, LmGrads<T>* g) const {
  const std::size_t n = in.ids.size(), d = cfg_.d_model;
  const auto pos = supervised_positions(targets, mask, n);
  const LmCache<T> c = forward(in);
  const Matrix<T> lg = logits(c, pos);
  const T* w = weights<T>();
  if (g && g->data.size() != theta_.size()) g->data.assign(theta_.size(), T(0));

  // Softmax cross-entropy.
  double total = 0;
  Matrix<T> dlogits(pos.size(), cfg_.vocab);
  const T inv = T(1) / T(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    auto row = lg.row(i);
    const T mx = *std::max_element(row.begin(), row.end());
    T z = 0;
    for (T v : row) z += std::exp(v - mx);
    const std::size_t y = static_cast<std::size_t>(targets[pos[i] + 1]);
    if (y >= cfg_.vocab) fail_data("target id out of vocabulary");
    total += static_cast<double>(std::log(z) - (row[y] - mx));
    for (std::size_t k = 0; k < cfg_.vocab; ++k) dlogits(i, k) = std::exp(row[k] - mx) / z * inv;
    dlogits(i, y) -= inv;
  }
  const LmLossResult result{total / static_cast<double>(pos.size()), pos.size()};
  if (!std::isfinite(result.loss)) fail_numeric("non-finite LM loss");

  // Head and final LN.
  Matrix<T> hsel(pos.size(), d), dhsel(pos.size(), d);
  for (std::size_t i = 0; i < pos.size(); ++i) std::copy_n(c.ln_f.row(pos[i]).data(), d, hsel.row(i).data());
  kernels::linear_backward<T>(hsel.cview(), mat(w, layout_[kHead]), dlogits.cview(), dhsel.view(),
                              gmat(g, layout_[kHead]), {});
  // Nothing after the last supervised position influences the loss.
  const std::size_t n_used = pos.back() + 1;
  auto trim = [&](const Matrix<T>& m) -> ConstMatrixView<T> { return {m.data(), n_used, m.cols()}; };
  Matrix<T> dln(n_used, d);
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) dln(pos[i], k) += dhsel(i, k);
  std::vector<T> scratch_g(d), scratch_b(d);
  auto gspan = [&](const Slice& s, std::vector<T>& scratch) -> std::span<T> {
    return g ? gvec(g, s) : std::span<T>(scratch);
  };
  Matrix<T> dx(n_used, d);
  kernels::layer_norm_backward<T>(dln.cview(), trim(c.ln_f_hat), std::span<const T>(c.ln_f_rstd).first(n_used),
                                  vec(w, layout_[kLnFGain]), dx.view(), gspan(layout_[kLnFGain], scratch_g),
                                  gspan(layout_[kLnFBias], scratch_b));

  const std::size_t dff = cfg_.mlp_ratio * d;
  for (std::size_t li = cfg_.layers; li-- > 0;) {
    const auto& L = c.layers[li];
    auto S = [&](std::size_t s) -> const Slice& { return layer_slice(li, s); };
    // MLP branch.
    Matrix<T> dact(n_used, dff);
    kernels::linear_backward<T>(trim(L.fc_act), mat(w, S(kWproj)), dx.cview(), dact.view(), gmat(g, S(kWproj)),
                                gvec(g, S(kBproj)));
    for (std::size_t i = 0; i < dact.size(); ++i) dact.data()[i] *= kernels::gelu_grad(L.fc_pre.data()[i]);
    Matrix<T> dln2(n_used, d);
    kernels::linear_backward<T>(trim(L.ln2), mat(w, S(kWfc)), dact.cview(), dln2.view(), gmat(g, S(kWfc)),
                                gvec(g, S(kBfc)));
    kernels::layer_norm_backward<T>(dln2.cview(), trim(L.ln2_hat), std::span<const T>(L.ln2_rstd).first(n_used),
                                    vec(w, S(kLn2Gain)), dx.view(), gspan(S(kLn2Gain), scratch_g),
                                    gspan(S(kLn2Bias), scratch_b));
    // Attention branch. Causality lets the trimmed prefix stand alone.
    Matrix<T> dattn(n_used, d);
    kernels::linear_backward<T>(trim(L.attn), mat(w, S(kWo)), dx.cview(), dattn.view(), gmat(g, S(kWo)),
                                gvec(g, S(kBo)));
    Matrix<T> qkv_used(n_used, 3 * d), probs_used(cfg_.heads * n_used, n_used);
    std::copy_n(L.qkv.data(), n_used * 3 * d, qkv_used.data());
    for (std::size_t h = 0; h < cfg_.heads; ++h)
      for (std::size_t t = 0; t < n_used; ++t)
        std::copy_n(L.probs.row(h * n + t).data(), n_used, probs_used.row(h * n_used + t).data());
    Matrix<T> dqkv(n_used, 3 * d);
    kernels::causal_attention_backward<T>(qkv_used.cview(), cfg_.heads, probs_used.cview(), dattn.cview(),
                                          dqkv.view());
    Matrix<T> dln1(n_used, d);
    kernels::linear_backward<T>(trim(L.ln1), mat(w, S(kWqkv)), dqkv.cview(), dln1.view(), gmat(g, S(kWqkv)),
                                gvec(g, S(kBqkv)));
    kernels::layer_norm_backward<T>(dln1.cview(), trim(L.ln1_hat), std::span<const T>(L.ln1_rstd).first(n_used),
                                    vec(w, S(kLn1Gain)), dx.view(), gspan(S(kLn1Gain), scratch_g),
                                    gspan(S(kLn1Bias), scratch_b));
  }

  const std::size_t rb = in.region_begin, re = in.region.empty() ? rb : rb + in.region.rows;
  if (d_region) {
    d_region->resize(re - rb, d);
    for (std::size_t t = rb; t < std::min(re, n_used); ++t) std::copy_n(dx.row(t).data(), d, d_region->row(t - rb).data());
  }
  if (g) {
    for (std::size_t t = 0; t < n_used; ++t) {
      T* dpos = g->data.data() + layout_[kPosEmb].offset + t * d;
      for (std::size_t k = 0; k < d; ++k) dpos[k] += dx(t, k);
      if (t >= rb && t < re) continue;
      T* dtok = g->data.data() + layout_[kTokEmb].offset + static_cast<std::size_t>(in.ids[t]) * d;
      for (std::size_t k = 0; k < d; ++k) dtok[k] += dx(t, k);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Incremental greedy decoding
// ---------------------------------------------------------------------------

std::vector<int> TinyLm::generate(const LmInput<float>& prompt, std::size_t max_new) const {
  const std::size_t d = cfg_.d_model, heads = cfg_.heads, hd = d / heads, dff = cfg_.mlp_ratio * d;
  const float* w = theta_.data();
  LmCache<float> c = forward(prompt);
  std::size_t n = prompt.ids.size();

  // Key/value cache seeded from the prompt pass.
  std::vector<Matrix<float>> keys(cfg_.layers), values(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    keys[l].resize(cfg_.max_len, d);
    values[l].resize(cfg_.max_len, d);
    for (std::size_t t = 0; t < n; ++t) {
      std::copy_n(c.layers[l].qkv.row(t).data() + d, d, keys[l].row(t).data());
      std::copy_n(c.layers[l].qkv.row(t).data() + 2 * d, d, values[l].row(t).data());
    }
  }
  auto argmax = [](std::span<const float> row) {
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  };
  const std::size_t last = n - 1;
  int next = argmax(logits(c, std::span<const std::size_t>(&last, 1)).row(0));

  std::vector<int> out;
  Matrix<float> x(1, d), y(1, d), xhat(1, d), qkv(1, 3 * d), att(1, d), o(1, d), fc(1, dff);
  std::vector<float> rstd(1), scores;
  const auto head = mat(w, layout_[kHead]);
  while (out.size() < max_new) {
    out.push_back(next);
    if (next == vocab::kEos || n >= cfg_.max_len) break;
    const auto tok = mat(w, layout_[kTokEmb]);
    const auto pos = mat(w, layout_[kPosEmb]);
    for (std::size_t k = 0; k < d; ++k) x(0, k) = tok(static_cast<std::size_t>(next), k) + pos(n, k);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      auto S = [&](std::size_t s) -> const Slice& { return layer_slice(l, s); };
      kernels::reference::layer_norm<float>(x.cview(), vec(w, S(kLn1Gain)), vec(w, S(kLn1Bias)), y.view(),
                                            xhat.view(), rstd);
      kernels::reference::linear<float>(y.cview(), mat(w, S(kWqkv)), vec(w, S(kBqkv)), qkv.view());
      std::copy_n(qkv.data() + d, d, keys[l].row(n).data());
      std::copy_n(qkv.data() + 2 * d, d, values[l].row(n).data());
      const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
      scores.resize(n + 1);
      for (std::size_t h = 0; h < heads; ++h) {
        float mx = -INFINITY;
        for (std::size_t s = 0; s <= n; ++s) {
          float acc = 0;
          for (std::size_t j = 0; j < hd; ++j) acc += qkv(0, h * hd + j) * keys[l](s, h * hd + j);
          scores[s] = acc * scale;
          mx = std::max(mx, scores[s]);
        }
        float z = 0;
        for (std::size_t s = 0; s <= n; ++s) {
          scores[s] = std::exp(scores[s] - mx);
          z += scores[s];
        }
        for (std::size_t j = 0; j < hd; ++j) {
          float acc = 0;
          for (std::size_t s = 0; s <= n; ++s) acc += scores[s] / z * values[l](s, h * hd + j);
          att(0, h * hd + j) = acc;
        }
      }
      kernels::reference::linear<float>(att.cview(), mat(w, S(kWo)), vec(w, S(kBo)), o.view());
      for (std::size_t k = 0; k < d; ++k) x(0, k) += o(0, k);
      kernels::reference::layer_norm<float>(x.cview(), vec(w, S(kLn2Gain)), vec(w, S(kLn2Bias)), y.view(),
                                            xhat.view(), rstd);
      kernels::reference::linear<float>(y.cview(), mat(w, S(kWfc)), vec(w, S(kBfc)), fc.view());
      for (float& v : fc.storage()) v = kernels::gelu(v);
      kernels::reference::linear<float>(fc.cview(), mat(w, S(kWproj)), vec(w, S(kBproj)), o.view());
      for (std::size_t k = 0; k < d; ++k) x(0, k) += o(0, k);
    }
    kernels::reference::layer_norm<float>(x.cview(), vec(w, layout_[kLnFGain]), vec(w, layout_[kLnFBias]), y.view(),
                                          xhat.view(), rstd);
    Matrix<float> lg(1, cfg_.vocab);
    kernels::reference::linear<float>(y.cview(), head, {}, lg.view());
    next = argmax(lg.row(0));
    ++n;
  }
  return out;
}

std::string parameter_hash(const TinyLm& lm) {
  const std::string bytes = lm.parameter_bytes();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail_numeric("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 15]);
  }
  return hex;
}

#define HGTOK_INSTANTIATE_LM(T)                                                                                  \
  template LmCache<T> TinyLm::forward<T>(const LmInput<T>&) const;                                               \
  template Matrix<T> TinyLm::logits<T>(const LmCache<T>&, std::span<const std::size_t>) const;                   \
  template LmLossResult TinyLm::loss<T>(const LmInput<T>&, std::span<const int>, std::span<const std::uint8_t>) const;   \
  template LmLossResult TinyLm::loss_and_backward<T>(const LmInput<T>&, std::span<const int>, std::span<const std::uint8_t>, \
                                                     Matrix<T>*, LmGrads<T>*) const;

HGTOK_INSTANTIATE_LM(float)
HGTOK_INSTANTIATE_LM(double)

}  // namespace hgtok
