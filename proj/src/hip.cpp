#include "hgtok/hip.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hgtok/error.hpp"
#include "hgtok/kernels.hpp"
#include "hgtok/rng.hpp"

namespace hgtok {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void HipConfig::validate() const {
  if (d_text == 0 || d_struct == 0 || d_core == 0 || d_sidecar == 0 || d_llm == 0 || num_order_buckets == 0)
    fail_usage("projector dimensions must be positive");
}

std::array<ParamSlice, kNumHipParams> hip_layout(const HipConfig& c) {
  const std::size_t dh = c.d_hidden(), da = c.d_att();
  using K = ParamKind;
  std::array<ParamSlice, kNumHipParams> s{{
      {"ln_a.gain", K::kGain, c.d_text, 1, 0},
      {"ln_a.bias", K::kBias, c.d_text, 1, 0},
      {"w_sem", K::kWeight, c.d_core, c.d_text, 0},
      {"ln_s.gain", K::kGain, c.d_struct, 1, 0},
      {"ln_s.bias", K::kBias, c.d_struct, 1, 0},
      {"w_str.vertex", K::kWeight, c.d_sidecar, c.d_struct, 0},
      {"w_str.hyperedge", K::kWeight, c.d_sidecar, c.d_struct, 0},
      {"w_str.overview", K::kWeight, c.d_sidecar, c.d_struct, 0},
      {"w_str.pad", K::kWeight, c.d_sidecar, c.d_struct, 0},
      {"ln_h0.gain", K::kGain, dh, 1, 0},
      {"ln_h0.bias", K::kBias, dh, 1, 0},
      {"w_q", K::kWeight, da, dh, 0},
      {"w_k", K::kWeight, da, dh, 0},
      {"w_edge_from_vertex", K::kWeight, dh, dh, 0},
      {"w_vertex_from_edge", K::kWeight, dh, dh, 0},
      {"phi_e.w1", K::kWeight, dh, 2 * dh, 0},
      {"phi_e.b1", K::kBias, dh, 1, 0},
      {"phi_e.w2", K::kWeight, dh, dh, 0},
      {"phi_e.b2", K::kBias, dh, 1, 0},
      {"ln_e.gain", K::kGain, dh, 1, 0},
      {"ln_e.bias", K::kBias, dh, 1, 0},
      {"phi_v.w1", K::kWeight, dh, 2 * dh, 0},
      {"phi_v.b1", K::kBias, dh, 1, 0},
      {"phi_v.w2", K::kWeight, dh, dh, 0},
      {"phi_v.b2", K::kBias, dh, 1, 0},
      {"ln_v.gain", K::kGain, dh, 1, 0},
      {"ln_v.bias", K::kBias, dh, 1, 0},
      {"out.w1", K::kWeight, dh, dh, 0},
      {"out.b1", K::kBias, dh, 1, 0},
      {"out.w2", K::kWeight, c.d_llm, dh, 0},
      {"out.b2", K::kBias, c.d_llm, 1, 0},
      {"ord.w", K::kWeight, c.num_order_buckets, dh, 0},
      {"ord.b", K::kBias, c.num_order_buckets, 1, 0},
      {"rel.w", K::kWeight, kNumRelations, 2 * dh, 0},
      {"rel.b", K::kBias, kNumRelations, 1, 0},
  }};
  std::size_t off = 0;
  for (auto& p : s) {
    p.offset = off;
    off += p.size();
  }
  return s;
}

std::size_t hip_param_count(const HipConfig& c) {
  const auto l = hip_layout(c);
  return l.back().offset + l.back().size();
}

template <class T>
HipParams<T> HipParams<T>::zeros(const HipConfig& c) {
  c.validate();
  HipParams p;
  p.config = c;
  p.layout = hip_layout(c);
  p.data.assign(hip_param_count(c), T(0));
  return p;
}

template <class T>
HipParams<T> HipParams<T>::init(const HipConfig& c, std::uint64_t seed) {
  HipParams p = zeros(c);
  for (std::size_t i = 0; i < kNumHipParams; ++i) {
    const ParamSlice& s = p.layout[i];
    T* dst = p.data.data() + s.offset;
    switch (s.kind) {
      case ParamKind::kGain: std::fill(dst, dst + s.size(), T(1)); break;
      case ParamKind::kBias: break;
      case ParamKind::kWeight: {
        Rng rng(derive_key(seed, {stream_tag::kParams, i}));
        const double sd = 1.0 / std::sqrt(static_cast<double>(s.cols));
        for (std::size_t j = 0; j < s.size(); ++j) dst[j] = static_cast<T>(sd * rng.normal());
        break;
      }
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

namespace {
constexpr char kCkMagic[6] = {'H', 'I', 'P', 'C', 'K', '1'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) fail_data("truncated checkpoint header");
  return v;
}
}  // namespace

void save_checkpoint(const HipParams<float>& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail_data("cannot open " + path + " for writing");
  os.write(kCkMagic, sizeof kCkMagic);
  const HipConfig& c = p.config;
  for (std::size_t d : {c.d_text, c.d_struct, c.d_core, c.d_sidecar, c.d_llm, c.num_order_buckets})
    put_u32(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(p.data.data()), static_cast<std::streamsize>(p.data.size() * sizeof(float)));
  if (!os) fail_data("failed writing " + path);
}

HipParams<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail_data("cannot open " + path);
  char magic[6];
  if (!is.read(magic, 6) || std::memcmp(magic, kCkMagic, 6) != 0) fail_data("not a HIPCK1 checkpoint: " + path);
  HipConfig c;
  c.d_text = get_u32(is);
  c.d_struct = get_u32(is);
  c.d_core = get_u32(is);
  c.d_sidecar = get_u32(is);
  c.d_llm = get_u32(is);
  c.num_order_buckets = get_u32(is);
  if (c.d_text == 0 || c.d_struct == 0 || c.d_core == 0 || c.d_sidecar == 0 || c.d_llm == 0 ||
      c.num_order_buckets == 0)
    fail_data("checkpoint has a zero dimension");
  HipParams<float> p = HipParams<float>::zeros(c);
  if (!is.read(reinterpret_cast<char*>(p.data.data()), static_cast<std::streamsize>(p.data.size() * sizeof(float))))
    fail_data("truncated checkpoint body");
  if (is.peek() != std::char_traits<char>::eof()) fail_data("trailing bytes after checkpoint body");
  return p;
}

void check_checkpoint_config(const HipConfig& expected, const HipConfig& found) {
  auto check = [](const char* name, std::size_t want, std::size_t got) {
    if (want != got)
      fail_data(std::string("checkpoint ") + name + " is " + std::to_string(got) + ", expected " +
                std::to_string(want));
  };
  check("d_text", expected.d_text, found.d_text);
  check("d_struct", expected.d_struct, found.d_struct);
  check("d_core", expected.d_core, found.d_core);
  check("d_sidecar", expected.d_sidecar, found.d_sidecar);
  check("d_llm", expected.d_llm, found.d_llm);
  check("num_order_buckets", expected.num_order_buckets, found.num_order_buckets);
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

namespace {

template <class T>
void ln_forward(ConstMatrixView<T> x, std::span<const T> gain, std::span<const T> bias, LnCache<T>& c,
                Matrix<T>& y) {
  c.xhat.resize(x.rows, x.cols);
  c.rstd.assign(x.rows, T(0));
  y.resize(x.rows, x.cols);
  kernels::layer_norm<T>(x, gain, bias, y.view(), c.xhat.view(), c.rstd);
}

template <class T>
void ln_backward(ConstMatrixView<T> dy, const LnCache<T>& c, std::span<const T> gain, Matrix<T>& dx,
                 std::span<T> dgain, std::span<T> dbias) {
  dx.resize(dy.rows, dy.cols);
  kernels::layer_norm_backward<T>(dy, c.xhat.cview(), c.rstd, gain, dx.view(), dgain, dbias);
}

template <class T>
void mlp_forward(const HipParams<T>& p, HipParam w1, HipParam b1, HipParam w2, HipParam b2, MlpCache<T>& c,
                 Matrix<T>& y) {
  const std::size_t n = c.in.rows();
  c.pre.resize(n, p.slice(w1).rows);
  kernels::linear<T>(c.in.cview(), p.mat(w1), p.vec(b1), c.pre.view());
  c.act.resize(n, c.pre.cols());
  for (std::size_t i = 0; i < c.pre.size(); ++i) c.act.data()[i] = kernels::gelu(c.pre.data()[i]);
  y.resize(n, p.slice(w2).rows);
  kernels::linear<T>(c.act.cview(), p.mat(w2), p.vec(b2), y.view());
}

// Returns d(in) for the cached rows.
template <class T>
Matrix<T> mlp_backward(const HipParams<T>& p, HipParam w1, HipParam b1, HipParam w2, HipParam b2,
                       const MlpCache<T>& c, ConstMatrixView<T> dy, HipParams<T>& g) {
  Matrix<T> dact(c.act.rows(), c.act.cols());
  kernels::linear_backward<T>(c.act.cview(), p.mat(w2), dy, dact.view(), g.mat(w2), g.vec(b2));
  for (std::size_t i = 0; i < dact.size(); ++i) dact.data()[i] *= kernels::gelu_grad(c.pre.data()[i]);
  Matrix<T> din(c.in.rows(), c.in.cols());
  kernels::linear_backward<T>(c.in.cview(), p.mat(w1), dact.cview(), din.view(), g.mat(w1), g.vec(b1));
  return din;
}

HipParam structural_weight(StemRole r) {
  switch (r) {
    case StemRole::kVertex: return HipParam::kWStrVertex;
    case StemRole::kHyperedge: return HipParam::kWStrHyperedge;
    case StemRole::kOverview: return HipParam::kWStrOverview;
    case StemRole::kPad: return HipParam::kWStrPad;
  }
  return HipParam::kWStrPad;
}

std::vector<std::uint32_t> rows_with_role(const IncidencePattern& pat, StemRole r) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < pat.roles.size(); ++i)
    if (pat.roles[i] == r) out.push_back(static_cast<std::uint32_t>(i));
  return out;
}

// Set attention of `query` over rows `keys`; writes weights and the value mix.
template <class T>
void attend(std::span<const T> query, ConstMatrixView<T> keys, ConstMatrixView<T> values,
            const std::vector<std::uint32_t>& set, T scale, std::vector<T>& w, std::span<T> mixed) {
  w.resize(set.size());
  T mx = -INFINITY;
  for (std::size_t j = 0; j < set.size(); ++j) {
    const T* kr = keys.data + set[j] * keys.cols;
    T acc = 0;
    for (std::size_t d = 0; d < query.size(); ++d) acc += query[d] * kr[d];
    w[j] = acc * scale;
    mx = std::max(mx, w[j]);
  }
  T z = 0;
  for (T& x : w) {
    x = std::exp(x - mx);
    z += x;
  }
  for (T& x : w) x /= z;
  std::fill(mixed.begin(), mixed.end(), T(0));
  for (std::size_t j = 0; j < set.size(); ++j) {
    const T* vr = values.data + set[j] * values.cols;
    for (std::size_t d = 0; d < mixed.size(); ++d) mixed[d] += w[j] * vr[d];
  }
}

// Backward of attend: accumulates into dquery (row), dkeys and dvalues (rows in set).
template <class T>
void attend_backward(std::span<const T> query, ConstMatrixView<T> keys, ConstMatrixView<T> values,
                     const std::vector<std::uint32_t>& set, T scale, const std::vector<T>& w, std::span<const T> dmix,
                     std::span<T> dquery, MatrixView<T> dkeys, MatrixView<T> dvalues) {
  std::vector<T> dw(set.size());
  T dot = 0;
  for (std::size_t j = 0; j < set.size(); ++j) {
    const T* vr = values.data + set[j] * values.cols;
    T* dvr = dvalues.data + set[j] * dvalues.cols;
    T acc = 0;
    for (std::size_t d = 0; d < dmix.size(); ++d) {
      acc += dmix[d] * vr[d];
      dvr[d] += w[j] * dmix[d];
    }
    dw[j] = acc;
    dot += w[j] * acc;
  }
  for (std::size_t j = 0; j < set.size(); ++j) {
    const T dl = w[j] * (dw[j] - dot) * scale;
    const T* kr = keys.data + set[j] * keys.cols;
    T* dkr = dkeys.data + set[j] * dkeys.cols;
    for (std::size_t d = 0; d < query.size(); ++d) {
      dquery[d] += dl * kr[d];
      dkr[d] += dl * query[d];
    }
  }
}

template <class T>
void check_pattern(const IncidencePattern& pat, std::size_t rows) {
  if (pat.roles.size() != rows || pat.members.size() != rows || pat.incident.size() != rows)
    fail_numeric("incidence pattern does not match the token count");
  for (std::size_t i = 0; i < rows; ++i) {
    for (auto v : pat.members[i])
      if (v >= rows || pat.roles[v] != StemRole::kVertex) fail_numeric("M(e) must reference real vertex slots");
    for (auto e : pat.incident[i])
      if (e >= rows || pat.roles[e] != StemRole::kHyperedge) fail_numeric("N(v) must reference real hyperedge slots");
  }
}

}  // namespace

template <class T>
HipCache<T> hip_forward(const HipParams<T>& p, ConstMatrixView<T> features, const IncidencePattern& pattern) {
  const HipConfig& cfg = p.config;
  const std::size_t L = features.rows, dt = cfg.d_text, ds = cfg.d_struct, dh = cfg.d_hidden();
  if (features.cols != dt + ds)
    fail_numeric("token width " + std::to_string(features.cols) + " does not match d_text + d_struct = " +
                 std::to_string(dt + ds));
  check_pattern<T>(pattern, L);

  HipCache<T> c;
  c.generation = p.generation;
  c.rows = L;
  c.pattern = pattern;

  // Stems.
  Matrix<T> a(L, dt), s(L, ds);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t k = 0; k < dt; ++k) a(i, k) = features(i, k);
    for (std::size_t k = 0; k < ds; ++k) s(i, k) = features(i, dt + k);
  }
  ln_forward<T>(a.cview(), p.vec(HipParam::kLnAGain), p.vec(HipParam::kLnABias), c.ln_a, c.a_norm);
  ln_forward<T>(s.cview(), p.vec(HipParam::kLnSGain), p.vec(HipParam::kLnSBias), c.ln_s, c.s_norm);

  Matrix<T> x0(L, dh);
  Matrix<T> core(L, cfg.d_core);
  kernels::linear<T>(c.a_norm.cview(), p.mat(HipParam::kWSem), {}, core.view());
  for (std::size_t r = 0; r < kNumStemRoles; ++r) {
    const auto rows = rows_with_role(pattern, static_cast<StemRole>(r));
    if (rows.empty()) continue;
    Matrix<T> sub(rows.size(), ds), side(rows.size(), cfg.d_sidecar);
    for (std::size_t j = 0; j < rows.size(); ++j)
      std::copy_n(c.s_norm.row(rows[j]).data(), ds, sub.row(j).data());
    kernels::linear<T>(sub.cview(), p.mat(structural_weight(static_cast<StemRole>(r))), {}, side.view());
    for (std::size_t j = 0; j < rows.size(); ++j)
      std::copy_n(side.row(j).data(), cfg.d_sidecar, x0.row(rows[j]).data() + cfg.d_core);
  }
  for (std::size_t i = 0; i < L; ++i) std::copy_n(core.row(i).data(), cfg.d_core, x0.row(i).data());
  ln_forward<T>(x0.cview(), p.vec(HipParam::kLnH0Gain), p.vec(HipParam::kLnH0Bias), c.ln_h0, c.h0);

  // Vertex -> hyperedge.
  const T scale = T(1) / std::sqrt(T(cfg.d_att()));
  c.q.resize(L, cfg.d_att());
  c.k.resize(L, cfg.d_att());
  c.msg_ev.resize(L, dh);
  kernels::linear<T>(c.h0.cview(), p.mat(HipParam::kWq), {}, c.q.view());
  kernels::linear<T>(c.h0.cview(), p.mat(HipParam::kWk), {}, c.k.view());
  kernels::linear<T>(c.h0.cview(), p.mat(HipParam::kWEdgeFromVertex), {}, c.msg_ev.view());

  c.alpha.assign(L, {});
  c.m_e.resize(L, dh);
  for (std::size_t i = 0; i < L; ++i) {
    if (pattern.roles[i] != StemRole::kHyperedge || pattern.members[i].empty()) continue;
    attend<T>(c.q.row(i), c.k.cview(), c.msg_ev.cview(), pattern.members[i], scale, c.alpha[i], c.m_e.row(i));
    c.phi_e.rows.push_back(static_cast<std::uint32_t>(i));
  }
  c.h_tilde = c.h0;
  {
    const auto& rows = c.phi_e.rows;
    c.phi_e.in.resize(rows.size(), 2 * dh);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      std::copy_n(c.h0.row(rows[j]).data(), dh, c.phi_e.in.row(j).data());
      std::copy_n(c.m_e.row(rows[j]).data(), dh, c.phi_e.in.row(j).data() + dh);
    }
    Matrix<T> f;
    mlp_forward<T>(p, HipParam::kPhiEW1, HipParam::kPhiEB1, HipParam::kPhiEW2, HipParam::kPhiEB2, c.phi_e, f);
    for (std::size_t j = 0; j < rows.size(); ++j)
      for (std::size_t k = 0; k < dh; ++k) f(j, k) += c.h0(rows[j], k);
    Matrix<T> upd;
    ln_forward<T>(f.cview(), p.vec(HipParam::kLnEGain), p.vec(HipParam::kLnEBias), c.ln_e, upd);
    for (std::size_t j = 0; j < rows.size(); ++j) std::copy_n(upd.row(j).data(), dh, c.h_tilde.row(rows[j]).data());
  }

  // Hyperedge -> vertex.
  c.k_tilde.resize(L, cfg.d_att());
  c.msg_ve.resize(L, dh);
  kernels::linear<T>(c.h_tilde.cview(), p.mat(HipParam::kWk), {}, c.k_tilde.view());
  kernels::linear<T>(c.h_tilde.cview(), p.mat(HipParam::kWVertexFromEdge), {}, c.msg_ve.view());
  c.beta.assign(L, {});
  c.m_v.resize(L, dh);
  for (std::size_t i = 0; i < L; ++i) {
    if (pattern.roles[i] != StemRole::kVertex || pattern.incident[i].empty()) continue;
    attend<T>(c.q.row(i), c.k_tilde.cview(), c.msg_ve.cview(), pattern.incident[i], scale, c.beta[i],
              c.m_v.row(i));
    c.phi_v.rows.push_back(static_cast<std::uint32_t>(i));
  }
  c.h1 = c.h_tilde;
  {
    const auto& rows = c.phi_v.rows;
    c.phi_v.in.resize(rows.size(), 2 * dh);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      std::copy_n(c.h0.row(rows[j]).data(), dh, c.phi_v.in.row(j).data());
      std::copy_n(c.m_v.row(rows[j]).data(), dh, c.phi_v.in.row(j).data() + dh);
    }
    Matrix<T> f;
    mlp_forward<T>(p, HipParam::kPhiVW1, HipParam::kPhiVB1, HipParam::kPhiVW2, HipParam::kPhiVB2, c.phi_v, f);
    for (std::size_t j = 0; j < rows.size(); ++j)
      for (std::size_t k = 0; k < dh; ++k) f(j, k) += c.h0(rows[j], k);
    Matrix<T> upd;
    ln_forward<T>(f.cview(), p.vec(HipParam::kLnVGain), p.vec(HipParam::kLnVBias), c.ln_v, upd);
    for (std::size_t j = 0; j < rows.size(); ++j) std::copy_n(upd.row(j).data(), dh, c.h1.row(rows[j]).data());
  }

  // Output map.
  c.out_mlp.in = c.h1;
  mlp_forward<T>(p, HipParam::kOutW1, HipParam::kOutB1, HipParam::kOutW2, HipParam::kOutB2, c.out_mlp, c.tokens);
  return c;
}

template <class T>
OrdLogits<T> aux_ord_logits(const HipCache<T>& cache, const HipParams<T>& p, std::span<const int> targets) {
  if (targets.size() != cache.rows) fail_numeric("order targets do not match the token count");
  OrdLogits<T> out;
  out.logits.resize(cache.rows, p.config.num_order_buckets);
  kernels::linear<T>(cache.h1.cview(), p.mat(HipParam::kOrdW), p.vec(HipParam::kOrdB), out.logits.view());
  out.eligible.resize(cache.rows);
  for (std::size_t i = 0; i < cache.rows; ++i) out.eligible[i] = targets[i] >= 0;
  return out;
}

namespace {
template <class T>
Matrix<T> pair_inputs(const HipCache<T>& cache, std::span<const SlotPair> pairs, std::size_t detail_size) {
  const std::size_t dh = cache.h1.cols();
  Matrix<T> x(pairs.size(), 2 * dh);
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    const auto [i, j] = pairs[n];
    if (i >= detail_size || j >= detail_size || detail_size > cache.rows)
      fail_data("relation pair (" + std::to_string(i) + ", " + std::to_string(j) + ") is outside the detail segment");
    std::copy_n(cache.h1.row(i).data(), dh, x.row(n).data());
    std::copy_n(cache.h1.row(j).data(), dh, x.row(n).data() + dh);
  }
  return x;
}
}  // namespace

template <class T>
Matrix<T> aux_rel_logits(const HipCache<T>& cache, const HipParams<T>& p, std::span<const SlotPair> pairs,
                         std::size_t detail_size) {
  Matrix<T> x = pair_inputs(cache, pairs, detail_size);
  Matrix<T> out(pairs.size(), kNumRelations);
  kernels::linear<T>(x.cview(), p.mat(HipParam::kRelW), p.vec(HipParam::kRelB), out.view());
  return out;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

template <class T>
void hip_backward(const HipCache<T>& c, const HipParams<T>& p, const HipUpstream<T>& up, HipParams<T>& g) {
  if (c.generation != p.generation) fail_usage("stale projector cache: parameters changed after the forward pass");
  if (g.data.size() != p.data.size()) fail_numeric("gradient buffer does not match the parameter layout");
  const HipConfig& cfg = p.config;
  const std::size_t L = c.rows, dh = cfg.d_hidden();
  const T scale = T(1) / std::sqrt(T(cfg.d_att()));

  // Heads into dh1.
  Matrix<T> dh1(L, dh);
  if (!up.d_tokens.empty()) {
    if (up.d_tokens.rows != L || up.d_tokens.cols != cfg.d_llm) fail_numeric("token gradient has the wrong shape");
    Matrix<T> d = mlp_backward<T>(p, HipParam::kOutW1, HipParam::kOutB1, HipParam::kOutW2, HipParam::kOutB2,
                                  c.out_mlp, up.d_tokens, g);
    dh1 = std::move(d);
  }
  if (!up.d_ord.empty()) {
    if (up.d_ord.rows != L || up.d_ord.cols != cfg.num_order_buckets)
      fail_numeric("order-logit gradient has the wrong shape");
    kernels::linear_backward<T>(c.h1.cview(), p.mat(HipParam::kOrdW), up.d_ord, dh1.view(), g.mat(HipParam::kOrdW),
                                g.vec(HipParam::kOrdB));
  }
  if (!up.d_rel.empty() && !up.pairs.empty()) {
    if (up.d_rel.rows != up.pairs.size() || up.d_rel.cols != kNumRelations)
      fail_numeric("relation-logit gradient has the wrong shape");
    Matrix<T> x = pair_inputs(c, up.pairs, L);
    Matrix<T> dx(x.rows(), x.cols());
    kernels::linear_backward<T>(x.cview(), p.mat(HipParam::kRelW), up.d_rel, dx.view(), g.mat(HipParam::kRelW),
                                g.vec(HipParam::kRelB));
    for (std::size_t n = 0; n < up.pairs.size(); ++n) {
      const auto [i, j] = up.pairs[n];
      for (std::size_t k = 0; k < dh; ++k) {
        dh1(i, k) += dx(n, k);
        dh1(j, k) += dx(n, dh + k);
      }
    }
  }

  Matrix<T> dh0(L, dh);
  Matrix<T> dq(L, cfg.d_att());

  // Vertex update.
  Matrix<T> dht = dh1;
  {
    const auto& rows = c.phi_v.rows;
    Matrix<T> dy(rows.size(), dh);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      std::copy_n(dh1.row(rows[j]).data(), dh, dy.row(j).data());
      std::fill_n(dht.row(rows[j]).data(), dh, T(0));
    }
    Matrix<T> dr;
    ln_backward<T>(dy.cview(), c.ln_v, p.vec(HipParam::kLnVGain), dr, g.vec(HipParam::kLnVGain),
                   g.vec(HipParam::kLnVBias));
    Matrix<T> din = mlp_backward<T>(p, HipParam::kPhiVW1, HipParam::kPhiVB1, HipParam::kPhiVW2, HipParam::kPhiVB2,
                                    c.phi_v, dr.cview(), g);
    Matrix<T> dk_tilde(L, cfg.d_att()), dmsg_ve(L, dh);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const std::size_t v = rows[j];
      for (std::size_t k = 0; k < dh; ++k) dh0(v, k) += dr(j, k) + din(j, k);
      std::span<const T> dm(din.row(j).data() + dh, dh);
      attend_backward<T>(c.q.row(v), c.k_tilde.cview(), c.msg_ve.cview(), c.pattern.incident[v], scale, c.beta[v], dm,
                         dq.row(v), dk_tilde.view(), dmsg_ve.view());
    }
    kernels::linear_backward<T>(c.h_tilde.cview(), p.mat(HipParam::kWk), dk_tilde.cview(), dht.view(),
                                g.mat(HipParam::kWk), {});
    kernels::linear_backward<T>(c.h_tilde.cview(), p.mat(HipParam::kWVertexFromEdge), dmsg_ve.cview(), dht.view(),
                                g.mat(HipParam::kWVertexFromEdge), {});
  }

  // Hyperedge update.
  {
    const auto& rows = c.phi_e.rows;
    Matrix<T> dy(rows.size(), dh);
    std::vector<char> updated(L, 0);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      std::copy_n(dht.row(rows[j]).data(), dh, dy.row(j).data());
      updated[rows[j]] = 1;
    }
    for (std::size_t i = 0; i < L; ++i)
      if (!updated[i])
        for (std::size_t k = 0; k < dh; ++k) dh0(i, k) += dht(i, k);
    Matrix<T> dr;
    ln_backward<T>(dy.cview(), c.ln_e, p.vec(HipParam::kLnEGain), dr, g.vec(HipParam::kLnEGain),
                   g.vec(HipParam::kLnEBias));
    Matrix<T> din = mlp_backward<T>(p, HipParam::kPhiEW1, HipParam::kPhiEB1, HipParam::kPhiEW2, HipParam::kPhiEB2,
                                    c.phi_e, dr.cview(), g);
    Matrix<T> dk(L, cfg.d_att()), dmsg_ev(L, dh);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const std::size_t e = rows[j];
      for (std::size_t k = 0; k < dh; ++k) dh0(e, k) += dr(j, k) + din(j, k);
      std::span<const T> dm(din.row(j).data() + dh, dh);
      attend_backward<T>(c.q.row(e), c.k.cview(), c.msg_ev.cview(), c.pattern.members[e], scale, c.alpha[e], dm,
                         dq.row(e), dk.view(), dmsg_ev.view());
    }
    kernels::linear_backward<T>(c.h0.cview(), p.mat(HipParam::kWq), dq.cview(), dh0.view(), g.mat(HipParam::kWq), {});
    kernels::linear_backward<T>(c.h0.cview(), p.mat(HipParam::kWk), dk.cview(), dh0.view(), g.mat(HipParam::kWk), {});
    kernels::linear_backward<T>(c.h0.cview(), p.mat(HipParam::kWEdgeFromVertex), dmsg_ev.cview(), dh0.view(),
                                g.mat(HipParam::kWEdgeFromVertex), {});
  }

  // Stems.
  Matrix<T> dx0;
  ln_backward<T>(dh0.cview(), c.ln_h0, p.vec(HipParam::kLnH0Gain), dx0, g.vec(HipParam::kLnH0Gain),
                 g.vec(HipParam::kLnH0Bias));
  Matrix<T> dcore(L, cfg.d_core);
  for (std::size_t i = 0; i < L; ++i) std::copy_n(dx0.row(i).data(), cfg.d_core, dcore.row(i).data());
  Matrix<T> da_norm(L, cfg.d_text);
  kernels::linear_backward<T>(c.a_norm.cview(), p.mat(HipParam::kWSem), dcore.cview(), da_norm.view(),
                              g.mat(HipParam::kWSem), {});
  Matrix<T> scratch;
  ln_backward<T>(da_norm.cview(), c.ln_a, p.vec(HipParam::kLnAGain), scratch, g.vec(HipParam::kLnAGain),
                 g.vec(HipParam::kLnABias));

  Matrix<T> ds_norm(L, cfg.d_struct);
  for (std::size_t r = 0; r < kNumStemRoles; ++r) {
    const auto rows = rows_with_role(c.pattern, static_cast<StemRole>(r));
    if (rows.empty()) continue;
    Matrix<T> sub(rows.size(), cfg.d_struct), dside(rows.size(), cfg.d_sidecar), dsub(rows.size(), cfg.d_struct);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      std::copy_n(c.s_norm.row(rows[j]).data(), cfg.d_struct, sub.row(j).data());
      std::copy_n(dx0.row(rows[j]).data() + cfg.d_core, cfg.d_sidecar, dside.row(j).data());
    }
    const HipParam w = structural_weight(static_cast<StemRole>(r));
    kernels::linear_backward<T>(sub.cview(), p.mat(w), dside.cview(), dsub.view(), g.mat(w), {});
    for (std::size_t j = 0; j < rows.size(); ++j)
      std::copy_n(dsub.row(j).data(), cfg.d_struct, ds_norm.row(rows[j]).data());
  }
  ln_backward<T>(ds_norm.cview(), c.ln_s, p.vec(HipParam::kLnSGain), scratch, g.vec(HipParam::kLnSGain),
                 g.vec(HipParam::kLnSBias));
}

#define HGTOK_INSTANTIATE_HIP(T)                                                                                  \
  template struct HipParams<T>;                                                                                   \
  template HipCache<T> hip_forward<T>(const HipParams<T>&, ConstMatrixView<T>, const IncidencePattern&);          \
  template OrdLogits<T> aux_ord_logits<T>(const HipCache<T>&, const HipParams<T>&, std::span<const int>);         \
  template Matrix<T> aux_rel_logits<T>(const HipCache<T>&, const HipParams<T>&, std::span<const SlotPair>,        \
                                       std::size_t);                                                              \
  template void hip_backward<T>(const HipCache<T>&, const HipParams<T>&, const HipUpstream<T>&, HipParams<T>&);

HGTOK_INSTANTIATE_HIP(float)
HGTOK_INSTANTIATE_HIP(double)

}  // namespace hgtok
