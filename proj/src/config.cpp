#include "hgtok/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hgtok/error.hpp"

namespace hgtok {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) fail_usage("config key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail_usage("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail_usage("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::uint64_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  if (out.empty()) fail_usage("config key '" + key + "': empty list");
  return out;
}

std::vector<std::uint32_t> parse_bounds(const std::string& key, const std::string& v) {
  std::vector<std::uint32_t> out;
  for (auto x : parse_list(key, v)) {
    if (x >= BucketScheme::kUnbounded) fail_usage("config key '" + key + "': bound too large");
    out.push_back(static_cast<std::uint32_t>(x));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

std::vector<std::uint32_t> finite(const std::vector<std::uint32_t>& bounds) {
  std::vector<std::uint32_t> out;
  for (auto b : bounds)
    if (b != BucketScheme::kUnbounded) out.push_back(b);
  return out;
}

}  // namespace

HipConfig RunConfig::hip(std::size_t d_struct) const {
  HipConfig c;
  c.d_text = d_text;
  c.d_struct = d_struct;
  c.d_core = d_core;
  c.d_sidecar = d_sidecar;
  c.d_llm = lm.d_model;
  c.num_order_buckets = tmpl.buckets.num_order_buckets();
  return c;
}

void RunConfig::validate() const {
  tmpl.validate();
  lm.validate();
  train.validate();
  if (d_text == 0) fail_usage("d_text must be positive");
  hip(tmpl.struct_dim()).validate();
  if (context_limit > lm.max_len) fail_usage("context_limit exceeds the LM's max_len");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  std::vector<std::uint32_t> order_bounds = c.tmpl.buckets.order_bounds();
  std::vector<std::uint32_t> degree_bounds = c.tmpl.buckets.degree_bounds();
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail_usage("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (key == "seed") c.seed = parse_uint(key, v);
    else if (key == "lr") c.train.lr = parse_double(key, v);
    else if (key == "warmup_ratio") c.train.warmup_ratio = parse_double(key, v);
    else if (key == "lambda_ord") c.train.lambda_ord = parse_double(key, v);
    else if (key == "lambda_rel") c.train.lambda_rel = parse_double(key, v);
    else if (key == "epochs") c.train.epochs = parse_uint(key, v);
    else if (key == "batch") c.train.batch = parse_uint(key, v);
    else if (key == "k_rel") c.train.k_rel = parse_uint(key, v);
    else if (key == "weight_decay") c.train.weight_decay = parse_double(key, v);
    else if (key == "grad_clip") c.train.grad_clip = parse_double(key, v);
    else if (key == "max_new_tokens") c.train.max_new_tokens = parse_uint(key, v);
    else if (key == "center_role") {
      if (v == "vertex") c.tmpl.center_role = CenterRole::kVertex;
      else if (v == "hyperedge") c.tmpl.center_role = CenterRole::kHyperedge;
      else fail_usage("config key 'center_role': expected vertex or hyperedge");
    } else if (key == "budgets") {
      c.tmpl.layer_budgets.clear();
      for (auto b : parse_list(key, v)) c.tmpl.layer_budgets.push_back(b);
    } else if (key == "overview_hops") c.tmpl.overview_hops = parse_uint(key, v);
    else if (key == "with_overview") c.tmpl.with_overview = parse_bool(key, v);
    else if (key == "order_bounds") order_bounds = parse_bounds(key, v);
    else if (key == "degree_bounds") degree_bounds = parse_bounds(key, v);
    else if (key == "max_tokens") c.tmpl.max_tokens = parse_uint(key, v);
    else if (key == "pe_dim") c.tmpl.pe_dim = parse_uint(key, v);
    else if (key == "d_text") c.d_text = parse_uint(key, v);
    else if (key == "d_core") c.d_core = parse_uint(key, v);
    else if (key == "d_sidecar") c.d_sidecar = parse_uint(key, v);
    else if (key == "d_llm") c.lm.d_model = parse_uint(key, v);
    else if (key == "lm_layers") c.lm.layers = parse_uint(key, v);
    else if (key == "lm_heads") c.lm.heads = parse_uint(key, v);
    else if (key == "lm_max_len") c.lm.max_len = parse_uint(key, v);
    else if (key == "lm_pretrain_steps") c.lm_pretrain_steps = parse_uint(key, v);
    else if (key == "context_limit") c.context_limit = parse_uint(key, v);
    else fail_usage("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  c.tmpl.buckets = BucketScheme(order_bounds, degree_bounds);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_usage("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_config_text(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "seed=" << c.seed << '\n'
     << "lr=" << c.train.lr << '\n'
     << "warmup_ratio=" << c.train.warmup_ratio << '\n'
     << "lambda_ord=" << c.train.lambda_ord << '\n'
     << "lambda_rel=" << c.train.lambda_rel << '\n'
     << "epochs=" << c.train.epochs << '\n'
     << "batch=" << c.train.batch << '\n'
     << "k_rel=" << c.train.k_rel << '\n'
     << "weight_decay=" << c.train.weight_decay << '\n'
     << "grad_clip=" << c.train.grad_clip << '\n'
     << "max_new_tokens=" << c.train.max_new_tokens << '\n'
     << "center_role=" << (c.tmpl.center_role == CenterRole::kVertex ? "vertex" : "hyperedge") << '\n'
     << "budgets=" << join(c.tmpl.layer_budgets) << '\n'
     << "overview_hops=" << c.tmpl.overview_hops << '\n'
     << "with_overview=" << (c.tmpl.with_overview ? "true" : "false") << '\n'
     << "order_bounds=" << join(finite(c.tmpl.buckets.order_bounds())) << '\n'
     << "degree_bounds=" << join(finite(c.tmpl.buckets.degree_bounds())) << '\n'
     << "max_tokens=" << c.tmpl.max_tokens << '\n'
     << "pe_dim=" << c.tmpl.pe_dim << '\n'
     << "d_text=" << c.d_text << '\n'
     << "d_core=" << c.d_core << '\n'
     << "d_sidecar=" << c.d_sidecar << '\n'
     << "d_llm=" << c.lm.d_model << '\n'
     << "lm_layers=" << c.lm.layers << '\n'
     << "lm_heads=" << c.lm.heads << '\n'
     << "lm_max_len=" << c.lm.max_len << '\n'
     << "lm_pretrain_steps=" << c.lm_pretrain_steps << '\n'
     << "context_limit=" << c.context_limit << '\n';
  return os.str();
}

}  // namespace hgtok
