#include "hgtok/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hgtok/error.hpp"
#include "hgtok/hgjl.hpp"

namespace hgtok {

namespace fs = std::filesystem;

namespace {

const char* task_prefix(SplitTask t) { return t == SplitTask::kVc ? "vc" : "hec"; }

std::vector<std::uint64_t> read_ids(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_data("cannot open " + path.string());
  std::vector<std::uint64_t> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::uint64_t id = 0;
    std::size_t used = 0;
    try {
      if (line[0] == '-' || line[0] == '+') throw std::invalid_argument(line);
      id = std::stoull(line, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != line.size()) fail_data("malformed record: " + path.string() + ":" + std::to_string(lineno));
    out.push_back(id);
  }
  return out;
}

TaskSplits read_splits(const fs::path& dir, SplitTask task) {
  TaskSplits s;
  for (std::size_t k = 0; k < 3; ++k) {
    const fs::path p = dir / (std::string(task_prefix(task)) + "_" + kSplitNames[k] + ".txt");
    if (fs::exists(p)) s.ids[k] = read_ids(p);
  }
  return s;
}

// Every id must name a labeled object of the right kind, appear once, and the
// splits must partition the labeled population.
void check_splits(const Hypergraph& h, const TaskSplits& s, SplitTask task) {
  if (!s.present()) return;
  const char* what = task_prefix(task);
  std::set<std::uint64_t> seen;
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::uint64_t id : s.ids[k]) {
      std::optional<int> label;
      if (task == SplitTask::kVc) {
        auto v = h.find_vertex(id);
        if (!v) fail_data(std::string("unknown ") + what + " split id " + std::to_string(id));
        label = h.vertex(*v).label;
      } else {
        auto e = h.find_hyperedge(id);
        if (!e) fail_data(std::string("unknown ") + what + " split id " + std::to_string(id));
        label = h.hyperedge(*e).label;
      }
      if (!label) fail_data(std::string(what) + " split id " + std::to_string(id) + " has no label");
      if (!seen.insert(id).second)
        fail_data(std::string("split overlap: ") + what + " id " + std::to_string(id) + " appears more than once");
    }
  }
}

std::size_t labeled_population(const Hypergraph& h, SplitTask task) {
  std::size_t n = 0;
  if (task == SplitTask::kVc) {
    for (const auto& v : h.vertex_records()) n += v.label.has_value();
  } else {
    for (const auto& e : h.hyperedge_records()) n += e.label.has_value();
  }
  return n;
}

std::array<std::size_t, 3> split_sizes(const TaskSplits& s) {
  return {s.ids[0].size(), s.ids[1].size(), s.ids[2].size()};
}

nlohmann::ordered_json split_json(const std::array<std::size_t, 3>& s) {
  nlohmann::ordered_json j;
  for (std::size_t k = 0; k < 3; ++k) j[kSplitNames[k]] = s[k];
  return j;
}

std::array<std::size_t, 3> split_from_json(const nlohmann::json& j) {
  std::array<std::size_t, 3> s{};
  for (std::size_t k = 0; k < 3; ++k) s[k] = j.at(kSplitNames[k]).get<std::size_t>();
  return s;
}

}  // namespace

nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["domain"] = m.domain;
  j["num_vertices"] = m.num_vertices;
  j["num_hyperedges"] = m.num_hyperedges;
  j["num_incidences"] = m.num_incidences;
  j["num_classes"] = m.num_classes;
  j["splits"] = {{"vc", split_json(m.vc_split)}, {"hec", split_json(m.hec_split)}};
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    m.domain = j.at("domain").get<std::string>();
    m.num_vertices = j.at("num_vertices").get<std::size_t>();
    m.num_hyperedges = j.at("num_hyperedges").get<std::size_t>();
    m.num_incidences = j.at("num_incidences").get<std::size_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.vc_split = split_from_json(j.at("splits").at("vc"));
    m.hec_split = split_from_json(j.at("splits").at("hec"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail_data(std::string("malformed record: manifest: ") + e.what());
  }
}

DatasetManifest recompute_manifest(const Hypergraph& h, const TaskSplits& vc, const TaskSplits& hec,
                                   const DatasetManifest& base) {
  DatasetManifest m;
  m.name = base.name;
  m.domain = base.domain;
  m.num_vertices = h.num_vertices();
  m.num_hyperedges = h.num_hyperedges();
  m.num_incidences = h.num_incidences();
  m.num_classes = h.num_classes();
  m.vc_split = split_sizes(vc);
  m.hec_split = split_sizes(hec);
  return m;
}

Dataset ingest(const std::string& dir_str) {
  const fs::path dir(dir_str);
  Dataset d;
  d.graph = read_hgjl_file((dir / "hypergraph.hgjl").string()).graph;
  {
    std::ifstream in(dir / "manifest.json");
    if (!in) fail_data("cannot open " + (dir / "manifest.json").string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
      fail_data("malformed record: manifest.json is not valid JSON");
    }
    d.manifest = manifest_from_json(j);
  }
  d.vc = read_splits(dir, SplitTask::kVc);
  d.hec = read_splits(dir, SplitTask::kHec);
  check_splits(d.graph, d.vc, SplitTask::kVc);
  check_splits(d.graph, d.hec, SplitTask::kHec);
  for (auto* s : {&d.vc, &d.hec})
    for (auto& ids : s->ids) std::sort(ids.begin(), ids.end());

  const DatasetManifest actual = recompute_manifest(d.graph, d.vc, d.hec, d.manifest);
  if (!(actual == d.manifest))
    fail_data("manifest mismatch: declared " + manifest_to_json(d.manifest).dump() + ", recomputed " +
              manifest_to_json(actual).dump());
  for (auto [s, task] : {std::pair{&d.vc, SplitTask::kVc}, std::pair{&d.hec, SplitTask::kHec}}) {
    if (!s->present()) continue;
    const auto sz = split_sizes(*s);
    if (sz[0] + sz[1] + sz[2] != labeled_population(d.graph, task))
      fail_data(std::string("manifest mismatch: ") + task_prefix(task) + " splits do not cover every labeled object");
  }
  return d;
}

void export_dataset(const Dataset& d, const std::string& dir_str) {
  const fs::path dir(dir_str);
  fs::create_directories(dir);
  write_hgjl_file(d.graph, (dir / "hypergraph.hgjl").string());
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) fail_data("cannot write " + (dir / "manifest.json").string());
    out << manifest_to_json(d.manifest).dump(2) << '\n';
  }
  for (auto [s, task] : {std::pair{&d.vc, SplitTask::kVc}, std::pair{&d.hec, SplitTask::kHec}}) {
    if (!s->present()) continue;
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<std::uint64_t> ids = s->ids[k];
      std::sort(ids.begin(), ids.end());
      std::ofstream out(dir / (std::string(task_prefix(task)) + "_" + kSplitNames[k] + ".txt"), std::ios::binary);
      for (auto id : ids) out << id << '\n';
    }
  }
}

std::vector<std::uint64_t> vertex_degrees(const Hypergraph& h) {
  std::vector<std::uint64_t> out;
  for (Index v = 0; v < h.num_vertices(); ++v) out.push_back(h.incident(v).size());
  return out;
}

std::vector<std::uint64_t> hyperedge_orders(const Hypergraph& h) {
  std::vector<std::uint64_t> out;
  for (Index e = 0; e < h.num_hyperedges(); ++e) out.push_back(h.members(e).size());
  return out;
}

HypergraphStats stats(const Hypergraph& h) {
  HypergraphStats s;
  s.num_vertices = h.num_vertices();
  s.num_hyperedges = h.num_hyperedges();
  s.num_incidences = h.num_incidences();
  s.num_classes = h.num_classes();
  for (auto d : vertex_degrees(h)) {
    s.sum_vertex_degrees += d;
    ++s.degree_histogram[d];
  }
  for (auto r : hyperedge_orders(h)) {
    s.sum_hyperedge_orders += r;
    ++s.order_histogram[r];
  }
  return s;
}

nlohmann::ordered_json stats_to_json(const HypergraphStats& s) {
  auto hist = [](const std::map<std::size_t, std::size_t>& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (auto [k, n] : m) j[std::to_string(k)] = n;
    return j;
  };
  nlohmann::ordered_json j;
  j["num_vertices"] = s.num_vertices;
  j["num_hyperedges"] = s.num_hyperedges;
  j["num_incidences"] = s.num_incidences;
  j["num_classes"] = s.num_classes;
  j["sum_vertex_degrees"] = s.sum_vertex_degrees;
  j["sum_hyperedge_orders"] = s.sum_hyperedge_orders;
  j["degree_histogram"] = hist(s.degree_histogram);
  j["order_histogram"] = hist(s.order_histogram);
  return j;
}

std::vector<std::pair<std::uint64_t, double>> ccdf(const std::vector<std::uint64_t>& values) {
  if (values.empty()) fail_data("ccdf of an empty list");
  std::vector<std::uint64_t> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<std::uint64_t, double>> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    out.emplace_back(sorted[i], static_cast<double>(sorted.size() - i) / n);
  }
  return out;
}

void write_ccdf_csv(std::ostream& os, const std::vector<std::pair<std::uint64_t, double>>& points) {
  os << "value,fraction\n";
  char buf[64];
  for (auto [v, f] : points) {
    std::snprintf(buf, sizeof buf, "%.17g", f);
    os << v << ',' << buf << '\n';
  }
}

}  // namespace hgtok
