#include "hgtok/hgjl.hpp"

#include <fstream>
#include <sstream>

#include "hgtok/error.hpp"

namespace hgtok {

namespace {

constexpr const char* kFormat = "HGJL1";

nlohmann::ordered_json manifest_json(const Hypergraph& h) {
  nlohmann::ordered_json m;
  m["format"] = kFormat;
  m["num_vertices"] = h.num_vertices();
  m["num_hyperedges"] = h.num_hyperedges();
  m["num_classes"] = h.num_classes();
  return m;
}

nlohmann::ordered_json vertex_json(const VertexRecord& v) {
  nlohmann::ordered_json j;
  j["type"] = "v";
  j["id"] = v.id;
  if (v.text) j["text"] = *v.text;
  if (v.label) j["label"] = *v.label;
  return j;
}

nlohmann::ordered_json hyperedge_json(const HyperedgeRecord& e) {
  nlohmann::ordered_json j;
  j["type"] = "e";
  j["id"] = e.id;
  j["members"] = e.members;
  if (e.text) j["text"] = *e.text;
  if (e.label) j["label"] = *e.label;
  return j;
}

std::size_t get_count(const nlohmann::json& m, const char* key) {
  if (!m.contains(key) || !m[key].is_number_unsigned()) fail_data(std::string("malformed record: manifest field ") + key);
  return m[key].get<std::size_t>();
}

std::uint64_t get_id(const nlohmann::json& r) {
  if (!r.contains("id") || !r["id"].is_number_unsigned()) fail_data("malformed record: missing or negative id");
  return r["id"].get<std::uint64_t>();
}

std::optional<std::string> get_text(const nlohmann::json& r) {
  if (!r.contains("text")) return std::nullopt;
  if (!r["text"].is_string()) fail_data("malformed record: text must be a string");
  return r["text"].get<std::string>();
}

std::optional<int> get_label(const nlohmann::json& r) {
  if (!r.contains("label")) return std::nullopt;
  if (!r["label"].is_number_integer()) fail_data("malformed record: label must be an integer");
  return r["label"].get<int>();
}

class RecordBuilder {
 public:
  void manifest(const nlohmann::json& m) {
    if (!m.is_object() || m.value("format", "") != kFormat) fail_data("malformed record: expected HGJL1 manifest");
    declared_.num_vertices = get_count(m, "num_vertices");
    declared_.num_hyperedges = get_count(m, "num_hyperedges");
    declared_.num_classes = get_count(m, "num_classes");
  }

  void record(const nlohmann::json& r) {
    if (!r.is_object() || !r.contains("type") || !r["type"].is_string()) fail_data("malformed record: missing type");
    const auto type = r["type"].get<std::string>();
    if (type == "v") {
      if (!edges_.empty()) fail_data("malformed record: vertex record after hyperedge records");
      VertexRecord v{get_id(r), get_text(r), get_label(r)};
      if (!vertices_.empty() && v.id <= vertices_.back().id) fail_data("malformed record: vertex ids not ascending");
      vertices_.push_back(std::move(v));
    } else if (type == "e") {
      HyperedgeRecord e{get_id(r), {}, get_text(r), get_label(r)};
      if (!r.contains("members") || !r["members"].is_array()) fail_data("malformed record: members must be an array");
      for (const auto& m : r["members"]) {
        if (!m.is_number_unsigned()) fail_data("malformed record: member ids must be nonnegative integers");
        e.members.push_back(m.get<VertexId>());
      }
      if (!edges_.empty() && e.id <= edges_.back().id) fail_data("malformed record: hyperedge ids not ascending");
      edges_.push_back(std::move(e));
    } else {
      fail_data("malformed record: unknown type '" + type + "'");
    }
  }

  HgjlDocument finish() {
    if (vertices_.size() != declared_.num_vertices || edges_.size() != declared_.num_hyperedges) {
      fail_data("manifest mismatch: declared " + std::to_string(declared_.num_vertices) + " vertices / " +
                std::to_string(declared_.num_hyperedges) + " hyperedges, found " + std::to_string(vertices_.size()) +
                " / " + std::to_string(edges_.size()));
    }
    Hypergraph h(std::move(vertices_), std::move(edges_), declared_.num_classes);
    return {declared_, std::move(h)};
  }

 private:
  HgjlManifest declared_;
  std::vector<VertexRecord> vertices_;
  std::vector<HyperedgeRecord> edges_;
};

}  // namespace

nlohmann::ordered_json to_hgjl_records(const Hypergraph& h) {
  auto arr = nlohmann::ordered_json::array();
  arr.push_back(manifest_json(h));
  for (const auto& v : h.vertex_records()) arr.push_back(vertex_json(v));
  for (const auto& e : h.hyperedge_records()) arr.push_back(hyperedge_json(e));
  return arr;
}

Hypergraph from_hgjl_records(const nlohmann::json& records) {
  if (!records.is_array() || records.empty()) fail_data("malformed record: expected an HGJL1 record array");
  RecordBuilder b;
  b.manifest(records[0]);
  for (std::size_t i = 1; i < records.size(); ++i) b.record(records[i]);
  return b.finish().graph;
}

void write_hgjl(const Hypergraph& h, std::ostream& out) {
  out << manifest_json(h).dump() << '\n';
  for (const auto& v : h.vertex_records()) out << vertex_json(v).dump() << '\n';
  for (const auto& e : h.hyperedge_records()) out << hyperedge_json(e).dump() << '\n';
}

std::string to_hgjl_string(const Hypergraph& h) {
  std::ostringstream os;
  write_hgjl(h, os);
  return os.str();
}

void write_hgjl_file(const Hypergraph& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot open " + path + " for writing");
  write_hgjl(h, out);
}

HgjlDocument read_hgjl(std::istream& in) {
  RecordBuilder b;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      fail_data("malformed record at line " + std::to_string(lineno));
    }
    if (lineno == 1) {
      b.manifest(j);
    } else {
      b.record(j);
    }
  }
  if (lineno == 0) fail_data("malformed record: empty HGJL1 input");
  return b.finish();
}

HgjlDocument read_hgjl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open " + path);
  return read_hgjl(in);
}

}  // namespace hgtok
