#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "hgtok/hypergraph.hpp"

namespace hgtok {

// Line 1 of an HGJL1 file.
struct HgjlManifest {
  std::size_t num_vertices = 0;
  std::size_t num_hyperedges = 0;
  std::size_t num_classes = 0;
};

struct HgjlDocument {
  HgjlManifest declared;
  Hypergraph graph;
};

// Record sequence (manifest, vertex records, hyperedge records) as JSON values.
nlohmann::ordered_json to_hgjl_records(const Hypergraph& h);
// Inverse of to_hgjl_records. Validates the manifest against the records.
Hypergraph from_hgjl_records(const nlohmann::json& records);

void write_hgjl(const Hypergraph& h, std::ostream& out);
std::string to_hgjl_string(const Hypergraph& h);
void write_hgjl_file(const Hypergraph& h, const std::string& path);

// Parses and validates. Errors: malformed record, dangling member, manifest
// mismatch (declared counts differ from the records).
HgjlDocument read_hgjl(std::istream& in);
HgjlDocument read_hgjl_file(const std::string& path);

}  // namespace hgtok
