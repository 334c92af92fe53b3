#pragma once

// Benchmark dataset plumbing: a directory holding an HGJL1 hypergraph, a JSON
// manifest and one-id-per-line split files, plus statistics and degree CCDFs.
//
// Layout:
//   hypergraph.hgjl
//   manifest.json
//   {vc,hec}_{train,valid,test}.txt   (optional per task)

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hgtok/hypergraph.hpp"

namespace hgtok {

enum class SplitTask : std::uint8_t { kVc, kHec };
inline constexpr std::array<const char*, 3> kSplitNames{"train", "valid", "test"};

struct TaskSplits {
  std::array<std::vector<std::uint64_t>, 3> ids;  // train, valid, test; ascending
  bool present() const { return !ids[0].empty() || !ids[1].empty() || !ids[2].empty(); }
  bool operator==(const TaskSplits&) const = default;
};

struct DatasetManifest {
  std::string name;
  std::string domain;
  std::size_t num_vertices = 0;
  std::size_t num_hyperedges = 0;
  std::size_t num_incidences = 0;
  std::size_t num_classes = 0;
  std::array<std::size_t, 3> vc_split{};
  std::array<std::size_t, 3> hec_split{};
  bool operator==(const DatasetManifest&) const = default;
};

nlohmann::ordered_json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

struct Dataset {
  Hypergraph graph;
  DatasetManifest manifest;
  TaskSplits vc, hec;
};

// Counts recomputed from the hypergraph and splits; name/domain copied from base.
DatasetManifest recompute_manifest(const Hypergraph& h, const TaskSplits& vc, const TaskSplits& hec,
                                   const DatasetManifest& base);

// Reads and cross-checks a dataset directory. Errors (all data errors):
// malformed record, dangling member, unknown split id, split overlap, split
// ids without a label, manifest mismatch.
Dataset ingest(const std::string& dir);
// Writes the canonical form of a dataset; ingest(export(d)) == d.
void export_dataset(const Dataset& d, const std::string& dir);

struct HypergraphStats {
  std::size_t num_vertices = 0;
  std::size_t num_hyperedges = 0;
  std::size_t num_incidences = 0;
  std::size_t num_classes = 0;
  std::size_t sum_vertex_degrees = 0;
  std::size_t sum_hyperedge_orders = 0;
  std::map<std::size_t, std::size_t> degree_histogram;  // d(v) -> #vertices
  std::map<std::size_t, std::size_t> order_histogram;   // r(e) -> #hyperedges
};

HypergraphStats stats(const Hypergraph& h);
nlohmann::ordered_json stats_to_json(const HypergraphStats& s);

// (threshold, fraction of values >= threshold) at each distinct value, ascending.
std::vector<std::pair<std::uint64_t, double>> ccdf(const std::vector<std::uint64_t>& values);
void write_ccdf_csv(std::ostream& os, const std::vector<std::pair<std::uint64_t, double>>& points);

std::vector<std::uint64_t> vertex_degrees(const Hypergraph& h);
std::vector<std::uint64_t> hyperedge_orders(const Hypergraph& h);

}  // namespace hgtok
