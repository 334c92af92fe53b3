#pragma once

// Same-hyperedge membership diagnostic built from two hypergraphs with equal
// clique expansions: matched pairs that only a model seeing true hyperedges
// can separate.

#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hgtok/hypergraph.hpp"

namespace hgtok {

// H_A = {123, 145, 246, 356}, H_B = {124, 135, 236, 456} over vertices 1..6.
std::pair<Hypergraph, Hypergraph> core_pair();
// E_clique shared by both core hypergraphs.
PairMultiset core_clique_edges();

// True ("Yes") iff some hyperedge contains all three vertices.
bool label(const Hypergraph& h, VertexId c, VertexId u, VertexId v);

struct DiagSample {
  Hypergraph graph;
  VertexId center = 0, u = 0, v = 0;
  bool yes = false;
};

struct MatchedPair {
  std::uint64_t id = 0;
  bool test = false;
  std::string signature;
  DiagSample a, b;
};

struct DiagConfig {
  std::string name = "custom";
  std::size_t distractor_vertices = 20;
  std::size_t distractor_hyperedges = 20;
  std::size_t decoys_per_pattern = 0;  // adversarial: 6 of each (c,u,x), (c,v,y), (u,v,z)
  std::size_t train_pairs = 2500;
  std::size_t test_pairs = 500;
  std::size_t min_distractor_size = 2;
  std::size_t max_distractor_size = 4;
  std::uint64_t seed = 0;

  static DiagConfig clean_d20();
  static DiagConfig adversarial_d50();
  static DiagConfig clean_d8();
  static DiagConfig preset(const std::string& name);  // "clean-d20", "adv-d50", "clean-d8"
  void validate() const;
};

struct DiagDataset {
  std::vector<MatchedPair> train, test;
};

DiagDataset gen_dataset(const DiagConfig& cfg);

// Id-free description of the hyperedges within two hops of the query triple.
std::string query_signature(const DiagSample& s);

struct EquivalenceReport {
  bool clique_equal = false;
  bool query_valid = false;  // same distinct, present (c, u, v) on both sides
  bool labels_opposite = false;
  bool labels_recomputed = false;  // stored labels match the hypergraphs
  bool no_leakage = false;         // Yes side: exactly one triple-containing hyperedge; No side: none
  bool ok() const { return clique_equal && query_valid && labels_opposite && labels_recomputed && no_leakage; }
  std::string describe() const;
};
EquivalenceReport verify_equivalence(const MatchedPair& p);

enum class Answer : std::uint8_t { kYes, kNo, kInvalid };

struct DiagMetrics {
  double sample_acc = 0, pair_acc = 0, flip_rate = 0;  // percentages
  std::size_t invalid = 0;
  std::size_t pairs = 0;
};

// predictions: 2 per pair, side A then side B.
DiagMetrics diag_metrics(const std::vector<Answer>& predictions, const std::vector<MatchedPair>& pairs);

// A predictor that only ever sees the clique expansion and the query ids.
using PairwisePredictor = std::function<Answer(const PairMultiset&, VertexId c, VertexId u, VertexId v)>;
DiagMetrics clique_baseline(const std::vector<MatchedPair>& pairs, const PairwisePredictor& predictor);

// Yes when at least two of the three query pairs carry pairwise evidence.
Answer pairwise_majority_predictor(const PairMultiset& edges, VertexId c, VertexId u, VertexId v);

// One pair per line with both sides embedded as HGJL1 record arrays.
void write_diag_jsonl(std::ostream& os, const std::vector<MatchedPair>& pairs);
std::vector<MatchedPair> read_diag_jsonl(std::istream& is);

}  // namespace hgtok
