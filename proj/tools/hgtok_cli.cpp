// hgtok: command-line entry point.
//
// Exit codes: 0 ok, 2 usage, 3 data, 4 numeric. Failures also print one JSON
// line {"error": kind, "message": ...} on stderr.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "hgtok/bench.hpp"
#include "hgtok/config.hpp"
#include "hgtok/diagnostic.hpp"
#include "hgtok/error.hpp"
#include "hgtok/hgjl.hpp"
#include "hgtok/parallel.hpp"
#include "hgtok/pipeline.hpp"
#include "hgtok/rng.hpp"
#include "hgtok/token_export.hpp"

namespace fs = std::filesystem;
using namespace hgtok;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string in, out;
  std::string task = "vc";
};

RunConfig run_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

// Non-diagnostic tasks take their center role from the task.
RunConfig task_config(const Common& c, Task task) {
  RunConfig cfg = run_config(c);
  if (task == Task::kDiagnostic) return diagnostic_run_config(cfg);
  cfg.tmpl.center_role = task == Task::kHyperedgeClassification ? CenterRole::kHyperedge : CenterRole::kVertex;
  cfg.validate();
  return cfg;
}

SemanticProvider stub_provider(const RunConfig& cfg) {
  return SemanticProvider::stub(cfg.d_text, derive_key(cfg.seed, {stream_tag::kSemantic}));
}

HipParams<float> params_for(const ExampleBuilder& b, const RunConfig& cfg, const std::string& path) {
  if (path.empty()) return HipParams<float>::init(b.hip_config(), cfg.seed);
  HipParams<float> p = load_checkpoint(path);
  check_checkpoint_config(b.hip_config(), p.config);
  return p;
}

// Writes to path, or stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot open " + path + " for writing");
  out << text;
}

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

Center parse_center(const Hypergraph& h, Task task, std::uint64_t id) {
  Center c{task == Task::kHyperedgeClassification ? CenterRole::kHyperedge : CenterRole::kVertex, id};
  if (c.role == CenterRole::kVertex) h.vertex_index(id);
  else h.hyperedge_index(id);
  return c;
}

std::optional<int> center_label(const Hypergraph& h, const Center& c) {
  return c.role == CenterRole::kVertex ? h.vertex(h.vertex_index(c.id)).label
                                       : h.hyperedge(h.hyperedge_index(c.id)).label;
}

// ---------------------------------------------------------------------------
// Dataset-backed examples (vc / hec)

struct LabeledSet {
  std::vector<std::uint64_t> ids;
  std::vector<Example> examples;
};

LabeledSet task_examples(const ExampleBuilder& b, const RunConfig& cfg, const Dataset& d, Task task,
                         std::size_t split) {
  const TaskSplits& s = task == Task::kVertexClassification ? d.vc : d.hec;
  if (!s.present()) fail_data(std::string("dataset has no ") + to_string(task) + " splits");
  const auto labels = class_label_names(d.graph.num_classes());
  const PropagationStates states = b.propagation(d.graph);
  LabeledSet out;
  out.ids = s.ids[split];
  out.examples.resize(out.ids.size());
  parallel_for(out.ids.size(), [&](std::size_t i) {
    const Center c = parse_center(d.graph, task, out.ids[i]);
    const int gold = *center_label(d.graph, c);
    if (gold < 0 || static_cast<std::size_t>(gold) >= labels.size())
      fail_data("label " + std::to_string(gold) + " outside num_classes");
    out.examples[i] = b.build(d.graph, c, task, labels, static_cast<std::size_t>(gold),
                              derive_key(cfg.seed, {stream_tag::kSampling, out.ids[i]}), &states);
  });
  return out;
}

std::size_t split_index(const std::string& name) {
  for (std::size_t k = 0; k < kSplitNames.size(); ++k)
    if (name == kSplitNames[k]) return k;
  fail_usage("unknown split '" + name + "' (expected train, valid or test)");
}

std::vector<MatchedPair> read_pairs(const std::string& path, std::optional<bool> test) {
  std::ifstream in(path);
  if (!in) fail_data("cannot open " + path);
  auto all = read_diag_jsonl(in);
  if (!test) return all;
  std::vector<MatchedPair> out;
  for (auto& p : all)
    if (p.test == *test) out.push_back(std::move(p));
  return out;
}

// ---------------------------------------------------------------------------
// Verbs

int cmd_serialize(const Common& c, std::uint64_t center_id) {
  const Task task = parse_task(c.task);
  const RunConfig cfg = task_config(c, task);
  const Hypergraph h = read_hgjl_file(c.in).graph;
  ExampleBuilder b(cfg, stub_provider(cfg));
  const Center center = parse_center(h, task, center_id);
  const HidtoSequence seq = b.sequence(h, center, cfg.seed);
  nlohmann::ordered_json j;
  j["L_H"] = seq.slots.size();
  j["detail_size"] = seq.detail_size;
  auto slots = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < seq.slots.size(); ++i) {
    const HidtoSlot& s = seq.slots[i];
    nlohmann::ordered_json r;
    r["index"] = i;
    r["role"] = to_string(s.role);
    r["layer"] = s.layer;
    r["parent"] = s.parent ? nlohmann::ordered_json(*s.parent) : nlohmann::ordered_json(nullptr);
    if (s.object) r["object"] = s.binds_vertex ? h.vertex_id(*s.object) : h.hyperedge_id(*s.object);
    else r["object"] = nullptr;
    if (s.role == SlotRole::kOverview) {
      r["hop"] = s.hop;
      r["bucket"] = s.bucket;
      r["empty"] = s.empty_cell;
    }
    slots.push_back(std::move(r));
  }
  j["slots"] = std::move(slots);
  j["details"] = task == Task::kDiagnostic ? std::string() : render_details(seq, h);
  emit(c.out, j.dump(2) + "\n");
  return 0;
}

int cmd_export_tokens(const Common& c, std::uint64_t center_id, const std::string& params_path) {
  const Task task = parse_task(c.task);
  const RunConfig cfg = task_config(c, task);
  if (c.out.empty()) fail_usage("export-tokens needs --out");
  const Hypergraph h = read_hgjl_file(c.in).graph;
  ExampleBuilder b(cfg, stub_provider(cfg));
  const HipParams<float> p = params_for(b, cfg, params_path);
  const Center center = parse_center(h, task, center_id);
  const HidtoSequence seq = b.sequence(h, center, cfg.seed);
  Example ex;
  ex.features = b.tokens(h, seq, nullptr).features;
  ex.pattern = seq.pattern();
  ex.detail_size = seq.detail_size;
  write_token_export_file(c.out, project_tokens(p, ex));
  return 0;
}

int cmd_project(const Common& c, const std::string& split, const std::string& params_path) {
  const Task task = parse_task(c.task);
  if (task == Task::kDiagnostic) fail_usage("project works on vc/hec datasets; use export-tokens for single centers");
  const RunConfig cfg = task_config(c, task);
  if (c.out.empty()) fail_usage("project needs --out (a directory)");
  const Dataset d = ingest(c.in);
  ExampleBuilder b(cfg, stub_provider(cfg));
  const HipParams<float> p = params_for(b, cfg, params_path);
  const LabeledSet set = task_examples(b, cfg, d, task, split_index(split));
  fs::create_directories(fs::path(c.out) / "tokens");
  std::ostringstream jsonl;
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    const std::string rel = "tokens/" + std::to_string(set.ids[i]) + ".hgtok";
    write_token_export_file((fs::path(c.out) / rel).string(), project_tokens(p, set.examples[i]));
    write_dialogue_jsonl(jsonl, set.examples[i].dialogue, rel);
  }
  emit((fs::path(c.out) / "dialogues.jsonl").string(), jsonl.str());
  return 0;
}

struct TrainData {
  RunConfig cfg;
  std::unique_ptr<ExampleBuilder> builder;
  std::vector<Example> examples;
  std::vector<MatchedPair> pairs;    // diagnostic only
  std::vector<std::uint64_t> ids;    // vc/hec only
};

TrainData load_examples(const Common& c, bool test_side, const std::string& split) {
  const Task task = parse_task(c.task);
  TrainData t;
  t.cfg = task_config(c, task);
  t.builder = std::make_unique<ExampleBuilder>(t.cfg, stub_provider(t.cfg));
  if (task == Task::kDiagnostic) {
    t.pairs = read_pairs(c.in, test_side);
    t.examples = diagnostic_examples(*t.builder, t.pairs);
  } else {
    const Dataset d = ingest(c.in);
    auto set = task_examples(*t.builder, t.cfg, d, task, split_index(split));
    t.ids = std::move(set.ids);
    t.examples = std::move(set.examples);
  }
  if (t.examples.empty()) fail_data("no examples in the selected split");
  return t;
}

int cmd_train(const Common& c, const std::string& log_path) {
  if (c.out.empty()) fail_usage("train needs --out (checkpoint path)");
  TrainData t = load_examples(c, false, "train");
  const TinyLm lm = make_frozen_lm(t.cfg);
  HipParams<float> p = HipParams<float>::init(t.builder->hip_config(), t.cfg.seed);
  TrainConfig tc = t.cfg.train;
  tc.seed = t.cfg.seed;
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::binary);
    if (!log) fail_data("cannot open " + log_path + " for writing");
  }
  LossReport last;
  train(lm, p, t.examples, tc, log_path.empty() ? nullptr : &log,
        [&](std::size_t, const LossReport& r) { last = r; });
  save_checkpoint(p, c.out);
  std::printf("trained %zu examples, %zu steps, final total %.6f, lm_hash %s\n", t.examples.size(),
              total_train_steps(t.examples.size(), tc), last.total, parameter_hash(lm).c_str());
  return 0;
}

int cmd_eval(const Common& c, const std::string& params_path, const std::string& split) {
  TrainData t = load_examples(c, split != "train", split);
  const TinyLm lm = make_frozen_lm(t.cfg);
  const HipParams<float> p = params_for(*t.builder, t.cfg, params_path);
  const EvalReport r = evaluate(lm, p, t.examples, t.cfg.train.max_new_tokens);
  std::ostringstream csv;
  if (!t.pairs.empty()) {
    csv << "pair_id,side,gold,prediction\n";
    std::vector<Answer> answers;
    for (std::size_t i = 0; i < r.predictions.size(); ++i) {
      const auto& pr = r.predictions[i];
      const Answer a = !pr.label ? Answer::kInvalid : (*pr.label == 0 ? Answer::kYes : Answer::kNo);
      answers.push_back(a);
      const MatchedPair& mp = t.pairs[i / 2];
      const DiagSample& s = i % 2 == 0 ? mp.a : mp.b;
      csv << mp.id << ',' << (i % 2 == 0 ? 'A' : 'B') << ',' << (s.yes ? "Yes" : "No") << ','
          << (a == Answer::kYes ? "Yes" : a == Answer::kNo ? "No" : "Invalid") << '\n';
    }
    const DiagMetrics m = diag_metrics(answers, t.pairs);
    std::printf("pairs %zu sample_acc %s pair_acc %s flip_rate %s invalid %zu\n", m.pairs, fmt2(m.sample_acc).c_str(),
                fmt2(m.pair_acc).c_str(), fmt2(m.flip_rate).c_str(), m.invalid);
  } else {
    csv << "id,gold,prediction,correct\n";
    for (std::size_t i = 0; i < r.predictions.size(); ++i) {
      const auto& pr = r.predictions[i];
      const auto& ex = t.examples[i];
      csv << t.ids[i] << ',' << ex.labels[ex.gold] << ',' << (pr.label ? ex.labels[*pr.label] : "Invalid") << ','
          << (pr.correct ? 1 : 0) << '\n';
    }
    std::printf("samples %zu accuracy %s invalid %zu\n", r.predictions.size(), fmt2(r.accuracy).c_str(), r.invalid);
  }
  if (!c.out.empty()) emit(c.out, csv.str());
  return 0;
}

int cmd_diag_generate(const Common& c, const std::string& preset, std::optional<std::size_t> train_pairs,
                      std::optional<std::size_t> test_pairs) {
  if (c.out.empty()) fail_usage("diag-generate needs --out");
  DiagConfig dc = DiagConfig::preset(preset);
  dc.seed = c.seed.value_or(c.config.empty() ? 0 : load_run_config(c.config).seed);
  if (train_pairs) dc.train_pairs = *train_pairs;
  if (test_pairs) dc.test_pairs = *test_pairs;
  const DiagDataset ds = gen_dataset(dc);
  std::ostringstream os;
  write_diag_jsonl(os, ds.train);
  write_diag_jsonl(os, ds.test);
  emit(c.out, os.str());
  std::printf("generated %zu train and %zu test pairs (%s)\n", ds.train.size(), ds.test.size(), dc.name.c_str());
  return 0;
}

int cmd_diag_verify(const Common& c) {
  const auto pairs = read_pairs(c.in, std::nullopt);
  std::size_t bad = 0;
  std::set<std::string> train_sigs;
  for (const auto& p : pairs)
    if (!p.test) train_sigs.insert(p.signature);
  for (const auto& p : pairs) {
    const auto r = verify_equivalence(p);
    if (!r.ok()) {
      ++bad;
      std::fprintf(stderr, "pair %llu: %s\n", static_cast<unsigned long long>(p.id), r.describe().c_str());
    }
    if (p.test && train_sigs.count(p.signature)) {
      ++bad;
      std::fprintf(stderr, "pair %llu: signature also appears in train\n", static_cast<unsigned long long>(p.id));
    }
  }
  std::printf("verified %zu pairs, %zu failures\n", pairs.size(), bad);
  if (bad) fail_data(std::to_string(bad) + " diagnostic pairs failed verification");
  return 0;
}

Answer parse_prediction(const std::string& s) {
  if (s == "Yes") return Answer::kYes;
  if (s == "No") return Answer::kNo;
  return Answer::kInvalid;
}

int cmd_diag_score(const Common& c, const std::string& predictions, const std::string& baseline,
                   const std::string& split) {
  const auto pairs = read_pairs(c.in, split == "all" ? std::nullopt : std::optional<bool>(split == "test"));
  DiagMetrics m;
  if (!baseline.empty()) {
    PairwisePredictor pred;
    if (baseline == "majority") pred = pairwise_majority_predictor;
    else if (baseline == "constant-no") pred = [](const PairMultiset&, VertexId, VertexId, VertexId) { return Answer::kNo; };
    else if (baseline == "constant-yes") pred = [](const PairMultiset&, VertexId, VertexId, VertexId) { return Answer::kYes; };
    else fail_usage("unknown baseline '" + baseline + "' (expected majority, constant-no or constant-yes)");
    m = clique_baseline(pairs, pred);
  } else {
    if (predictions.empty()) fail_usage("diag-score needs --predictions or --baseline");
    std::ifstream in(predictions);
    if (!in) fail_data("cannot open " + predictions);
    std::map<std::pair<std::uint64_t, char>, Answer> by_key;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string id, side, gold, pred;
      if (!std::getline(ss, id, ',') || !std::getline(ss, side, ',') || !std::getline(ss, gold, ',') ||
          !std::getline(ss, pred, ',') || side.size() != 1)
        fail_data("malformed record: prediction line '" + line + "'");
      by_key[{std::stoull(id), side[0]}] = parse_prediction(pred);
    }
    std::vector<Answer> answers;
    for (const auto& p : pairs)
      for (char side : {'A', 'B'}) {
        auto it = by_key.find({p.id, side});
        if (it == by_key.end()) fail_data("missing prediction for pair " + std::to_string(p.id) + side);
        answers.push_back(it->second);
      }
    m = diag_metrics(answers, pairs);
  }
  std::ostringstream csv;
  csv << "pairs,sample_acc,pair_acc,flip_rate,invalid\n"
      << m.pairs << ',' << fmt2(m.sample_acc) << ',' << fmt2(m.pair_acc) << ',' << fmt2(m.flip_rate) << ','
      << m.invalid << '\n';
  emit(c.out, csv.str());
  return 0;
}

int cmd_bench_stats(const Common& c) {
  const Dataset d = ingest(c.in);
  nlohmann::ordered_json j;
  j["manifest"] = manifest_to_json(d.manifest);
  j["stats"] = stats_to_json(stats(d.graph));
  emit(c.out, j.dump(2) + "\n");
  return 0;
}

int cmd_bench_ccdf(const Common& c, const std::string& of) {
  const Dataset d = ingest(c.in);
  std::vector<std::uint64_t> values;
  if (of == "degree") values = vertex_degrees(d.graph);
  else if (of == "order") values = hyperedge_orders(d.graph);
  else fail_usage("--of must be degree or order");
  std::vector<std::uint64_t> positive;
  for (auto v : values)
    if (v > 0) positive.push_back(v);
  std::ostringstream os;
  write_ccdf_csv(os, ccdf(positive));
  emit(c.out, os.str());
  return 0;
}

int fail_with(ErrorKind kind, const std::string& msg) {
  const char* name = kind == ErrorKind::kUsage ? "usage" : kind == ErrorKind::kData ? "data" : "numeric";
  nlohmann::ordered_json j;
  j["error"] = name;
  j["message"] = msg;
  std::cerr << j.dump() << '\n';
  return kind == ErrorKind::kUsage ? 2 : kind == ErrorKind::kData ? 3 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hgtok: hypergraph-to-token compiler and alignment toolkit"};
  app.require_subcommand(1);
  Common c;
  std::uint64_t center = 0;
  std::string params, log_path, split = "test", preset = "clean-d20", predictions, baseline, of = "degree";
  std::optional<std::size_t> train_pairs, test_pairs;

  auto common = [&](CLI::App* sub, bool needs_in = true) {
    sub->add_option("--config", c.config, "key=value run configuration");
    sub->add_option("--seed", c.seed, "seed for every random stream");
    auto* in = sub->add_option("--in", c.in, "input path");
    if (needs_in) in->required();
    sub->add_option("--out", c.out, "output path");
    sub->add_option("--task", c.task, "vc, hec or diag")->check(CLI::IsMember({"vc", "hec", "diag"}));
  };

  auto* serialize = app.add_subcommand("serialize", "HIDT-O slot table for one center (JSON)");
  common(serialize);
  serialize->add_option("--center", center, "center vertex or hyperedge id")->required();

  auto* project = app.add_subcommand("project", "token exports and dialogue JSONL for a dataset split");
  common(project);
  project->add_option("--params", params, "HIPCK1 checkpoint (default: seeded init)");
  project->add_option("--split", split, "train, valid or test");

  auto* trainc = app.add_subcommand("train", "projector-only training");
  common(trainc);
  trainc->add_option("--log", log_path, "training log CSV");

  auto* evalc = app.add_subcommand("eval", "greedy-decoding evaluation");
  common(evalc);
  evalc->add_option("--params", params, "HIPCK1 checkpoint")->required();
  evalc->add_option("--split", split, "train, valid or test");

  auto* dgen = app.add_subcommand("diag-generate", "matched-pair diagnostic dataset (JSONL)");
  common(dgen, false);
  dgen->add_option("--preset", preset, "clean-d20, adv-d50 or clean-d8");
  dgen->add_option("--train-pairs", train_pairs, "override the preset's train size");
  dgen->add_option("--test-pairs", test_pairs, "override the preset's test size");

  auto* dver = app.add_subcommand("diag-verify", "check every pair of a diagnostic dataset");
  common(dver);

  auto* dscore = app.add_subcommand("diag-score", "matched-pair metrics (CSV)");
  common(dscore);
  dscore->add_option("--predictions", predictions, "CSV pair_id,side,gold,prediction");
  dscore->add_option("--baseline", baseline, "majority, constant-no or constant-yes");
  dscore->add_option("--split", split, "train, test or all");

  auto* bstats = app.add_subcommand("bench-stats", "ingest a dataset directory and print statistics (JSON)");
  common(bstats);

  auto* bccdf = app.add_subcommand("bench-ccdf", "degree or order CCDF (CSV)");
  common(bccdf);
  bccdf->add_option("--of", of, "degree or order");

  auto* exportc = app.add_subcommand("export-tokens", "HGTOK1 token export for one center");
  common(exportc);
  exportc->add_option("--center", center, "center vertex or hyperedge id")->required();
  exportc->add_option("--params", params, "HIPCK1 checkpoint (default: seeded init)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail_with(ErrorKind::kUsage, e.what());
  }

  try {
    if (*serialize) return cmd_serialize(c, center);
    if (*project) return cmd_project(c, split, params);
    if (*trainc) return cmd_train(c, log_path);
    if (*evalc) return cmd_eval(c, params, split);
    if (*dgen) return cmd_diag_generate(c, preset, train_pairs, test_pairs);
    if (*dver) return cmd_diag_verify(c);
    if (*dscore) return cmd_diag_score(c, predictions, baseline, split);
    if (*bstats) return cmd_bench_stats(c);
    if (*bccdf) return cmd_bench_ccdf(c, of);
    if (*exportc) return cmd_export_tokens(c, center, params);
  } catch (const Error& e) {
    return fail_with(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail_with(ErrorKind::kData, e.what());
  }
  return 0;
}
