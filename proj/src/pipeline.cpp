#include "hgtok/pipeline.hpp"

#include "hgtok/error.hpp"
#include "hgtok/lm_pretrain.hpp"
#include "hgtok/parallel.hpp"
#include "hgtok/rng.hpp"

namespace hgtok {

std::vector<std::string> class_label_names(std::size_t num_classes) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < num_classes; ++k) out.push_back("class " + std::to_string(k));
  return out;
}

ExampleBuilder::ExampleBuilder(const RunConfig& cfg, SemanticProvider psi)
    : cfg_(cfg), tmpl_(Template::build(cfg.tmpl)), psi_(std::move(psi)) {
  if (psi_.dim() != cfg_.d_text)
    fail_usage("semantic provider dim " + std::to_string(psi_.dim()) + " != d_text " + std::to_string(cfg_.d_text));
  bucket_vectors_ = make_bucket_vectors(cfg_.tmpl.buckets.num_order_buckets(), cfg_.d_text, cfg_.seed);
}

HipConfig ExampleBuilder::hip_config() const { return cfg_.hip(cfg_.tmpl.struct_dim()); }

PropagationStates ExampleBuilder::propagation(const Hypergraph& h) const {
  return propagate(h, psi_, cfg_.tmpl.buckets, bucket_vectors_, cfg_.tmpl.overview_hops);
}

HidtoSequence ExampleBuilder::sequence(const Hypergraph& h, const Center& c, std::uint64_t sample_seed) const {
  return serialize(h, c, tmpl_, sample_seed);
}

EncapsulatedTokens ExampleBuilder::tokens(const Hypergraph& h, const HidtoSequence& seq,
                                          const PropagationStates* states) const {
  std::vector<OverviewCell> cells;
  if (cfg_.tmpl.with_overview) {
    PropagationStates local;
    if (!states) {
      local = propagation(h);
      states = &local;
    }
    cells = overview_aggregate(h, seq.center, cfg_.tmpl.overview_hops, cfg_.tmpl.buckets, *states);
  }
  return encapsulate(h, seq, tmpl_, psi_, cells);
}

Example ExampleBuilder::build(const Hypergraph& h, const Center& c, Task task, const std::vector<std::string>& labels,
                              std::size_t gold, std::uint64_t sample_seed, const PropagationStates* states) const {
  if (gold >= labels.size()) fail_data("gold label index out of range");
  Example ex;
  const HidtoSequence seq = sequence(h, c, sample_seed);
  ex.features = tokens(h, seq, states).features;
  ex.pattern = seq.pattern();
  ex.detail_size = seq.detail_size;
  ex.order_targets = order_targets(h, seq, cfg_.tmpl.buckets);
  ex.relations = sample_relation_pairs(seq, cfg_.train.k_rel, sample_seed);
  const PromptParts parts = build_prompt(task, labels, task == Task::kDiagnostic ? "" : render_details(seq, h));
  ex.dialogue = assemble(parts, tmpl_.size(), labels[gold], cfg_.context_limit);
  ex.prompt = assemble_prompt(parts, tmpl_.size(), cfg_.context_limit);
  ex.labels = labels;
  ex.gold = gold;
  return ex;
}

TinyLm make_frozen_lm(const RunConfig& cfg, std::ostream* log) {
  TinyLm lm = TinyLm::init(cfg.lm, cfg.seed);
  if (cfg.lm_pretrain_steps == 0) return lm;
  LmPretrainConfig pc;
  pc.steps = cfg.lm_pretrain_steps;
  return pretrain_lm(lm, pc, cfg.seed, log);
}

RunConfig diagnostic_run_config(RunConfig base) {
  base.tmpl.center_role = CenterRole::kVertex;
  base.tmpl.with_overview = false;
  base.validate();
  return base;
}

std::vector<Example> diagnostic_examples(const ExampleBuilder& builder, const std::vector<MatchedPair>& pairs) {
  std::vector<Example> out(2 * pairs.size());
  const std::vector<std::string> labels{"Yes", "No"};
  parallel_for(pairs.size(), [&](std::size_t i) {
    const MatchedPair& p = pairs[i];
    const std::uint64_t seed = derive_key(builder.seed(), {stream_tag::kSampling, p.id});
    std::size_t k = 0;
    for (const DiagSample* s : {&p.a, &p.b})
      out[2 * i + k++] = builder.build(s->graph, Center{CenterRole::kVertex, s->center}, Task::kDiagnostic, labels,
                                       s->yes ? 0 : 1, seed);
  });
  return out;
}

}  // namespace hgtok
