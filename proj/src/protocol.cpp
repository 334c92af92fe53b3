#include "hgtok/protocol.hpp"

#include <cctype>
#include <json.hpp>

#include "hgtok/error.hpp"
#include "hgtok/tiny_lm.hpp"

namespace hgtok {

Task parse_task(std::string_view s) {
  if (s == "vc") return Task::kVertexClassification;
  if (s == "hec") return Task::kHyperedgeClassification;
  if (s == "diag") return Task::kDiagnostic;
  fail_usage("unknown task '" + std::string(s) + "' (expected vc, hec or diag)");
}

const char* to_string(Task t) {
  switch (t) {
    case Task::kVertexClassification: return "vc";
    case Task::kHyperedgeClassification: return "hec";
    case Task::kDiagnostic: return "diag";
  }
  return "?";
}

std::string PromptParts::text() const {
  std::string s = background;
  if (!details.empty()) s += "\n" + details;
  s += "\n" + question + "\nAnswer: ";
  return s;
}

namespace {

std::string vertex_title(const Hypergraph& h, Index v) {
  const auto& rec = h.vertex(v);
  return rec.text ? *rec.text : "vertex " + std::to_string(rec.id);
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) s += ", ";
    s += labels[i];
  }
  return s;
}

}  // namespace

std::string render_details(const HidtoSequence& seq, const Hypergraph& h) {
  std::string out;
  for (std::size_t i = 0; i < seq.detail_size; ++i) {
    const HidtoSlot& s = seq.slots[i];
    if (s.layer > 1 || !s.is_hyperedge_like()) continue;
    const Index e = *s.object;
    std::vector<std::string> shown;
    if (s.parent && seq.slots[*s.parent].is_vertex_like()) shown.push_back(vertex_title(h, *seq.slots[*s.parent].object));
    for (std::size_t j = i + 1; j < seq.detail_size; ++j) {
      const HidtoSlot& c = seq.slots[j];
      if (c.parent == i && c.is_vertex_like()) shown.push_back(vertex_title(h, *c.object));
    }
    const std::size_t order = h.members(e).size();
    std::string line = "Hyperedge " + std::to_string(h.hyperedge_id(e)) + " (order " + std::to_string(order) +
                       ") connects: ";
    for (std::size_t k = 0; k < shown.size(); ++k) {
      if (k) line += ", ";
      line += shown[k];
    }
    if (shown.size() < order) line += " ... (+" + std::to_string(order - shown.size()) + " not shown)";
    if (!out.empty()) out += "\n";
    out += line + ".";
  }
  return out.empty() ? "No local context available." : out;
}

PromptParts build_prompt(Task task, const std::vector<std::string>& labels, std::string details) {
  PromptParts p;
  switch (task) {
    case Task::kVertexClassification:
      if (labels.empty()) fail_usage("vertex classification needs a nonempty label set");
      p.background = "Given a vertex-centered hypergraph: " + std::string(kPlaceholder) +
                     ", where each hyperedge groups the vertices cited together by one source. "
                     "Classify the center vertex.";
      p.details = std::move(details);
      p.question = "Question: Which category does the center vertex belong to? Candidates: " + join_labels(labels) +
                   ". Answer with exactly one category name.";
      p.labels = labels;
      break;
    case Task::kHyperedgeClassification:
      if (labels.empty()) fail_usage("hyperedge classification needs a nonempty label set");
      p.background = "Given a hyperedge-centered hypergraph: " + std::string(kPlaceholder) +
                     ", where the center hyperedge groups the vertices cited together by one source. "
                     "Classify the center hyperedge.";
      p.details = std::move(details);
      p.question = "Question: Which category does the center hyperedge belong to? Candidates: " +
                   join_labels(labels) + ". Answer with exactly one category name.";
      p.labels = labels;
      break;
    case Task::kDiagnostic:
      p.background = "Given a vertex-centered hypergraph: " + std::string(kPlaceholder) +
                     ", where hyperedges represent native high-order group memberships among vertices. The "
                     "hypergraph tokens mark one center vertex and two candidate vertices; no textual hyperedge list "
                     "is provided.";
      p.question =
          "Question: Do the center vertex and the two candidate vertices jointly occur in a single hyperedge? "
          "Directly answer Yes or No.";
      p.labels = {"Yes", "No"};
      break;
  }
  return p;
}

std::vector<int> encode_prompt(const std::string& text) {
  std::vector<int> ids{vocab::kBos};
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, kPlaceholder.size(), kPlaceholder) == 0) {
      ids.push_back(vocab::kHypergraph);
      i += kPlaceholder.size();
    } else {
      ids.push_back(static_cast<unsigned char>(text[i]));
      ++i;
    }
  }
  return ids;
}

std::vector<int> encode_answer(const std::string& answer) {
  std::vector<int> ids;
  for (unsigned char c : answer) ids.push_back(c);
  ids.push_back(vocab::kEos);
  return ids;
}

std::string decode_bytes(const std::vector<int>& ids) {
  std::string s;
  for (int id : ids)
    if (id >= 0 && id < 256) s.push_back(static_cast<char>(id));
  return s;
}

namespace {

DialogueSample splice(const PromptParts& parts, std::size_t region_length, std::size_t context_limit) {
  const std::string text = parts.text();
  const std::vector<int> prompt = encode_prompt(text);
  std::size_t where = prompt.size();
  std::size_t count = 0;
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    if (prompt[i] == vocab::kHypergraph) {
      if (count++ == 0) where = i;
    }
  }
  if (count == 0) fail_data("prompt has no <hypergraph> placeholder");
  if (count > 1) fail_data("prompt has more than one <hypergraph> placeholder");
  DialogueSample s;
  s.prompt = text;
  s.region_begin = where;
  s.region_length = region_length;
  s.ids.assign(prompt.begin(), prompt.begin() + static_cast<std::ptrdiff_t>(where));
  s.ids.insert(s.ids.end(), region_length, vocab::kPad);
  s.ids.insert(s.ids.end(), prompt.begin() + static_cast<std::ptrdiff_t>(where) + 1, prompt.end());
  s.answer_begin = s.ids.size();
  if (s.ids.size() > context_limit)
    fail_data("dialogue of " + std::to_string(s.ids.size()) + " tokens exceeds the context limit " +
              std::to_string(context_limit));
  return s;
}

}  // namespace

DialogueSample assemble(const PromptParts& parts, std::size_t region_length, const std::string& answer,
                        std::size_t context_limit) {
  if (answer.empty()) fail_data("empty answer");
  DialogueSample s = splice(parts, region_length, context_limit);
  s.answer = answer;
  const auto a = encode_answer(answer);
  s.ids.insert(s.ids.end(), a.begin(), a.end());
  if (s.ids.size() > context_limit)
    fail_data("dialogue of " + std::to_string(s.ids.size()) + " tokens exceeds the context limit " +
              std::to_string(context_limit));
  s.mask.assign(s.ids.size(), 0);
  for (std::size_t i = s.answer_begin; i < s.ids.size(); ++i) s.mask[i] = 1;
  return s;
}

DialogueSample assemble_prompt(const PromptParts& parts, std::size_t region_length, std::size_t context_limit) {
  DialogueSample s = splice(parts, region_length, context_limit);
  s.mask.assign(s.ids.size(), 0);
  return s;
}

void write_dialogue_jsonl(std::ostream& os, const DialogueSample& s, const std::string& token_export) {
  nlohmann::ordered_json j;
  j["prompt"] = s.prompt;
  j["hg_region_index"] = s.region_begin;
  j["answer"] = s.answer;
  j["L_H"] = s.region_length;
  if (!token_export.empty()) j["token_export"] = token_export;
  os << j.dump() << '\n';
}

std::optional<std::size_t> parse_answer(std::string_view text, const std::vector<std::string>& labels) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string& l = labels[i];
    if (l.empty() || text.substr(0, l.size()) != l) continue;
    const bool exact = text.size() == l.size();
    const bool boundary = !exact && !std::isalnum(static_cast<unsigned char>(text[l.size()]));
    if (!exact && !boundary) continue;
    if (!best || l.size() > labels[*best].size()) best = i;
  }
  return best;
}

}  // namespace hgtok
