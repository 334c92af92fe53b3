#pragma once

// Prompt construction (background with a <hypergraph> placeholder, optional
// rendered details, question), splicing of the hypergraph-token region, and
// supervision masks over byte-level token ids.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hgtok/hidto.hpp"
#include "hgtok/hypergraph.hpp"

namespace hgtok {

inline constexpr std::string_view kPlaceholder = "<hypergraph>";

enum class Task : std::uint8_t { kVertexClassification, kHyperedgeClassification, kDiagnostic };
Task parse_task(std::string_view s);  // "vc", "hec", "diag"
const char* to_string(Task t);

struct PromptParts {
  std::string background;  // exactly one placeholder
  std::string details;     // may be empty
  std::string question;
  std::vector<std::string> labels;

  // background, details (when present) and question joined by newlines,
  // followed by the answer cue.
  std::string text() const;
};

// One line per real hyperedge slot at layer <= 1: its parent vertex (if any)
// followed by its sampled member slots. A trailing marker counts members
// that were not sampled.
std::string render_details(const HidtoSequence& seq, const Hypergraph& h);

// Diagnostic prompts never carry details.
PromptParts build_prompt(Task task, const std::vector<std::string>& labels, std::string details = {});

// Byte tokenizer: BOS then UTF-8 bytes, with the placeholder as a single token.
std::vector<int> encode_prompt(const std::string& text);
std::vector<int> encode_answer(const std::string& answer);  // bytes then EOS
std::string decode_bytes(const std::vector<int>& ids);       // drops specials

struct DialogueSample {
  std::vector<int> ids;          // text ids; region positions hold vocab::kPad
  std::size_t region_begin = 0;  // first hypergraph-token position
  std::size_t region_length = 0;
  std::size_t answer_begin = 0;  // first answer position
  std::vector<std::uint8_t> mask;  // 1 only on answer positions
  std::string prompt;
  std::string answer;

  std::size_t answer_length() const { return ids.size() - answer_begin; }
};

// Replaces the placeholder token with region_length positions and appends the
// answer. Length = prompt tokens - 1 + region_length + answer tokens.
DialogueSample assemble(const PromptParts& parts, std::size_t region_length, const std::string& answer,
                        std::size_t context_limit);

// Prompt-only variant for decoding (no answer, no mask).
DialogueSample assemble_prompt(const PromptParts& parts, std::size_t region_length, std::size_t context_limit);

// JSON Lines record: prompt, hg_region_index, answer, L_H and an optional
// token-export path.
void write_dialogue_jsonl(std::ostream& os, const DialogueSample& s, const std::string& token_export = {});

// Label matching: exact match after trimming, or a label followed by a
// non-alphanumeric character. Longest matching label wins.
std::optional<std::size_t> parse_answer(std::string_view text, const std::vector<std::string>& labels);

}  // namespace hgtok
