// SPDX-License-Identifier: Apache-2.0
#include "gapfinder/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gapfinder/apportion.hpp"
#include "gapfinder/error.hpp"
#include "gapfinder/random.hpp"
#include "gapfinder/text.hpp"

namespace gapfinder {

std::string_view to_string(Language lang) noexcept {
  return lang == Language::java ? "java" : "python";
}

std::string_view to_string(ResponseKind kind) noexcept {
  switch (kind) {
    case ResponseKind::correct_variant:
      return "correct_variant";
    case ResponseKind::incomplete:
      return "incomplete";
    case ResponseKind::incorrect:
      return "incorrect";
  }
  return "?";
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train:
      return "train";
    case Split::test:
      return "test";
    case Split::validation:
      return "validation";
  }
  return "?";
}

Language parse_language(std::string_view s) {
  if (s == "java") return Language::java;
  if (s == "python") return Language::python;
  throw DataError("unknown language \"" + std::string(s) + "\"");
}

ResponseKind parse_response_kind(std::string_view s) {
  if (s == "correct_variant") return ResponseKind::correct_variant;
  if (s == "incomplete") return ResponseKind::incomplete;
  if (s == "incorrect") return ResponseKind::incorrect;
  throw DataError("unknown response kind \"" + std::string(s) + "\"");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "validation") return Split::validation;
  throw DataError("unknown split \"" + std::string(s) + "\"");
}

void validate(const CodeExample& example) {
  if (example.id.empty()) throw DataError("code example with empty id");
  if (example.source_text.empty()) throw DataError("code example " + example.id + ": empty source_text");
  if (example.expert_explanation.empty()) {
    throw DataError("code example " + example.id + ": expert_explanation has no sentences");
  }
  for (const auto& sentence : example.expert_explanation) {
    if (text::trim(sentence).empty()) throw DataError("code example " + example.id + ": empty explanation sentence");
  }
}

void validate(const SimulatedResponse& response) {
  const std::string ctx = "response " + response.id;
  if (response.id.empty()) throw DataError("response with empty id");
  if (response.gold_feedback.empty()) throw DataError(ctx + ": empty gold_feedback");
  const Provenance& p = response.provenance;
  switch (response.kind) {
    case ResponseKind::incomplete:
      if (p.removed_sentences.size() != 2 || p.removed_sentences[1] != p.removed_sentences[0] + 1) {
        throw DataError(ctx + ": incomplete response must record two consecutive removed sentences");
      }
      if (p.mutation) throw DataError(ctx + ": incomplete response carries a mutation");
      break;
    case ResponseKind::incorrect:
      if (!p.mutation || p.mutation->operator_id.empty()) {
        throw DataError(ctx + ": incorrect response must record one mutation operator and site");
      }
      if (!p.removed_sentences.empty()) throw DataError(ctx + ": incorrect response records removed sentences");
      break;
    case ResponseKind::correct_variant:
      if (p.mutation || !p.removed_sentences.empty()) {
        throw DataError(ctx + ": correct variant carries incomplete/incorrect provenance");
      }
      break;
  }
}

namespace {

std::string_view edit_op_name(WordEdit::Op op) {
  switch (op) {
    case WordEdit::Op::synonym:
      return "synonym";
    case WordEdit::Op::deletion:
      return "deletion";
    case WordEdit::Op::typo:
      return "typo";
  }
  return "?";
}

WordEdit::Op parse_edit_op(std::string_view s) {
  if (s == "synonym") return WordEdit::Op::synonym;
  if (s == "deletion") return WordEdit::Op::deletion;
  if (s == "typo") return WordEdit::Op::typo;
  throw DataError("unknown edit op \"" + std::string(s) + "\"");
}

json mutation_to_json(const MutationRecord& m) {
  return json{{"operator_id", m.operator_id},
              {"misconception_tag", m.misconception_tag},
              {"misconception", m.misconception},
              {"token_index", m.token_index},
              {"byte_start", m.byte_start},
              {"byte_end", m.byte_end},
              {"original_fragment", m.original_fragment},
              {"replacement_fragment", m.replacement_fragment},
              {"context_excerpt", m.context_excerpt},
              {"sentence_index", m.sentence_index},
              {"original_sentence", m.original_sentence},
              {"rewritten_sentence", m.rewritten_sentence},
              {"mutated_code", m.mutated_code}};
}

MutationRecord mutation_from_json(const json& j) {
  io::check_fields(j,
                   {"operator_id", "misconception_tag", "misconception", "token_index", "byte_start", "byte_end",
                    "original_fragment", "replacement_fragment", "context_excerpt", "sentence_index",
                    "original_sentence", "rewritten_sentence", "mutated_code"},
                   {"operator_id", "token_index", "byte_start", "byte_end", "original_fragment",
                    "replacement_fragment", "sentence_index", "original_sentence", "rewritten_sentence"},
                   "mutation");
  MutationRecord m;
  m.operator_id = j.at("operator_id").get<std::string>();
  m.misconception_tag = j.value("misconception_tag", "");
  m.misconception = j.value("misconception", "");
  m.token_index = j.at("token_index").get<std::size_t>();
  m.byte_start = j.at("byte_start").get<std::size_t>();
  m.byte_end = j.at("byte_end").get<std::size_t>();
  m.original_fragment = j.at("original_fragment").get<std::string>();
  m.replacement_fragment = j.at("replacement_fragment").get<std::string>();
  m.context_excerpt = j.value("context_excerpt", "");
  m.sentence_index = j.at("sentence_index").get<std::size_t>();
  m.original_sentence = j.at("original_sentence").get<std::string>();
  m.rewritten_sentence = j.at("rewritten_sentence").get<std::string>();
  m.mutated_code = j.value("mutated_code", "");
  return m;
}

json provenance_to_json(const Provenance& p) {
  json edits = json::array();
  for (const auto& e : p.edits) {
    edits.push_back({{"op", edit_op_name(e.op)},
                     {"sentence", e.sentence},
                     {"word", e.word},
                     {"original", e.original},
                     {"replacement", e.replacement}});
  }
  json out{{"generator", p.generator},
           {"seed", p.seed},
           {"parameters", p.parameters},
           {"edits", edits},
           {"removed_sentences", p.removed_sentences},
           {"removed_text", p.removed_text}};
  out["mutation"] = p.mutation ? mutation_to_json(*p.mutation) : json(nullptr);
  return out;
}

Provenance provenance_from_json(const json& j) {
  io::check_fields(j, {"generator", "seed", "parameters", "edits", "removed_sentences", "removed_text", "mutation"},
                   {"generator"}, "provenance");
  Provenance p;
  p.generator = j.at("generator").get<std::string>();
  p.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("parameters")) p.parameters = j.at("parameters").get<std::map<std::string, double>>();
  if (j.contains("edits")) {
    for (const auto& e : j.at("edits")) {
      io::check_fields(e, {"op", "sentence", "word", "original", "replacement"}, {"op", "sentence", "word", "original"},
                       "edit");
      p.edits.push_back(WordEdit{parse_edit_op(e.at("op").get<std::string>()), e.at("sentence").get<std::size_t>(),
                                 e.at("word").get<std::size_t>(), e.at("original").get<std::string>(),
                                 e.value("replacement", "")});
    }
  }
  if (j.contains("removed_sentences")) p.removed_sentences = j.at("removed_sentences").get<std::vector<std::size_t>>();
  if (j.contains("removed_text")) p.removed_text = j.at("removed_text").get<std::vector<std::string>>();
  if (j.contains("mutation") && !j.at("mutation").is_null()) p.mutation = mutation_from_json(j.at("mutation"));
  return p;
}

}  // namespace

json to_json(const CodeExample& e) {
  return json{{"id", e.id},
              {"language", to_string(e.language)},
              {"source_text", e.source_text},
              {"concepts", e.concepts},
              {"expert_explanation", e.expert_explanation}};
}

json to_json(const SimulatedResponse& r) {
  return json{{"id", r.id},
              {"example_id", r.example_id},
              {"kind", to_string(r.kind)},
              {"explanation_text", r.explanation_text},
              {"gold_feedback", r.gold_feedback},
              {"provenance", provenance_to_json(r.provenance)}};
}

json to_json(const SplitAssignment& a) { return json{{"response_id", a.response_id}, {"split", to_string(a.split)}}; }

CodeExample code_example_from_json(const json& j) {
  io::check_fields(j, {"id", "language", "source_text", "concepts", "expert_explanation"},
                   {"id", "language", "source_text", "expert_explanation"}, "code example");
  CodeExample e;
  e.id = j.at("id").get<std::string>();
  e.language = parse_language(j.at("language").get<std::string>());
  e.source_text = j.at("source_text").get<std::string>();
  if (j.contains("concepts")) e.concepts = j.at("concepts").get<std::vector<std::string>>();
  e.expert_explanation = j.at("expert_explanation").get<std::vector<std::string>>();
  validate(e);
  return e;
}

SimulatedResponse response_from_json(const json& j) {
  io::check_fields(j, {"id", "example_id", "kind", "explanation_text", "gold_feedback", "provenance"},
                   {"id", "example_id", "kind", "explanation_text", "gold_feedback", "provenance"}, "response");
  SimulatedResponse r;
  r.id = j.at("id").get<std::string>();
  r.example_id = j.at("example_id").get<std::string>();
  r.kind = parse_response_kind(j.at("kind").get<std::string>());
  r.explanation_text = j.at("explanation_text").get<std::string>();
  r.gold_feedback = j.at("gold_feedback").get<std::string>();
  r.provenance = provenance_from_json(j.at("provenance"));
  validate(r);
  return r;
}

SplitAssignment split_from_json(const json& j) {
  io::check_fields(j, {"response_id", "split"}, {"response_id", "split"}, "split assignment");
  return SplitAssignment{j.at("response_id").get<std::string>(), parse_split(j.at("split").get<std::string>())};
}

std::vector<CodeExample> parse_corpus(std::istream& in, std::string_view source) {
  std::vector<CodeExample> out;
  std::set<std::string> seen;
  io::for_each_record(in, source, [&](std::size_t, const json& record) {
    CodeExample e = code_example_from_json(record);
    if (!seen.insert(e.id).second) throw DataError("duplicate code example id \"" + e.id + "\"");
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<CodeExample> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return parse_corpus(in, path.string());
}

namespace {

template <typename Range>
std::string serialize_lines(const Range& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

}  // namespace

void save_corpus(const std::filesystem::path& path, std::span<const CodeExample> examples) {
  io::write_file_atomic(path, serialize_lines(examples));
}

std::vector<SimulatedResponse> parse_responses(std::istream& in, std::string_view source) {
  std::vector<SimulatedResponse> out;
  std::set<std::string> seen;
  io::for_each_record(in, source, [&](std::size_t, const json& record) {
    SimulatedResponse r = response_from_json(record);
    if (!seen.insert(r.id).second) throw DataError("duplicate response id \"" + r.id + "\"");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<SimulatedResponse> load_responses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open responses " + path.string());
  return parse_responses(in, path.string());
}

std::string serialize_responses(std::span<const SimulatedResponse> responses) { return serialize_lines(responses); }

void save_responses(const std::filesystem::path& path, std::span<const SimulatedResponse> responses) {
  io::write_file_atomic(path, serialize_lines(responses));
}

std::vector<SplitAssignment> load_splits(const std::filesystem::path& path) {
  std::vector<SplitAssignment> out;
  io::for_each_record(path, [&](std::size_t, const json& record) { out.push_back(split_from_json(record)); });
  return out;
}

void save_splits(const std::filesystem::path& path, std::span<const SplitAssignment> splits) {
  io::write_file_atomic(path, serialize_lines(splits));
}

namespace {

constexpr std::array<std::string_view, 10> kAbbreviations = {"e.g.", "i.e.", "etc.", "vs.", "cf.",
                                                             "mr.",  "mrs.", "dr.",  "fig.", "approx."};

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// Last whitespace-delimited word ending at `end` (exclusive).
std::string_view word_before(std::string_view s, std::size_t end) {
  std::size_t start = end;
  while (start > 0 && !text::is_space(s[start - 1])) --start;
  return s.substr(start, end - start);
}

}  // namespace

std::vector<std::string> segment_sentences(std::string_view input) {
  const std::string s = text::normalize_whitespace(input);
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_terminal(s[i])) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < s.size() && (is_terminal(s[end]) || is_closer(s[end]))) ++end;
    bool boundary = false;
    if (end == s.size()) {
      boundary = true;
    } else if (s[end] == ' ' && end + 1 < s.size() && std::isupper(static_cast<unsigned char>(s[end + 1]))) {
      boundary = true;
    }
    if (boundary) {
      const std::string lowered = text::to_lower(word_before(s, i + 1));
      if (std::find(kAbbreviations.begin(), kAbbreviations.end(), lowered) != kAbbreviations.end() &&
          end != s.size()) {
        boundary = false;
      }
    }
    if (boundary) {
      const std::string_view sentence = text::trim(std::string_view(s).substr(start, end - start));
      if (!sentence.empty()) out.emplace_back(sentence);
      start = end;
    }
    i = end;
  }
  const std::string_view tail = text::trim(std::string_view(s).substr(start));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

std::map<std::string, const CodeExample*> index_by_id(std::span<const CodeExample> examples) {
  std::map<std::string, const CodeExample*> out;
  for (const auto& e : examples) {
    if (!out.emplace(e.id, &e).second) throw DataError("duplicate code example id \"" + e.id + "\"");
  }
  return out;
}

std::vector<SplitAssignment> split_dataset(std::span<const SimulatedResponse> responses,
                                           std::span<const CodeExample> examples, SplitRatios ratios,
                                           std::uint64_t seed, bool stratify) {
  if (responses.empty()) throw ConfigError("split_dataset: no responses to split");
  const std::array<double, 3> weights{ratios.train, ratios.test, ratios.validation};
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw ConfigError("split ratios must be non-negative");
  }
  if (std::abs(ratios.train + ratios.test + ratios.validation - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }

  const auto by_id = index_by_id(examples);
  std::vector<std::string> stratum_keys;
  std::vector<std::vector<std::size_t>> members;
  std::map<std::string, std::size_t> stratum_index;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    std::string key = "all";
    if (stratify) {
      const auto it = by_id.find(responses[i].example_id);
      if (it == by_id.end()) {
        throw DataError("response " + responses[i].id + " references unknown example " + responses[i].example_id);
      }
      key = std::string(to_string(it->second->language)) + "/" + std::string(to_string(responses[i].kind));
    }
    auto [pos, inserted] = stratum_index.emplace(key, stratum_keys.size());
    if (inserted) {
      stratum_keys.push_back(key);
      members.emplace_back();
    }
    members[pos->second].push_back(i);
  }

  std::vector<std::size_t> sizes;
  for (const auto& m : members) sizes.push_back(m.size());
  const auto table = apportion_table(sizes, weights);

  constexpr std::array<Split, 3> kOrder{Split::train, Split::test, Split::validation};
  std::vector<SplitAssignment> out(responses.size());
  for (std::size_t s = 0; s < members.size(); ++s) {
    std::vector<std::size_t> order = members[s];
    Pcg32 rng = Pcg32::for_key(seed, "split/" + stratum_keys[s]);
    shuffle(std::span<std::size_t>(order), rng);
    std::size_t cursor = 0;
    for (std::size_t c = 0; c < kOrder.size(); ++c) {
      for (std::size_t k = 0; k < table[s][c]; ++k, ++cursor) {
        out[order[cursor]] = SplitAssignment{responses[order[cursor]].id, kOrder[c]};
      }
    }
  }
  return out;
}

}  // namespace gapfinder
