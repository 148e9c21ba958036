// SPDX-License-Identifier: Apache-2.0
#include "gapfinder/synth.hpp"

#include <cctype>
#include <fstream>

#include "gapfinder/error.hpp"
#include "gapfinder/random.hpp"
#include "gapfinder/text.hpp"

namespace gapfinder {

void AugmentConfig::validate() const {
  for (double rate : {word_deletion_rate, synonym_replacement_rate, char_typo_rate}) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("augmentation rates must lie in [0, 1]");
  }
  if (variants_per_explanation < 1) throw ConfigError("variants_per_explanation must be at least 1");
}

Thesaurus Thesaurus::parse(std::istream& in, std::string_view source) {
  Thesaurus t;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(std::string(source) + ":" + std::to_string(line_number) + ": expected word<TAB>synonyms");
    }
    std::vector<std::string> synonyms;
    std::string_view rest = std::string_view(line).substr(tab + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto piece = text::trim(rest.substr(0, comma));
      if (!piece.empty()) synonyms.emplace_back(piece);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    t.add(text::to_lower(text::trim(std::string_view(line).substr(0, tab))), std::move(synonyms));
  }
  return t;
}

Thesaurus Thesaurus::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open thesaurus " + path.string());
  return parse(in, path.string());
}

Thesaurus Thesaurus::bundled() { return load(std::filesystem::path(GAPFINDER_DATA_DIR) / "thesaurus.tsv"); }

void Thesaurus::add(std::string word, std::vector<std::string> synonyms) {
  if (word.empty() || synonyms.empty()) return;
  entries_[std::move(word)] = std::move(synonyms);
}

const std::vector<std::string>* Thesaurus::lookup(std::string_view lowercase_word) const {
  const auto it = entries_.find(lowercase_word);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

using WordLists = std::vector<std::vector<std::string>>;

WordLists benchmark_words(const CodeExample& example) {
  WordLists out;
  for (const auto& sentence : example.expert_explanation) out.push_back(text::split_whitespace(sentence));
  return out;
}

std::string render_words(const WordLists& words) {
  std::vector<std::string> sentences;
  for (const auto& w : words) {
    if (!w.empty()) sentences.push_back(text::join(w, " "));
  }
  return text::join(sentences, " ");
}

bool has_terminal(std::string_view word) { return word.find_first_of(".!?") != std::string_view::npos; }

bool interior(const std::vector<std::string>& words, std::size_t i) {
  return i > 0 && i + 1 < words.size() && !has_terminal(words[i]);
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\''; }

struct Affixed {
  std::string_view prefix, core, suffix;
};

Affixed split_affixes(std::string_view word) {
  std::size_t a = 0;
  while (a < word.size() && !is_word_char(word[a])) ++a;
  std::size_t b = word.size();
  while (b > a && !is_word_char(word[b - 1])) --b;
  return {word.substr(0, a), word.substr(a, b - a), word.substr(b)};
}

std::string match_case(std::string synonym, std::string_view like) {
  if (text::starts_with_upper(like) && !synonym.empty()) {
    synonym[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(synonym[0])));
  }
  return synonym;
}

std::vector<std::size_t> typo_positions(std::string_view word) {
  std::vector<std::size_t> out;
  for (std::size_t j = 1; j + 1 < word.size(); ++j) {
    const auto c = static_cast<unsigned char>(word[j]);
    if (c < 0x80 && std::isalpha(c)) out.push_back(j);
  }
  return out;
}

void synonym_pass(WordLists& words, double rate, const Thesaurus& thesaurus, Pcg32& rng, std::vector<WordEdit>& edits) {
  for (std::size_t s = 0; s < words.size(); ++s) {
    for (std::size_t i = 0; i < words[s].size(); ++i) {
      if (!interior(words[s], i)) continue;
      const Affixed parts = split_affixes(words[s][i]);
      if (parts.core.empty()) continue;
      const auto* synonyms = thesaurus.lookup(text::to_lower(parts.core));
      if (synonyms == nullptr) continue;
      if (!(rng.uniform() < rate)) continue;
      const std::string& pick = (*synonyms)[rng.bounded(static_cast<std::uint32_t>(synonyms->size()))];
      std::string replacement = std::string(parts.prefix) + match_case(pick, parts.core) + std::string(parts.suffix);
      if (replacement == words[s][i]) continue;
      edits.push_back({WordEdit::Op::synonym, s, i, words[s][i], replacement});
      words[s][i] = std::move(replacement);
    }
  }
}

void deletion_pass(WordLists& words, double rate, Pcg32& rng, std::vector<WordEdit>& edits) {
  for (std::size_t s = 0; s < words.size(); ++s) {
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < words[s].size(); ++i) {
      if (!interior(words[s], i)) continue;
      if (rng.uniform() < rate) selected.push_back(i);
    }
    for (std::size_t k = 0; k < selected.size(); ++k) {
      const std::size_t at = selected[k] - k;
      edits.push_back({WordEdit::Op::deletion, s, at, words[s][at], ""});
      words[s].erase(words[s].begin() + static_cast<std::ptrdiff_t>(at));
    }
  }
}

void typo_pass(WordLists& words, double rate, Pcg32& rng, std::vector<WordEdit>& edits) {
  for (std::size_t s = 0; s < words.size(); ++s) {
    for (std::size_t i = 0; i < words[s].size(); ++i) {
      if (!interior(words[s], i)) continue;
      const auto positions = typo_positions(words[s][i]);
      if (positions.empty()) continue;
      if (!(rng.uniform() < rate)) continue;
      const std::size_t pos = positions[rng.bounded(static_cast<std::uint32_t>(positions.size()))];
      const char original = static_cast<char>(std::tolower(static_cast<unsigned char>(words[s][i][pos])));
      char letter = static_cast<char>('a' + rng.bounded(25));
      if (letter >= original) ++letter;
      std::string replacement = words[s][i];
      replacement[pos] = letter;
      edits.push_back({WordEdit::Op::typo, s, i, words[s][i], replacement});
      words[s][i] = std::move(replacement);
    }
  }
}

}  // namespace

std::string benchmark_text(const CodeExample& example) { return render_words(benchmark_words(example)); }

std::string render_gold_feedback(ResponseKind kind, const Provenance& payload) {
  switch (kind) {
    case ResponseKind::correct_variant:
      if (payload.mutation || !payload.removed_text.empty() || !payload.removed_sentences.empty()) {
        throw DataError("gold feedback: correct variant payload carries removed sentences or a mutation");
      }
      return std::string(kPositiveFeedback);
    case ResponseKind::incomplete:
      if (payload.mutation || payload.removed_text.size() != 2) {
        throw DataError("gold feedback: incomplete payload must carry exactly two removed sentences");
      }
      return "Your explanation is missing part of what the code does. The missing part is: " +
             payload.removed_text[0] + " " + payload.removed_text[1];
    case ResponseKind::incorrect: {
      if (!payload.mutation || !payload.removed_text.empty()) {
        throw DataError("gold feedback: incorrect payload must carry exactly one mutation");
      }
      const MutationRecord& m = *payload.mutation;
      return "Your explanation contains a misconception: " + m.misconception + ". Look again at \"" +
             m.original_fragment + "\" in the line \"" + m.context_excerpt + "\". You wrote \"" +
             m.rewritten_sentence + "\", but the code means \"" + m.original_sentence + "\"";
    }
  }
  throw DataError("gold feedback: unknown response kind");
}

std::vector<SimulatedResponse> gen_correct_variants(const CodeExample& example, const AugmentConfig& config,
                                                    const Thesaurus& thesaurus, std::optional<std::size_t> count,
                                                    std::size_t first_index) {
  config.validate();
  validate(example);
  const std::size_t n = count.value_or(config.variants_per_explanation);
  const bool no_noise =
      config.word_deletion_rate == 0.0 && config.synonym_replacement_rate == 0.0 && config.char_typo_rate == 0.0;
  if (no_noise && n > 1) {
    throw ConfigError("all augmentation rates are zero: more than one variant would duplicate the benchmark");
  }

  std::vector<SimulatedResponse> out;
  out.reserve(n);
  for (std::size_t v = first_index; v < first_index + n; ++v) {
    const std::string key = example.id + "#cv" + std::to_string(v);
    Pcg32 rng = Pcg32::for_key(config.seed, key);
    WordLists words = benchmark_words(example);
    Provenance p;
    p.generator = "synth.correct_variant";
    p.seed = config.seed;
    p.parameters = {{"word_deletion_rate", config.word_deletion_rate},
                    {"synonym_replacement_rate", config.synonym_replacement_rate},
                    {"char_typo_rate", config.char_typo_rate},
                    {"variant_index", static_cast<double>(v)}};
    if (config.synonym_replacement_rate > 0.0) {
      synonym_pass(words, config.synonym_replacement_rate, thesaurus, rng, p.edits);
    }
    if (config.word_deletion_rate > 0.0) deletion_pass(words, config.word_deletion_rate, rng, p.edits);
    if (config.char_typo_rate > 0.0) typo_pass(words, config.char_typo_rate, rng, p.edits);

    SimulatedResponse r;
    r.id = example.id + "/cv" + std::to_string(v);
    r.example_id = example.id;
    r.kind = ResponseKind::correct_variant;
    r.explanation_text = render_words(words);
    r.gold_feedback = render_gold_feedback(r.kind, p);
    r.provenance = std::move(p);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SimulatedResponse> gen_incomplete(const CodeExample& example) {
  validate(example);
  std::vector<std::string> sentences;
  for (const auto& s : example.expert_explanation) sentences.push_back(text::normalize_whitespace(s));
  const std::size_t n = sentences.size();
  if (n < 3) {
    log::warn("gen_incomplete: example " + example.id + " has " + std::to_string(n) +
              " sentence(s); need at least 3, skipped");
    return {};
  }
  std::vector<SimulatedResponse> out;
  out.reserve(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::vector<std::string> kept;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i && k != i + 1) kept.push_back(sentences[k]);
    }
    Provenance p;
    p.generator = "synth.incomplete";
    p.removed_sentences = {i + 1, i + 2};
    p.removed_text = {sentences[i], sentences[i + 1]};

    SimulatedResponse r;
    r.id = example.id + "/inc" + std::to_string(i + 1);
    r.example_id = example.id;
    r.kind = ResponseKind::incomplete;
    r.explanation_text = text::join(kept, " ");
    r.gold_feedback = render_gold_feedback(r.kind, p);
    r.provenance = std::move(p);
    out.push_back(std::move(r));
  }
  return out;
}

std::string reconstruct_explanation(const CodeExample& example, const SimulatedResponse& response) {
  WordLists words = benchmark_words(example);
  const Provenance& p = response.provenance;
  switch (response.kind) {
    case ResponseKind::correct_variant:
      for (const WordEdit& e : p.edits) {
        if (e.sentence >= words.size() || e.word >= words[e.sentence].size() ||
            words[e.sentence][e.word] != e.original) {
          throw DataError("response " + response.id + ": edit does not apply to the benchmark");
        }
        if (e.op == WordEdit::Op::deletion) {
          words[e.sentence].erase(words[e.sentence].begin() + static_cast<std::ptrdiff_t>(e.word));
        } else {
          words[e.sentence][e.word] = e.replacement;
        }
      }
      return render_words(words);
    case ResponseKind::incomplete: {
      if (p.removed_sentences.size() != 2) throw DataError("response " + response.id + ": bad removal record");
      WordLists kept;
      for (std::size_t k = 0; k < words.size(); ++k) {
        if (k + 1 != p.removed_sentences[0] && k + 1 != p.removed_sentences[1]) kept.push_back(words[k]);
      }
      return render_words(kept);
    }
    case ResponseKind::incorrect: {
      if (!p.mutation) throw DataError("response " + response.id + ": missing mutation record");
      const MutationRecord& m = *p.mutation;
      if (m.sentence_index >= words.size() || text::join(words[m.sentence_index], " ") != m.original_sentence) {
        throw DataError("response " + response.id + ": mutation sentence does not match the benchmark");
      }
      words[m.sentence_index] = text::split_whitespace(m.rewritten_sentence);
      return render_words(words);
    }
  }
  throw DataError("unknown response kind");
}

}  // namespace gapfinder
