// SPDX-License-Identifier: Apache-2.0
#include "gapfinder/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "gapfinder/rater.hpp"

namespace gapfinder::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Generation

json to_json(const GenerationSummary& s) {
  json counts = json::object();
  for (const auto& [lang, kinds] : s.counts) {
    for (const auto& [kind, n] : kinds) counts[lang][kind] = n;
  }
  return json{{"counts", counts}, {"total", s.total}, {"rejected_sites", s.rejected_sites}};
}

std::string render_summary(const GenerationSummary& s) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "language" << std::right << std::setw(18) << "correct_variant"
      << std::setw(12) << "incomplete" << std::setw(11) << "incorrect" << std::setw(8) << "total" << "\n";
  for (const char* lang : {"java", "python"}) {
    const auto it = s.counts.find(lang);
    std::size_t cv = 0, inc = 0, bad = 0;
    if (it != s.counts.end()) {
      auto get = [&](const char* k) {
        const auto j = it->second.find(k);
        return j == it->second.end() ? std::size_t{0} : j->second;
      };
      cv = get("correct_variant");
      inc = get("incomplete");
      bad = get("incorrect");
    }
    out << std::left << std::setw(10) << lang << std::right << std::setw(18) << cv << std::setw(12) << inc
        << std::setw(11) << bad << std::setw(8) << cv + inc + bad << "\n";
  }
  out << "total responses: " << s.total << " (rejected mutation sites: " << s.rejected_sites << ")\n";
  return out.str();
}

namespace {

// floor(total / n) each, the first total % n examples one more.
std::vector<std::size_t> spread(std::size_t total, std::size_t n) {
  std::vector<std::size_t> out(n, n == 0 ? 0 : total / n);
  for (std::size_t i = 0; n > 0 && i < total % n; ++i) ++out[i];
  return out;
}

}  // namespace

GenerationResult generate(std::span<const CodeExample> examples, const GenerationConfig& config,
                          const Thesaurus& thesaurus) {
  config.augment.validate();
  GenerationResult result;

  // Successful mutants per example, in pick order.
  std::vector<std::vector<Mutant>> candidates(examples.size());
  for (std::size_t e = 0; e < examples.size(); ++e) {
    const CodeExample& ex = examples[e];
    validate(ex);
    std::vector<Token> tokens;
    try {
      tokens = lex(ex.source_text, ex.language);
    } catch (const LexError& err) {
      throw DataError("example " + ex.id + ": " + err.what());
    }
    std::vector<Mutant> ok;
    for (const auto& site : find_sites(tokens, ex.language, builtin_operators())) {
      auto outcome = apply_mutation(ex, site);
      if (outcome) {
        ok.push_back(std::move(*outcome.mutant));
      } else {
        result.rejections.push_back({ex.id, site.operator_id, site.token_index, outcome.diagnostic});
      }
    }
    std::vector<Mutant> first, rest;
    std::set<std::string> seen_ops;
    for (auto& m : ok) {
      const std::string& op = m.response.provenance.mutation->operator_id;
      (seen_ops.insert(op).second ? first : rest).push_back(std::move(m));
    }
    first.insert(first.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
    candidates[e] = std::move(first);
  }

  std::vector<std::size_t> variant_count(examples.size(), config.augment.variants_per_explanation);
  std::vector<std::size_t> mutant_count(examples.size(), config.mutants_per_example);
  for (const Language lang : {Language::java, Language::python}) {
    const std::string name(to_string(lang));
    std::vector<std::size_t> members;
    for (std::size_t e = 0; e < examples.size(); ++e) {
      if (examples[e].language == lang) members.push_back(e);
    }
    if (const auto it = config.variants_total.find(name); it != config.variants_total.end()) {
      const auto share = spread(it->second, members.size());
      for (std::size_t i = 0; i < members.size(); ++i) variant_count[members[i]] = share[i];
      if (members.empty() && it->second > 0) log::warn("variants_total for " + name + " but no " + name + " examples");
    }
    std::vector<std::size_t> target(members.size());
    if (const auto it = config.mutants_total.find(name); it != config.mutants_total.end()) {
      target = spread(it->second, members.size());
    } else {
      for (std::size_t i = 0; i < members.size(); ++i) target[i] = config.mutants_per_example;
    }
    std::size_t deficit = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const std::size_t avail = candidates[members[i]].size();
      mutant_count[members[i]] = std::min(target[i], avail);
      deficit += target[i] - mutant_count[members[i]];
    }
    if (config.mutants_total.count(name) > 0) {
      for (std::size_t i = 0; i < members.size() && deficit > 0; ++i) {
        const std::size_t spare = candidates[members[i]].size() - mutant_count[members[i]];
        const std::size_t add = std::min(spare, deficit);
        mutant_count[members[i]] += add;
        deficit -= add;
      }
    }
    if (deficit > 0) {
      log::warn(std::to_string(deficit) + " " + name + " mutant(s) short of the requested count: not enough valid sites");
    }
  }

  for (std::size_t e = 0; e < examples.size(); ++e) {
    const CodeExample& ex = examples[e];
    try {
      for (auto& r : gen_correct_variants(ex, config.augment, thesaurus, variant_count[e])) {
        result.responses.push_back(std::move(r));
      }
      for (auto& r : gen_incomplete(ex)) result.responses.push_back(std::move(r));
    } catch (const Error& err) {
      if (err.error_class() == ErrorClass::config) throw;
      throw DataError("example " + ex.id + ": " + err.what());
    }
    std::vector<Mutant> chosen(std::make_move_iterator(candidates[e].begin()),
                               std::make_move_iterator(candidates[e].begin() + static_cast<std::ptrdiff_t>(mutant_count[e])));
    std::stable_sort(chosen.begin(), chosen.end(), [](const Mutant& a, const Mutant& b) {
      return a.response.provenance.mutation->token_index < b.response.provenance.mutation->token_index;
    });
    for (auto& m : chosen) result.responses.push_back(std::move(m.response));
  }

  const auto by_id = index_by_id(examples);
  for (const auto& r : result.responses) {
    ++result.summary.counts[std::string(to_string(by_id.at(r.example_id)->language))][std::string(to_string(r.kind))];
  }
  result.summary.total = result.responses.size();
  result.summary.rejected_sites = result.rejections.size();
  return result;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

void strict(const json& r, std::initializer_list<std::string_view> allowed,
            std::initializer_list<std::string_view> required, std::string_view context) {
  if (!r.is_object()) throw ConfigError(std::string(context) + " must be an object");
  try {
    io::check_fields(r, allowed, required, context);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::map<std::string, std::size_t> per_language(const json& r, std::string_view context) {
  strict(r, {"java", "python"}, {}, context);
  std::map<std::string, std::size_t> out;
  for (const auto& [k, v] : r.items()) out[k] = v.get<std::size_t>();
  return out;
}

}  // namespace

RunConfig config_from_json(const json& r, const fs::path& base) {
  strict(r,
         {"corpus", "run_dir", "thesaurus", "seed", "generation", "split", "providers", "fewshot_exemplar_ids",
          "metrics", "orpo", "rater"},
         {"corpus", "run_dir"}, "run config");
  RunConfig c;
  try {
    c.corpus = resolve(base, r.at("corpus").get<std::string>());
    c.run_dir = resolve(base, r.at("run_dir").get<std::string>());
    if (r.contains("thesaurus")) c.thesaurus = resolve(base, r.at("thesaurus").get<std::string>());
    c.seed = r.value("seed", std::uint64_t{0});
    if (r.contains("generation")) {
      const json& g = r.at("generation");
      strict(g,
             {"word_deletion_rate", "synonym_replacement_rate", "char_typo_rate", "variants_per_explanation",
              "mutants_per_example", "variants_total", "mutants_total"},
             {}, "generation");
      auto& a = c.generation.augment;
      a.word_deletion_rate = g.value("word_deletion_rate", a.word_deletion_rate);
      a.synonym_replacement_rate = g.value("synonym_replacement_rate", a.synonym_replacement_rate);
      a.char_typo_rate = g.value("char_typo_rate", a.char_typo_rate);
      a.variants_per_explanation = g.value("variants_per_explanation", a.variants_per_explanation);
      c.generation.mutants_per_example = g.value("mutants_per_example", c.generation.mutants_per_example);
      if (g.contains("variants_total")) c.generation.variants_total = per_language(g.at("variants_total"), "variants_total");
      if (g.contains("mutants_total")) c.generation.mutants_total = per_language(g.at("mutants_total"), "mutants_total");
    }
    c.generation.augment.seed = c.seed;
    if (r.contains("split")) {
      const json& s = r.at("split");
      strict(s, {"train", "test", "validation", "stratify"}, {}, "split");
      c.split.train = s.value("train", c.split.train);
      c.split.test = s.value("test", c.split.test);
      c.split.validation = s.value("validation", c.split.validation);
      c.stratify = s.value("stratify", c.stratify);
    }
    if (r.contains("providers")) {
      for (const auto& p : r.at("providers")) c.providers.push_back(llm::provider_config_from_json(p));
    }
    if (r.contains("fewshot_exemplar_ids")) {
      c.fewshot_exemplar_ids = r.at("fewshot_exemplar_ids").get<std::vector<std::string>>();
    }
    if (r.contains("metrics")) {
      const json& m = r.at("metrics");
      strict(m, {"embedding", "dimensions", "http"}, {}, "metrics");
      c.embedding.kind = m.value("embedding", c.embedding.kind);
      c.embedding.dimensions = m.value("dimensions", c.embedding.dimensions);
      if (m.contains("http")) {
        const json& h = m.at("http");
        strict(h, {"sentence_url", "sentence_model", "token_url", "token_model", "auth_token_env", "request_timeout_seconds"},
               {"sentence_url", "token_url"}, "metrics.http");
        c.embedding.http.sentence_url = h.at("sentence_url").get<std::string>();
        c.embedding.http.token_url = h.at("token_url").get<std::string>();
        c.embedding.http.sentence_model = h.value("sentence_model", std::string());
        c.embedding.http.token_model = h.value("token_model", std::string());
        c.embedding.http.auth_token_env = h.value("auth_token_env", std::string());
        c.embedding.http.request_timeout_seconds = h.value("request_timeout_seconds", 60.0);
      }
    }
    if (r.contains("orpo")) c.orpo = orpo::orpo_config_from_json(r.at("orpo"));
    if (r.contains("rater")) {
      const json& rt = r.at("rater");
      strict(rt, {"sample_size", "blind"}, {}, "rater");
      c.rater.sample_size = rt.value("sample_size", c.rater.sample_size);
      c.rater.blind = rt.value("blind", c.rater.blind);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::string content;
  try {
    content = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  json r;
  try {
    r = json::parse(content);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(r, fs::absolute(path).parent_path());
}

void RunConfig::validate() const {
  std::error_code ec;
  if (!fs::exists(corpus, ec)) throw ConfigError("corpus file " + corpus.string() + " does not exist");
  if (thesaurus && !fs::exists(*thesaurus, ec)) throw ConfigError("thesaurus " + thesaurus->string() + " does not exist");
  generation.augment.validate();
  const double sum = split.train + split.test + split.validation;
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  std::set<std::string> models;
  for (const auto& p : providers) {
    p.validate();
    if (!models.insert(p.model_name).second) throw ConfigError("duplicate provider model name \"" + p.model_name + "\"");
  }
  if (embedding.kind != "hash" && embedding.kind != "none" && embedding.kind != "http") {
    throw ConfigError("metrics.embedding must be hash, http or none");
  }
  if (embedding.kind == "hash" && embedding.dimensions < 2) throw ConfigError("metrics.dimensions must be >= 2");
  if (!fewshot_exemplar_ids.empty() && fewshot_exemplar_ids.size() != 4) {
    throw ConfigError("fewshot_exemplar_ids must list exactly four ids");
  }
  orpo.validate();
  if (rater.sample_size < 1) throw ConfigError("rater.sample_size must be >= 1");
}

const llm::ProviderConfig& RunConfig::provider(const std::string& model) const {
  for (const auto& p : providers) {
    if (p.model_name == model) return p;
  }
  throw ConfigError("no provider configured for model \"" + model + "\"");
}

json to_json(const RunConfig& c) {
  json providers = json::array();
  for (const auto& p : c.providers) providers.push_back(llm::to_json(p));
  json variants = json::object(), mutants = json::object();
  for (const auto& [k, v] : c.generation.variants_total) variants[k] = v;
  for (const auto& [k, v] : c.generation.mutants_total) mutants[k] = v;
  json out{{"corpus", c.corpus.string()},
           {"run_dir", c.run_dir.string()},
           {"seed", c.seed},
           {"generation",
            {{"word_deletion_rate", c.generation.augment.word_deletion_rate},
             {"synonym_replacement_rate", c.generation.augment.synonym_replacement_rate},
             {"char_typo_rate", c.generation.augment.char_typo_rate},
             {"variants_per_explanation", c.generation.augment.variants_per_explanation},
             {"mutants_per_example", c.generation.mutants_per_example},
             {"variants_total", variants},
             {"mutants_total", mutants}}},
           {"split",
            {{"train", c.split.train}, {"test", c.split.test}, {"validation", c.split.validation}, {"stratify", c.stratify}}},
           {"providers", providers},
           {"fewshot_exemplar_ids", c.fewshot_exemplar_ids},
           {"metrics", {{"embedding", c.embedding.kind}, {"dimensions", c.embedding.dimensions}}},
           {"orpo", orpo::to_json(c.orpo)},
           {"rater", {{"sample_size", c.rater.sample_size}, {"blind", c.rater.blind}}}};
  if (c.thesaurus) out["thesaurus"] = c.thesaurus->string();
  if (c.embedding.kind == "http") {
    const auto& h = c.embedding.http;
    out["metrics"]["http"] = {{"sentence_url", h.sentence_url},       {"sentence_model", h.sentence_model},
                              {"token_url", h.token_url},             {"token_model", h.token_model},
                              {"auth_token_env", h.auth_token_env},   {"request_timeout_seconds", h.request_timeout_seconds}};
  }
  return out;
}

namespace {

fs::path bundled_thesaurus_path() { return fs::path(GAPFINDER_DATA_DIR) / "thesaurus.tsv"; }

}  // namespace

void init_run_dir(const RunConfig& config) {
  for (const char* sub : {"responses", "splits", "cache", "feedback", "prompts", "pairs", "diagnostics", "checkpoints",
                          "annotations", "reports"}) {
    fs::create_directories(config.run_dir / sub);
  }
  io::write_file_atomic(config.run_dir / "config.json", to_json(config).dump(2) + "\n");
  const fs::path thesaurus = config.thesaurus.value_or(bundled_thesaurus_path());
  json inputs{{"corpus", {{"path", config.corpus.string()}, {"sha256", io::sha256_hex(io::read_file(config.corpus))}}}};
  std::error_code ec;
  if (fs::exists(thesaurus, ec)) {
    inputs["thesaurus"] = {{"path", thesaurus.string()}, {"sha256", io::sha256_hex(io::read_file(thesaurus))}};
  }
  const json manifest{{"tool", "gapfinder"}, {"version", kVersion}, {"inputs", inputs}};
  io::write_file_atomic(config.run_dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string file_stem(const std::string& model, const std::string& method, const std::string& split) {
  auto clean = [](std::string s) {
    for (char& c : s) {
      if (std::isalnum(static_cast<unsigned char>(c)) == 0 && c != '.' && c != '-' && c != '_') c = '_';
    }
    return s;
  };
  return clean(model) + "__" + clean(method) + "__" + clean(split);
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

fs::path responses_path(const RunConfig& c) { return c.run_dir / "responses" / "responses.jsonl"; }
fs::path splits_path(const RunConfig& c) { return c.run_dir / "splits" / "splits.jsonl"; }

void require(const fs::path& p, const std::string& hint) {
  std::error_code ec;
  if (!fs::exists(p, ec)) throw DataError(p.string() + " does not exist (" + hint + ")");
}

std::vector<fs::path> list_files(const fs::path& dir, std::string_view prefix = "", std::string_view suffix = ".jsonl") {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::exists(dir, ec)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.rfind(prefix, 0) != 0) continue;
    if (name.size() < suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Loaded {
  std::vector<CodeExample> examples;
  std::vector<SimulatedResponse> responses;
  std::vector<SplitAssignment> splits;
};

Loaded load_run(const RunConfig& config, bool need_splits) {
  Loaded l;
  l.examples = load_corpus(config.corpus);
  require(responses_path(config), "run `generate` first");
  l.responses = load_responses(responses_path(config));
  if (need_splits) {
    require(splits_path(config), "run `split` first");
    l.splits = load_splits(splits_path(config));
  }
  return l;
}

std::vector<const SimulatedResponse*> in_split(const Loaded& l, Split split) {
  std::map<std::string, Split> of;
  for (const auto& s : l.splits) of[s.response_id] = s.split;
  std::vector<const SimulatedResponse*> out;
  for (const auto& r : l.responses) {
    const auto it = of.find(r.id);
    if (it == of.end()) throw DataError("response " + r.id + " has no split assignment");
    if (it->second == split) out.push_back(&r);
  }
  return out;
}

struct FeedbackLine {
  std::string response_id;
  std::string example_id;
  std::string model;
  std::string method;
  std::string split;
  std::string language;
  std::string kind;
  std::optional<std::string> feedback;
  std::optional<std::string> error;
};

json to_json(const FeedbackLine& f) {
  json r{{"response_id", f.response_id}, {"example_id", f.example_id}, {"model", f.model}, {"method", f.method},
         {"split", f.split},             {"language", f.language},     {"kind", f.kind}};
  if (f.feedback) r["feedback"] = *f.feedback;
  if (f.error) r["error"] = *f.error;
  return r;
}

std::vector<FeedbackLine> load_feedback(const fs::path& path) {
  std::vector<FeedbackLine> out;
  io::for_each_record(path, [&](std::size_t line, const json& r) {
    try {
      io::check_fields(r, {"response_id", "example_id", "model", "method", "split", "language", "kind", "feedback", "error"},
                       {"response_id", "model", "method", "language"}, "feedback record");
      FeedbackLine f;
      f.response_id = r.at("response_id").get<std::string>();
      f.example_id = r.value("example_id", std::string());
      f.model = r.at("model").get<std::string>();
      f.method = r.at("method").get<std::string>();
      f.split = r.value("split", std::string());
      f.language = r.at("language").get<std::string>();
      f.kind = r.value("kind", std::string());
      if (r.contains("feedback")) f.feedback = r.at("feedback").get<std::string>();
      if (r.contains("error")) f.error = r.at("error").get<std::string>();
      out.push_back(std::move(f));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

std::unique_ptr<metrics::EmbeddingProvider> embedding_provider(const RunConfig& c) {
  if (c.embedding.kind == "hash") return std::make_unique<metrics::HashEmbeddingProvider>(c.embedding.dimensions);
  if (c.embedding.kind == "http") return metrics::make_http_embedding_provider(c.embedding.http);
  return nullptr;
}

Thesaurus thesaurus_for(const RunConfig& c) { return c.thesaurus ? Thesaurus::load(*c.thesaurus) : Thesaurus::bundled(); }

}  // namespace

int cmd_generate(const RunConfig& config, std::ostream& out) {
  init_run_dir(config);
  const auto examples = load_corpus(config.corpus);
  const auto result = generate(examples, config.generation, thesaurus_for(config));
  save_responses(responses_path(config), result.responses);
  io::write_file_atomic(config.run_dir / "responses" / "summary.json", to_json(result.summary).dump(2) + "\n");
  std::string rejections;
  for (const auto& r : result.rejections) {
    rejections += json{{"example_id", r.example_id},
                       {"operator_id", r.operator_id},
                       {"token_index", r.token_index},
                       {"diagnostic", r.diagnostic}}
                      .dump() +
                  "\n";
  }
  io::write_file_atomic(config.run_dir / "responses" / "rejections.jsonl", rejections);
  out << render_summary(result.summary);
  return 0;
}

int cmd_split(const RunConfig& config, std::ostream& out) {
  init_run_dir(config);
  const Loaded l = load_run(config, false);
  const auto splits = split_dataset(l.responses, l.examples, config.split, config.seed, config.stratify);
  save_splits(splits_path(config), splits);
  std::map<Split, std::size_t> counts;
  for (const auto& s : splits) ++counts[s.split];
  out << "train " << counts[Split::train] << " / test " << counts[Split::test] << " / validation "
      << counts[Split::validation] << "\n";
  return 0;
}

int cmd_prompt(const RunConfig& config, llm::Method method, const std::string& model, Split split, std::ostream& out) {
  init_run_dir(config);
  const auto& provider = config.provider(model);
  const Loaded l = load_run(config, true);
  const auto by_example = index_by_id(l.examples);
  std::vector<llm::FewShotExemplar> exemplars;
  if (method == llm::Method::fewshot) {
    exemplars = llm::default_exemplars(l.responses, l.examples, l.splits, config.fewshot_exemplar_ids);
  }
  const auto targets = in_split(l, split);
  std::vector<std::vector<llm::ChatMessage>> requests;
  std::string prompt_log;
  for (const auto* r : targets) {
    const auto ex = by_example.find(r->example_id);
    if (ex == by_example.end()) throw DataError("response " + r->id + " refers to unknown example " + r->example_id);
    requests.push_back(llm::build_messages(method, *ex->second, *r, exemplars));
    json messages = json::array();
    for (const auto& m : requests.back()) messages.push_back({{"role", m.role}, {"content", m.content}});
    prompt_log += json{{"response_id", r->id}, {"messages", messages}}.dump() + "\n";
  }
  const std::string stem = file_stem(model, std::string(llm::to_string(method)), std::string(to_string(split)));
  io::write_file_atomic(config.run_dir / "prompts" / (stem + ".jsonl"), prompt_log);

  llm::ChatClient client(provider, llm::transport_for(provider), llm::ResponseCache(config.run_dir / "cache"));
  const auto results = llm::complete_all(client, requests);
  std::string feedback;
  std::size_t cached = 0, failures = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto* r = targets[i];
    FeedbackLine f{r->id, r->example_id, model, std::string(llm::to_string(method)), std::string(to_string(split)),
                   std::string(to_string(by_example.at(r->example_id)->language)), std::string(to_string(r->kind)),
                   std::nullopt, std::nullopt};
    if (results[i].completion) {
      f.feedback = results[i].completion->text;
      if (results[i].completion->usage.from_cache) ++cached;
    } else {
      f.error = std::string(llm::to_string(results[i].error->kind())) + ": " + results[i].error->what();
      ++failures;
      log::warn("response " + r->id + ": " + *f.error);
    }
    feedback += to_json(f).dump() + "\n";
  }
  io::write_file_atomic(config.run_dir / "feedback" / (stem + ".jsonl"), feedback);
  out << targets.size() << " feedback records (" << cached << " from cache, " << failures << " failed) -> feedback/"
      << stem << ".jsonl\n";
  return failures == 0 ? 0 : static_cast<int>(ErrorClass::provider);
}

namespace {

metrics::MetricReport evaluate_files(const RunConfig& config, const std::vector<fs::path>& files) {
  require(responses_path(config), "run `generate` first");
  const auto responses = load_responses(responses_path(config));
  std::map<std::string, const SimulatedResponse*> by_id;
  for (const auto& r : responses) by_id[r.id] = &r;
  std::vector<metrics::FeedbackRecord> records;
  for (const auto& file : files) {
    for (const auto& f : load_feedback(file)) {
      const auto it = by_id.find(f.response_id);
      if (it == by_id.end()) {
        throw DataError(file.string() + ": no gold feedback for record \"" + f.response_id + "\"");
      }
      if (!f.feedback) {
        log::warn(file.string() + ": record " + f.response_id + " has no feedback (provider failure), skipped");
        continue;
      }
      records.push_back({*f.feedback, it->second->gold_feedback, f.model, f.method, f.language});
    }
  }
  if (records.empty()) throw DataError("no feedback records to evaluate");
  const auto provider = embedding_provider(config);
  return metrics::evaluate_run(records, provider.get());
}

}  // namespace

int cmd_eval(const RunConfig& config, const std::vector<fs::path>& feedback_files, std::ostream& out) {
  init_run_dir(config);
  const auto files = feedback_files.empty() ? list_files(config.run_dir / "feedback") : feedback_files;
  if (files.empty()) throw DataError("no feedback files under " + (config.run_dir / "feedback").string());
  const auto report = evaluate_files(config, files);
  const std::string table = metrics::render_table1(report);
  io::write_file_atomic(config.run_dir / "reports" / "metrics.csv", metrics::report_csv(report));
  io::write_file_atomic(config.run_dir / "reports" / "table1.txt", table);
  out << table;
  return 0;
}

int cmd_prefs(const RunConfig& config, const std::string& model, llm::Method method, Split split, std::ostream& out) {
  init_run_dir(config);
  const Loaded l = load_run(config, true);
  const std::string stem = file_stem(model, std::string(llm::to_string(method)), std::string(to_string(split)));
  const fs::path feedback_file = config.run_dir / "feedback" / (stem + ".jsonl");
  require(feedback_file, "run `prompt` for this model, method and split first");
  std::map<std::string, std::string> rejected;
  for (const auto& f : load_feedback(feedback_file)) {
    if (f.feedback) rejected[f.response_id] = *f.feedback;
  }
  std::vector<SimulatedResponse> targets;
  for (const auto* r : in_split(l, split)) targets.push_back(*r);
  const auto built = llm::build_preference_pairs(targets, l.examples, rejected,
                                                 method == llm::Method::p1 ? llm::PromptId::P1 : llm::PromptId::P2);
  std::string lines;
  for (const auto& p : built.pairs) lines += llm::to_json(p).dump() + "\n";
  io::write_file_atomic(config.run_dir / "pairs" / (stem + ".jsonl"), lines);
  out << built.pairs.size() << " preference pairs (" << built.dropped << " dropped: rejected equals chosen) -> pairs/"
      << stem << ".jsonl\n";
  return 0;
}

int cmd_orpo_train(const RunConfig& config, const std::vector<fs::path>& pair_files, std::ostream& out) {
  init_run_dir(config);
  const auto files = pair_files.empty() ? list_files(config.run_dir / "pairs") : pair_files;
  std::vector<orpo::TrainingText> texts;
  for (const auto& file : files) {
    io::for_each_record(file, [&](std::size_t, const json& r) {
      const auto p = llm::preference_pair_from_json(r);
      texts.push_back({p.prompt_context, p.chosen, p.rejected});
    });
  }
  if (texts.empty()) throw DataError("no preference pairs found; run `prefs` first");
  const auto result = orpo::train_toy(texts, config.orpo, config.seed);
  std::string lines;
  for (const auto& d : result.epochs) lines += orpo::to_json(d).dump() + "\n";
  io::write_file_atomic(config.run_dir / "diagnostics" / "orpo.jsonl", lines);
  io::write_file_atomic(config.run_dir / "diagnostics" / "orpo_initial.json", orpo::to_json(result.initial).dump(2) + "\n");
  io::write_file_atomic(config.run_dir / "checkpoints" / "toy_model.json", orpo::checkpoint_json(result.model).dump() + "\n");
  out << "pairs " << texts.size() << ", vocabulary " << result.model.vocab_size() << ", lambda " << config.orpo.lambda
      << (config.orpo.inner_log ? " (sigmoid of log odds ratio)" : " (sigmoid of odds ratio)") << "\n";
  out << std::fixed << std::setprecision(6);
  out << "epoch       L_SFT        L_OR   mean log OR\n";
  auto row = [&](const orpo::EpochDiagnostics& d) {
    out << std::setw(5) << d.epoch << std::setw(12) << d.l_sft << std::setw(12) << d.l_or << std::setw(14)
        << d.mean_log_or << "\n";
  };
  row(result.initial);
  for (const auto& d : result.epochs) row(d);
  out.unsetf(std::ios::fixed);
  return 0;
}

namespace {

fs::path samples_path(const RunConfig& c) { return c.run_dir / "annotations" / "samples.jsonl"; }

std::vector<rater::Sample> build_samples(const RunConfig& config) {
  const Loaded l = load_run(config, false);
  const auto by_example = index_by_id(l.examples);
  std::map<std::string, const SimulatedResponse*> by_id;
  for (const auto& r : l.responses) by_id[r.id] = &r;
  std::vector<rater::Sample> population;
  for (const auto& file : list_files(config.run_dir / "feedback")) {
    for (const auto& f : load_feedback(file)) {
      if (!f.feedback) continue;
      const auto it = by_id.find(f.response_id);
      if (it == by_id.end()) throw DataError("feedback for unknown response \"" + f.response_id + "\"");
      const SimulatedResponse& r = *it->second;
      population.push_back({f.model + "__" + f.method + "__" + r.id, r.id, f.language, std::string(to_string(r.kind)),
                            f.model, f.method, by_example.at(r.example_id)->source_text, r.explanation_text,
                            r.gold_feedback, *f.feedback});
    }
  }
  if (population.empty()) throw DataError("no feedback records to annotate; run `prompt` first");
  std::size_t n = config.rater.sample_size;
  if (n > population.size()) {
    log::warn("sample size " + std::to_string(n) + " exceeds the " + std::to_string(population.size()) +
              " feedback records; annotating all of them");
    n = population.size();
  }
  std::vector<std::string> strata;
  for (const auto& s : population) strata.push_back(s.language + "/" + s.kind);
  std::vector<rater::Sample> out;
  for (auto i : rater::stratified_sample(strata, n, config.seed)) out.push_back(population[i]);
  return out;
}

std::vector<rater::RubricLabel> all_labels(const RunConfig& config) {
  std::vector<rater::RubricLabel> out;
  for (const auto& f : list_files(config.run_dir / "annotations", "labels-")) {
    for (auto& l : rater::load_labels(f)) out.push_back(std::move(l));
  }
  return out;
}

}  // namespace

int cmd_annotate(const RunConfig& config, const std::string& annotator, std::istream& keys, std::ostream& out,
                 std::optional<bool> blind) {
  init_run_dir(config);
  if (annotator.empty() || annotator.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("annotator id must be non-empty and contain no path separators");
  }
  std::error_code ec;
  if (!fs::exists(samples_path(config), ec)) rater::save_samples(samples_path(config), build_samples(config));
  const auto samples = rater::load_samples(samples_path(config));
  const fs::path session_path = config.run_dir / "annotations" / (annotator + ".session.json");
  const fs::path labels_path = config.run_dir / "annotations" / ("labels-" + annotator + ".jsonl");
  auto session = rater::open_session(session_path, annotator, samples_path(config), labels_path,
                                     blind.value_or(config.rater.blind));
  const auto outcome = rater::annotate(session, session_path, samples, keys, out);
  out << "labeled " << outcome.labeled << ", skipped " << outcome.skipped << "; cursor " << session.cursor << " of "
      << samples.size() << (session.completed ? " (complete)" : "") << "\n";
  return 0;
}

namespace {

json kappa_json(const rater::AgreementReport& a) {
  json pairs = json::array();
  for (const auto& p : a.pairs) {
    json k = json::object();
    for (const auto& [d, v] : p.kappa) k[std::string(rater::to_string(d))] = v;
    pairs.push_back({{"annotator_a", p.annotator_a}, {"annotator_b", p.annotator_b}, {"kappa", k}});
  }
  json mean = json::object();
  for (const auto& [d, v] : a.mean) mean[std::string(rater::to_string(d))] = v;
  return json{{"annotators", a.annotators}, {"pairs", pairs}, {"mean_pairwise_kappa", mean}};
}

std::string kappa_text(const rater::AgreementReport& a) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "Cohen's kappa (mean over " << a.pairs.size() << " annotator pair(s)):";
  for (auto d : rater::kDimensions) out << " " << rater::to_string(d) << "=" << a.mean.at(d);
  out << "\n";
  return out.str();
}

}  // namespace

int cmd_kappa(const RunConfig& config, std::ostream& out) {
  init_run_dir(config);
  const auto report = rater::agreement(all_labels(config));
  io::write_file_atomic(config.run_dir / "reports" / "kappa.json", kappa_json(report).dump(2) + "\n");
  out << kappa_text(report);
  return 0;
}

int cmd_report(const RunConfig& config, std::ostream& out) {
  init_run_dir(config);
  std::ostringstream md;
  md << "# Run report\n\n";
  const auto files = list_files(config.run_dir / "feedback");
  md << "## Similarity metrics\n\n";
  if (files.empty()) {
    md << "_absent: no feedback files_\n\n";
  } else {
    const auto report = evaluate_files(config, files);
    io::write_file_atomic(config.run_dir / "reports" / "metrics.csv", metrics::report_csv(report));
    io::write_file_atomic(config.run_dir / "reports" / "table1.txt", metrics::render_table1(report));
    md << "```\n" << metrics::render_table1(report) << "```\n\n";
  }
  md << "## Rubric judgments\n\n";
  const auto labels = all_labels(config);
  std::error_code ec;
  if (labels.empty() || !fs::exists(samples_path(config), ec)) {
    md << "_absent: no annotation labels_\n";
  } else {
    const auto samples = rater::load_samples(samples_path(config));
    const auto rows = rater::aggregate_rubric(labels, samples);
    io::write_file_atomic(config.run_dir / "reports" / "rubric.csv", rater::rubric_csv(rows));
    io::write_file_atomic(config.run_dir / "reports" / "table2.txt", rater::render_table2(rows));
    md << "```\n" << rater::render_table2(rows) << "```\n";
    std::set<std::string> annotators;
    for (const auto& l : labels) annotators.insert(l.annotator_id);
    if (annotators.size() >= 2) {
      const auto agreement = rater::agreement(labels);
      io::write_file_atomic(config.run_dir / "reports" / "kappa.json", kappa_json(agreement).dump(2) + "\n");
      md << "\n" << kappa_text(agreement);
    }
  }
  io::write_file_atomic(config.run_dir / "reports" / "report.md", md.str());
  out << md.str();
  return 0;
}

int cmd_operators(std::ostream& out) {
  out << std::left << std::setw(28) << "id" << std::setw(14) << "languages" << std::setw(34) << "misconception_tag"
      << "description\n";
  for (const auto& op : builtin_operators()) {
    std::string langs;
    for (auto l : op.languages) langs += (langs.empty() ? "" : ",") + std::string(to_string(l));
    out << std::left << std::setw(28) << op.id << std::setw(14) << langs << std::setw(34) << op.misconception_tag
        << op.description << "\n";
  }
  return 0;
}

}  // namespace gapfinder::pipeline
