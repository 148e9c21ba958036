// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: evaluates the ten release criteria and prints one
// PASS/FAIL line per criterion. Exit status is nonzero when any fails.
//
// Criterion 4 checks the full-scale count structure on a shaped synthetic
// corpus. GAPFINDER_FULL_CORPUS may name a real full-size corpus (one JSON
// example per line) to check as well.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "gapfinder/error.hpp"
#include "gapfinder/io.hpp"
#include "gapfinder/llmgate.hpp"
#include "gapfinder/metrics.hpp"
#include "gapfinder/mutator.hpp"
#include "gapfinder/orpo.hpp"
#include "gapfinder/pipeline.hpp"
#include "gapfinder/random.hpp"
#include "gapfinder/rater.hpp"
#include "gapfinder/synth.hpp"
#include "shaped_corpus.hpp"

using namespace gapfinder;
namespace fs = std::filesystem;

namespace {

const fs::path kTests = GAPFINDER_TEST_DIR;
const fs::path kData = kTests.parent_path() / "data";

struct Check {
  bool ok = true;
  std::ostringstream notes;
  void expect(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) notes << "; failed: ";
      else notes << ", ";
      notes << what;
      ok = false;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("gapfinder_accept_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args, const std::string& stdin_file = "") {
  std::string cmd = std::string(GAPFINDER_CLI) + " " + args + " >/dev/null 2>&1";
  if (!stdin_file.empty()) cmd += " <" + stdin_file;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string near(double a, double b) {
  std::ostringstream s;
  s.precision(9);
  s << a << " vs " << b;
  return s.str();
}

// 1 ------------------------------------------------------------------------
Check metric_oracles() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto o = json::parse(io::read_file(kTests / "golden" / "metric_oracle.json"));
  std::size_t cases = 0;
  for (const auto& k : o["chrf"]) {
    const double got = metrics::chrf(k["hyp"].get<std::string>(), k["ref"].get<std::string>(), k["max_n"].get<int>());
    c.expect(std::abs(got - k["score"].get<double>()) <= 1e-6, "chrF " + k["hyp"].get<std::string>() + " " +
                                                                  near(got, k["score"].get<double>()));
    ++cases;
  }
  for (const auto& k : o["meteor"]) {
    const double got = metrics::meteor(k["hyp"].get<std::string>(), k["ref"].get<std::string>());
    c.expect(std::abs(got - k["score"].get<double>()) <= 1e-6, "METEOR " + k["hyp"].get<std::string>());
    ++cases;
  }
  c.expect(std::abs(metrics::chrf("ab", "abc", 2) - 0.63636) < 5e-6, "chrF worked value");
  c.expect(std::abs(metrics::meteor("the cat sat", "the cat sat") - 0.98148) < 5e-6, "METEOR worked value");
  for (const auto& k : o["bertscore"]) {
    const auto prf = metrics::bertscore(k["hyp"].get<std::vector<metrics::Vector>>(),
                                        k["ref"].get<std::vector<metrics::Vector>>());
    c.expect(std::abs(prf.precision - k["precision"].get<double>()) <= 1e-6 &&
                 std::abs(prf.recall - k["recall"].get<double>()) <= 1e-6 &&
                 std::abs(prf.f1 - k["f1"].get<double>()) <= 1e-6,
             "BERTScore case");
  }
  c.expect(std::abs(o["bertscore"][0]["f1"].get<double>() - 0.85355) < 5e-6, "BERTScore worked value");
  const double secs = seconds_since(t0);
  c.expect(o["chrf"].size() == 10 && o["meteor"].size() == 10, "oracle table size");
  c.expect(secs < 1.0, "runtime");
  c.notes << cases << " chrF/METEOR cases, " << o["bertscore"].size() << " BERTScore cases, " << secs << " s";
  return c;
}

// 2 ------------------------------------------------------------------------
Check orpo_math() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  c.expect(std::abs(orpo::or_loss(1.0) - 0.313262) <= 1e-6, "L_OR(1) " + near(orpo::or_loss(1.0), 0.313262));
  c.expect(std::abs(orpo::or_loss(3.0) - 0.048587) <= 1e-6, "L_OR(3) " + near(orpo::or_loss(3.0), 0.048587));

  Pcg32 rng(20240611, 17);
  auto seq = [&](std::size_t vocab, std::size_t len) {
    orpo::TokenSeq s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(1 + rng.bounded(static_cast<std::uint32_t>(vocab - 1)));
    return s;
  };
  double worst = 0;
  bool sft_exact = true;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t vocab = 3 + rng.bounded(4);
    const std::size_t k = 1 + rng.bounded(3);
    std::vector<char32_t> syms;
    for (std::size_t i = 0; i + 1 < vocab; ++i) syms.push_back(static_cast<char32_t>(U'a' + i));
    orpo::ToyModel model(orpo::Vocabulary::from_symbols(syms), k);
    for (double& t : model.theta()) t = (2 * rng.uniform() - 1) * 0.8;
    std::vector<orpo::Example> batch;
    const std::size_t b = 1 + rng.bounded(3);
    for (std::size_t i = 0; i < b; ++i) {
      batch.push_back({seq(vocab, rng.bounded(4)), seq(vocab, 1 + rng.bounded(4)), seq(vocab, 1 + rng.bounded(4))});
    }
    const double lambda = 0.05 + 2 * rng.uniform();
    const bool inner_log = draw % 2 == 1;
    worst = std::max(worst, orpo::gradient_check(model, batch, lambda, 1e-5, 1e-6, inner_log));
    const auto parts = orpo::orpo_loss(model, batch, 0.0, 1e-6, inner_log);
    sft_exact = sft_exact && parts.total == parts.l_sft;
  }
  const double secs = seconds_since(t0);
  c.expect(sft_exact, "lambda=0 total != L_SFT");
  c.expect(worst < 1e-4, "gradient check");
  c.expect(secs < 10.0, "runtime");
  c.notes << "L_OR(1)=" << orpo::or_loss(1.0) << " L_OR(3)=" << orpo::or_loss(3.0) << ", max rel grad err "
          << worst << " over 100 draws, " << secs << " s";
  return c;
}

// 3 ------------------------------------------------------------------------
std::vector<orpo::TrainingText> synthetic_preferences() {
  const std::vector<std::string> loops = {"for i in range(n)", "while i < n", "for x in xs", "for j in range(1, n)",
                                          "while k > 0"};
  const std::vector<std::string> good = {"The loop misses the last index; use n + 1 as the bound.",
                                         "The explanation omits how the total is accumulated.",
                                         "The condition should be <= to include the final element.",
                                         "Your explanation is complete and correct. Well done!"};
  const std::vector<std::string> bad = {"Please improve grammar and sentence flow.",
                                        "Consider restructuring your paragraphs for clarity.",
                                        "Your writing style could be more formal."};
  std::vector<orpo::TrainingText> out;
  for (std::size_t i = 0; i < 60; ++i) {
    out.push_back({"Code: " + loops[i % loops.size()] + " Student: it loops over the items " + std::to_string(i % 7),
                   good[i % good.size()], bad[(i / 2) % bad.size()]});
  }
  return out;
}

Check preference_alignment() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto pairs = synthetic_preferences();
  orpo::OrpoConfig cfg;
  const auto with = orpo::train_toy(pairs, cfg, 7);
  orpo::OrpoConfig zero = cfg;
  zero.lambda = 0.0;
  const auto without = orpo::train_toy(pairs, zero, 7);
  const double start = with.initial.mean_log_or;
  const double end = with.epochs.back().mean_log_or;
  const double secs = seconds_since(t0);
  c.expect(pairs.size() >= 50, "corpus size");
  c.expect(with.epochs.size() == 3 && cfg.batch_size == 2, "defaults");
  c.expect(end > start, "mean log OR did not increase");
  c.expect(end > without.epochs.back().mean_log_or, "lambda>0 not above lambda=0");
  c.expect(secs < 60.0, "runtime");
  c.notes.precision(6);
  c.notes << pairs.size() << " pairs, mean log OR " << start << " -> " << end << " (lambda=" << cfg.lambda
          << "), lambda=0 final " << without.epochs.back().mean_log_or << ", " << secs << " s";
  return c;
}

// 4 ------------------------------------------------------------------------
// The full-scale count structure: 466+466 variants, 1,296 incomplete,
// 660 incorrect, 2,888 total.
void full_scale_structure(Check& c, const std::vector<CodeExample>& examples, const std::string& label) {
  pipeline::GenerationConfig g;
  g.variants_total = {{"java", 466}, {"python", 466}};
  g.mutants_total = {{"java", 330}, {"python", 330}};
  const auto r = pipeline::generate(examples, g, Thesaurus::bundled());
  auto count = [&](const char* lang, const char* kind) {
    const auto l = r.summary.counts.find(lang);
    if (l == r.summary.counts.end()) return std::size_t{0};
    const auto k = l->second.find(kind);
    return k == l->second.end() ? std::size_t{0} : k->second;
  };
  const std::size_t inc = count("java", "incomplete") + count("python", "incomplete");
  const std::size_t bad = count("java", "incorrect") + count("python", "incorrect");
  c.expect(count("java", "correct_variant") == 466 && count("python", "correct_variant") == 466,
           label + ": variant counts");
  c.expect(inc == 1296, label + ": incomplete total " + std::to_string(inc));
  c.expect(bad == 660, label + ": incorrect total " + std::to_string(bad));
  c.expect(r.summary.total == 2888, label + ": total " + std::to_string(r.summary.total));
  c.notes << "; " << label << ": " << count("java", "correct_variant") << "+" << count("python", "correct_variant")
          << " variants, " << inc << " incomplete, " << bad << " incorrect, " << r.summary.total << " total";
}

Check dataset_combinatorics() {
  Check c;
  const std::vector<std::string> words = {"the",    "loop",  "prints", "each",  "element", "of",    "list",
                                          "program", "value", "index",  "adds",  "array",   "total", "returns"};
  const auto thesaurus = Thesaurus::bundled();
  Pcg32 rng(4, 4);
  std::size_t generated = 0, bad_counts = 0, bad_reconstruct = 0;
  for (int e = 0; e < 120; ++e) {
    CodeExample ex{"syn" + std::to_string(e), e % 2 ? Language::java : Language::python, "x = 1\n", {}, {}};
    const std::size_t n = 3 + rng.bounded(8);
    for (std::size_t s = 0; s < n; ++s) {
      std::string sentence = "Then";
      const std::size_t len = 2 + rng.bounded(12);
      for (std::size_t w = 0; w < len; ++w) {
        sentence += " " + words[rng.bounded(static_cast<std::uint32_t>(words.size()))];
      }
      ex.expert_explanation.push_back(sentence + ".");
    }
    AugmentConfig cfg;
    cfg.seed = 99;
    cfg.variants_per_explanation = 4;
    cfg.word_deletion_rate = 0.15;
    cfg.synonym_replacement_rate = 0.3;
    cfg.char_typo_rate = 0.15;
    const auto inc = gen_incomplete(ex);
    if (inc.size() != n - 1) ++bad_counts;
    const auto cv = gen_correct_variants(ex, cfg, thesaurus);
    for (const auto* list : {&inc, &cv}) {
      for (const auto& r : *list) {
        if (reconstruct_explanation(ex, r) != r.explanation_text) ++bad_reconstruct;
        ++generated;
      }
    }
  }
  c.expect(generated >= 1000, "fewer than 1000 responses");
  c.expect(bad_counts == 0, std::to_string(bad_counts) + " wrong incomplete counts");
  c.expect(bad_reconstruct == 0, std::to_string(bad_reconstruct) + " reconstruction mismatches");
  c.notes << generated << " synthetic responses checked";

  full_scale_structure(c, testing::shaped_corpus(), "shaped synthetic corpus");
  const char* full = std::getenv("GAPFINDER_FULL_CORPUS");
  if (full == nullptr || *full == '\0') {
    c.notes << "; real full-size input not supplied (set GAPFINDER_FULL_CORPUS)";
  } else {
    full_scale_structure(c, load_corpus(full), full);
  }
  return c;
}

// 5 ------------------------------------------------------------------------
Check split_apportionment() {
  Check c;
  std::vector<CodeExample> examples = {{"j", Language::java, "x", {}, {"s"}}, {"p", Language::python, "x", {}, {"s"}}};
  std::vector<SimulatedResponse> rs;
  const std::vector<std::tuple<const char*, ResponseKind, int>> shape = {
      {"j", ResponseKind::correct_variant, 466}, {"j", ResponseKind::incomplete, 338}, {"j", ResponseKind::incorrect, 330},
      {"p", ResponseKind::correct_variant, 466}, {"p", ResponseKind::incomplete, 958}, {"p", ResponseKind::incorrect, 330}};
  for (const auto& [ex, kind, n] : shape) {
    for (int i = 0; i < n; ++i) {
      SimulatedResponse r;
      r.id = std::string(ex) + "/" + std::string(to_string(kind)) + std::to_string(i);
      r.example_id = ex;
      r.kind = kind;
      rs.push_back(std::move(r));
    }
  }
  const SplitRatios ratios{0.75, 0.20, 0.05};
  const auto a = split_dataset(rs, examples, ratios, 42);
  const auto b = split_dataset(rs, examples, ratios, 42);
  std::map<Split, int> counts;
  for (const auto& s : a) ++counts[s.split];
  c.expect(rs.size() == 2888, "record count");
  c.expect(counts[Split::train] == 2166 && counts[Split::test] == 578 && counts[Split::validation] == 144, "counts");
  c.expect(a == b, "not deterministic");
  c.notes << counts[Split::train] << "/" << counts[Split::test] << "/" << counts[Split::validation];
  return c;
}

// 6 ------------------------------------------------------------------------
Check mutation_safety() {
  Check c;
  std::size_t mutants = 0, rejected = 0, violations = 0;
  std::set<std::string> operators;
  try {
    for (const auto& ex : load_corpus(kData / "sample_corpus.jsonl")) {
      const auto tokens = lex(ex.source_text, ex.language);
      for (const auto& site : find_sites(tokens, ex.language, builtin_operators())) {
        const auto out = apply_mutation(ex, site);
        if (!out) {
          ++rejected;
          continue;
        }
        ++mutants;
        const auto& m = *out.mutant->response.provenance.mutation;
        operators.insert(m.operator_id);
        const std::string& code = out.mutant->mutated_code;
        const auto mt = lex(code, ex.language);
        bool ok = detokenize(mt) == code;
        ok = ok && check_well_formed(mt, ex.language).ok;
        ok = ok && code != ex.source_text;
        ok = ok && ex.source_text.substr(m.byte_start, m.byte_end - m.byte_start) == m.original_fragment;
        ok = ok && code == ex.source_text.substr(0, m.byte_start) + m.replacement_fragment + ex.source_text.substr(m.byte_end);
        // Window boundaries fall on token boundaries of the original.
        bool start_edge = false, end_edge = false;
        for (const auto& t : tokens) {
          start_edge = start_edge || t.begin == m.byte_start;
          end_edge = end_edge || t.end == m.byte_end;
        }
        ok = ok && start_edge && end_edge;
        if (!ok) ++violations;
      }
    }
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  c.expect(violations == 0, std::to_string(violations) + " unsafe mutants");
  c.expect(mutants > 0, "no mutants");
  c.notes << mutants << " mutants from " << operators.size() << " operator families (" << rejected
          << " sites rejected by explanation/guard checks)";
  return c;
}

// 7 ------------------------------------------------------------------------
Check prompt_fidelity() {
  Check c;
  const char* code = "for i in range(3):\n    print(i)";
  const char* student = "It prints {numbers} up to 3.";
  c.expect(std::string(llm::template_text(llm::PromptId::P1)) == io::read_file(kTests / "golden" / "p1_template.txt"),
           "P1 template");
  c.expect(std::string(llm::template_text(llm::PromptId::P2)) == io::read_file(kTests / "golden" / "p2_template.txt"),
           "P2 template");
  c.expect(llm::render_prompt(llm::PromptId::P1, code, std::string_view("The loop prints 0, 1 and 2."), student) ==
               io::read_file(kTests / "golden" / "p1_rendered.txt"),
           "P1 rendered");
  c.expect(llm::render_prompt(llm::PromptId::P2, code, std::nullopt, student) ==
               io::read_file(kTests / "golden" / "p2_rendered.txt"),
           "P2 rendered");

  const auto examples = load_corpus(kData / "sample_corpus.jsonl");
  pipeline::GenerationConfig g;
  const auto gen = pipeline::generate(examples, g, Thesaurus::bundled());
  const auto splits = split_dataset(gen.responses, examples, {}, 5);
  const auto exemplars = llm::default_exemplars(gen.responses, examples, splits);
  std::set<llm::ExemplarCategory> cats;
  for (const auto& e : exemplars) cats.insert(e.category);
  c.expect(exemplars.size() == 4 && cats.size() == 4, "four categories");
  const auto by_id = index_by_id(examples);
  std::size_t checked = 0;
  for (const auto& r : gen.responses) {
    const auto msgs = llm::build_messages(llm::Method::fewshot, *by_id.at(r.example_id), r, exemplars);
    bool shape = msgs.size() == 9;
    for (std::size_t i = 0; shape && i < 9; ++i) shape = msgs[i].role == (i % 2 == 0 ? "user" : "assistant");
    c.expect(shape, "few-shot shape for " + r.id);
    ++checked;
  }
  c.notes << "golden P1/P2 byte-equal; " << checked << " few-shot assemblies of 9 messages";
  return c;
}

// 8 ------------------------------------------------------------------------
Check gateway_determinism() {
  Check c;
  const auto dir = fresh_dir("gateway");
  json cfg = {{"corpus", (kData / "mini_corpus.jsonl").string()},
              {"run_dir", (dir / "run").string()},
              {"seed", 8},
              {"providers", {{{"endpoint_url", "stub://record"}, {"model_name", "fixture-model"}}}}};
  io::write_file_atomic(dir / "record.json", cfg.dump(2));
  // Replay against an endpoint nothing listens on: every answer must come from the cache.
  cfg["providers"] = {{{"endpoint_url", "http://127.0.0.1:9/v1/chat/completions"},
                       {"model_name", "fixture-model"},
                       {"request_timeout_seconds", 1},
                       {"retry", {{"max_attempts", 1}, {"backoff_base_seconds", 0.01}}}}};
  io::write_file_atomic(dir / "replay.json", cfg.dump(2));
  const std::string rec = " --config " + (dir / "record.json").string();
  const std::string rep = " --config " + (dir / "replay.json").string();
  const auto run = dir / "run";
  c.expect(run_cli("generate" + rec) == 0 && run_cli("split" + rec) == 0, "generate/split");
  c.expect(run_cli("prompt --method p1 --split test --model fixture-model" + rec) == 0, "recording prompt");
  const std::string feedback_name = pipeline::file_stem("fixture-model", "p1", "test") + ".jsonl";
  std::vector<std::string> outputs;
  for (int pass = 0; pass < 2; ++pass) {
    const int prompt = run_cli("prompt --method p1 --split test --model fixture-model" + rep);
    const int eval = run_cli("eval" + rep);
    c.expect(prompt == 0, "offline prompt pass " + std::to_string(pass + 1) + " exit " + std::to_string(prompt));
    c.expect(eval == 0, "offline eval pass " + std::to_string(pass + 1));
    std::error_code ec;
    if (!fs::exists(run / "feedback" / feedback_name, ec) || !fs::exists(run / "reports" / "metrics.csv", ec)) {
      c.expect(false, "missing outputs");
      break;
    }
    outputs.push_back(io::read_file(run / "feedback" / feedback_name) + "\x1e" +
                      io::read_file(run / "reports" / "metrics.csv") + "\x1e" +
                      io::read_file(run / "reports" / "table1.txt"));
  }
  c.expect(outputs.size() == 2 && outputs[0] == outputs[1], "outputs differ between runs");
  std::size_t cached = 0;
  for (const auto& entry : fs::directory_iterator(run / "cache")) cached += entry.is_regular_file();
  c.notes << cached << " cached exchanges replayed twice against a dead endpoint";
  fs::remove_all(dir);
  return c;
}

// 9 ------------------------------------------------------------------------
Check kappa_oracle() {
  Check c;
  const double k = rater::cohen_kappa(rater::Contingency{20, 5, 10, 15});
  c.expect(k == 0.4, "kappa(20,5,10,15) = " + near(k, 0.4));
  c.expect(rater::cohen_kappa(rater::Contingency{31, 0, 0, 19}) == 1.0, "perfect agreement");
  Pcg32 rng(9, 9);
  rater::Contingency t;
  for (int i = 0; i < 10000; ++i) {
    const bool a = rng.uniform() < 0.7, b = rng.uniform() < 0.7;
    (a ? (b ? t.yy : t.yn) : (b ? t.ny : t.nn))++;
  }
  const double indep = rater::cohen_kappa(t);
  c.expect(std::abs(indep) < 0.1, "independent kappa " + std::to_string(indep));
  c.notes << "kappa=" << k << ", perfect=1, independent(10000)=" << indep;
  return c;
}

// 10 -----------------------------------------------------------------------
Check end_to_end() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = fresh_dir("e2e");
  json cfg = json::parse(io::read_file(kData / "example_config.json"));
  cfg["corpus"] = (kData / "mini_corpus.jsonl").string();
  cfg["run_dir"] = (dir / "run").string();
  io::write_file_atomic(dir / "config.json", cfg.dump(2));
  const std::string conf = " --config " + (dir / "config.json").string();
  const std::string model = cfg["providers"][0]["model_name"].get<std::string>();
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"generate", "generate" + conf},
      {"split", "split" + conf},
      {"prompt", "prompt --method p1 --split test --model " + model + conf},
      {"eval", "eval" + conf},
      {"prefs", "prefs --method p1 --split test --model " + model + conf},
      {"orpo-train", "orpo-train" + conf},
  };
  for (const auto& [name, args] : steps) {
    const int rc = run_cli(args);
    c.expect(rc == 0, name + " exit " + std::to_string(rc));
  }
  // Two stub annotators answer from fixed key scripts.
  std::string keys_a, keys_b;
  for (int i = 0; i < 40; ++i) {
    keys_a += i % 4 == 0 ? "y n y\n" : "y y y\n";
    keys_b += i % 5 == 0 ? "n n y\n" : "y y y\n";
  }
  io::write_file_atomic(dir / "keys_a.txt", keys_a);
  io::write_file_atomic(dir / "keys_b.txt", keys_b);
  c.expect(run_cli("annotate --annotator ann_a" + conf, (dir / "keys_a.txt").string()) == 0, "annotate a");
  c.expect(run_cli("annotate --annotator ann_b" + conf, (dir / "keys_b.txt").string()) == 0, "annotate b");
  c.expect(run_cli("kappa" + conf) == 0, "kappa");
  c.expect(run_cli("report" + conf) == 0, "report");
  const auto reports = dir / "run" / "reports";
  std::error_code ec;
  const bool have = fs::exists(reports / "report.md", ec) && fs::exists(reports / "table1.txt", ec) &&
                    fs::exists(reports / "table2.txt", ec);
  c.expect(have, "report files");
  if (have) {
    const auto t1 = io::read_file(reports / "table1.txt");
    const auto t2 = io::read_file(reports / "table2.txt");
    const auto md = io::read_file(reports / "report.md");
    c.expect(t1.find("Python") != std::string::npos && t1.find("Java") != std::string::npos &&
                 t1.find("chrF") != std::string::npos && t1.find("BERTScr") != std::string::npos,
             "Table-1 shape");
    c.expect(t2.find("Correct") != std::string::npos && t2.find("Diagnostic") != std::string::npos &&
                 t2.find("Positive") != std::string::npos,
             "Table-2 shape");
    c.expect(md.find(t1) != std::string::npos && md.find(t2) != std::string::npos, "report merges both tables");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 120.0, "runtime");
  c.notes << "generate -> split -> prompt -> eval -> prefs -> orpo-train -> annotate x2 -> kappa -> report in "
          << secs << " s";
  fs::remove_all(dir);
  return c;
}

}  // namespace

int main() {
  log::set_sink([](std::string_view, std::string_view) {});
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
      {"metric oracles", metric_oracles},
      {"ORPO math", orpo_math},
      {"toy preference alignment", preference_alignment},
      {"dataset combinatorics", dataset_combinatorics},
      {"split apportionment", split_apportionment},
      {"mutation safety", mutation_safety},
      {"prompt fidelity", prompt_fidelity},
      {"gateway determinism", gateway_determinism},
      {"kappa oracle", kappa_oracle},
      {"end-to-end smoke", end_to_end},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.notes << "exception: " << e.what();
    }
    failures += c.ok ? 0 : 1;
    std::cout << "AC" << (i + 1) << " " << (c.ok ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
              << c.notes.str() << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
