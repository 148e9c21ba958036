// SPDX-License-Identifier: Apache-2.0
//
// gapfinder command-line entry point. Each subcommand takes --config and
// works inside the run directory named there.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gapfinder/error.hpp"
#include "gapfinder/io.hpp"
#include "gapfinder/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace gapfinder;

constexpr const char* kFooter = R"(Run directory layout (fixed names):
  config.json      effective configuration snapshot
  manifest.json    tool version and input file hashes
  responses/       responses.jsonl, summary.json, rejections.jsonl
  splits/          splits.jsonl
  cache/           provider responses keyed by request hash
  feedback/        <model>__<method>__<split>.jsonl
  prompts/         rendered prompts per feedback file
  pairs/           preference pairs per feedback file
  diagnostics/     orpo.jsonl, orpo_initial.json
  checkpoints/     toy_model.json
  annotations/     samples.jsonl, <annotator>.session.json, labels-<annotator>.jsonl
  reports/         metrics.csv, table1.txt, rubric.csv, table2.txt, kappa.json, report.md

Annotation keys: y = yes, n = no, s = skip sample, q = save and quit.
Exit codes: 0 success, 1 usage or configuration, 2 data, 3 provider.
Secrets are read from the environment variable named by auth_token_env.)";

const std::vector<std::string> kMethods = {"p1", "p2", "fewshot"};
const std::vector<std::string> kSplits = {"train", "test", "validation"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gapfinder: feedback on code explanations"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pipeline::kVersion));

  std::string config_path;
  std::string model, method = "p2", split = "test", annotator, keys_file;
  std::vector<std::string> files;
  bool blind = false, unblind = false;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run configuration (JSON)")->required();
    return sub;
  };
  auto* generate = with_config(app.add_subcommand("generate", "synthesize responses from the corpus"));
  auto* split_cmd = with_config(app.add_subcommand("split", "assign responses to train/test/validation"));
  auto* prompt = with_config(app.add_subcommand("prompt", "request feedback from a model for one split"));
  prompt->add_option("-m,--model", model, "provider model name")->required();
  prompt->add_option("--method", method, "prompting method")->check(CLI::IsMember(kMethods));
  prompt->add_option("--split", split, "split to prompt")->check(CLI::IsMember(kSplits));
  auto* eval = with_config(app.add_subcommand("eval", "score feedback against gold (chrF, METEOR, USE, BERTScore)"));
  eval->add_option("files", files, "feedback files (default: all under feedback/)")->check(CLI::ExistingFile);
  auto* prefs = with_config(app.add_subcommand("prefs", "build preference pairs from model feedback"));
  prefs->add_option("-m,--model", model, "provider model name")->required();
  prefs->add_option("--method", method, "prompting method")->check(CLI::IsMember(kMethods));
  prefs->add_option("--split", split, "split")->check(CLI::IsMember(kSplits));
  auto* orpo = with_config(app.add_subcommand("orpo-train", "train the toy model with odds-ratio preference optimization"));
  orpo->add_option("files", files, "pair files (default: all under pairs/)")->check(CLI::ExistingFile);
  auto* annotate = with_config(app.add_subcommand("annotate", "label sampled feedback in the terminal"));
  annotate->add_option("-a,--annotator", annotator, "annotator id")->required();
  annotate->add_option("--keys", keys_file, "read keys from a file instead of stdin")->check(CLI::ExistingFile);
  auto* blind_flag = annotate->add_flag("--blind", blind, "hide gold feedback, model and method");
  annotate->add_flag("--no-blind", unblind, "show gold feedback, model and method")->excludes(blind_flag);
  auto* kappa = with_config(app.add_subcommand("kappa", "Cohen's kappa between annotators"));
  auto* report = with_config(app.add_subcommand("report", "merge metric and rubric tables into reports/report.md"));
  auto* operators = app.add_subcommand("operators", "list the mutation operator catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ErrorClass::config);
  }

  try {
    if (operators->parsed()) return pipeline::cmd_operators(std::cout);
    const auto config = pipeline::load_config(config_path);
    if (generate->parsed()) return pipeline::cmd_generate(config, std::cout);
    if (split_cmd->parsed()) return pipeline::cmd_split(config, std::cout);
    if (prompt->parsed()) {
      return pipeline::cmd_prompt(config, llm::parse_method(method), model, parse_split(split), std::cout);
    }
    std::vector<fs::path> paths(files.begin(), files.end());
    if (eval->parsed()) return pipeline::cmd_eval(config, paths, std::cout);
    if (prefs->parsed()) {
      return pipeline::cmd_prefs(config, model, llm::parse_method(method), parse_split(split), std::cout);
    }
    if (orpo->parsed()) return pipeline::cmd_orpo_train(config, paths, std::cout);
    if (annotate->parsed()) {
      std::optional<bool> mode;
      if (blind) mode = true;
      if (unblind) mode = false;
      if (keys_file.empty()) return pipeline::cmd_annotate(config, annotator, std::cin, std::cout, mode);
      std::ifstream keys(keys_file);
      return pipeline::cmd_annotate(config, annotator, keys, std::cout, mode);
    }
    if (kappa->parsed()) return pipeline::cmd_kappa(config, std::cout);
    if (report->parsed()) return pipeline::cmd_report(config, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::data);
  }
  return 0;
}
