// Experiment CLI; talks to the core through the C API only.

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ust.h"

namespace {

int fail(const char* what) {
  std::fprintf(stderr, "error: %s: %s\n", what, ust_last_error());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware self-training for few-shot text classification"};
  app.require_subcommand(1);

  // ---- run ----
  auto* run = app.add_subcommand("run", "Run an experiment plan");
  std::string plan_path, out_dir = "ust_out";
  std::string corpus_path, corpus_test_path, format = "tsv";
  std::string cells = "base,classic_st,ust_easy";
  std::string k_list = "30", seed_list = "1,2,3,4,5";
  std::uint64_t master_seed = 42;
  int t_passes = 30, su_size = 16384, budget_r = 4096, iterations = 25;
  bool synthetic = false;
  int gen_classes = 2, gen_train = 2000, gen_test = 1000;
  double gen_overlap = 0.6;
  std::uint64_t gen_seed = 7;
  run->add_option("--plan", plan_path, "Plan file (overrides all other flags)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--corpus", corpus_path, "Train corpus file");
  run->add_option("--corpus-test", corpus_test_path, "Test corpus file");
  run->add_option("--format", format, "Corpus format: tsv or csv");
  run->add_flag("--synthetic", synthetic, "Use the bundled synthetic corpus");
  run->add_option("--gen-classes", gen_classes, "Synthetic: classes");
  run->add_option("--gen-train", gen_train, "Synthetic: train size");
  run->add_option("--gen-test", gen_test, "Synthetic: test size");
  run->add_option("--gen-overlap", gen_overlap, "Synthetic: vocab overlap");
  run->add_option("--gen-seed", gen_seed, "Synthetic: generator seed");
  run->add_option("--cells", cells, "Comma list of cells (base, classic_st, ust_easy, ust_hard; modifiers :noconf :nocd :raw)");
  run->add_option("--K", k_list, "Comma list of K values");
  run->add_option("--seeds", seed_list, "Comma list of seeds");
  run->add_option("--master-seed", master_seed, "Master seed");
  run->add_option("--T", t_passes, "Stochastic passes per example");
  run->add_option("--S-u", su_size, "Unlabeled mini-pool per round");
  run->add_option("--R", budget_r, "Selected per round");
  run->add_option("--iterations", iterations, "Max self-training rounds");

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "Emit a synthetic corpus as TSV");
  std::string gen_out = "toy";
  gen->add_option("--classes", gen_classes, "Number of classes");
  gen->add_option("--train", gen_train, "Train examples");
  gen->add_option("--test", gen_test, "Test examples");
  gen->add_option("--overlap", gen_overlap, "Shared-vocabulary probability");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output prefix (<out>.train.tsv, <out>.test.tsv)");

  // ---- report ----
  auto* rep = app.add_subcommand("report", "Re-render report from a results file");
  std::string results_path, report_out = "ust_report";
  rep->add_option("--results", results_path, "results.jsonl path")->required();
  rep->add_option("--out", report_out, "Output directory");

  // ---- inspect ----
  auto* ins = app.add_subcommand("inspect", "Dump a run directory's traces");
  std::string run_dir;
  ins->add_option("--run", run_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    if (!plan_path.empty()) {
      if (ust_run_plan_file(plan_path.c_str(), out_dir.c_str()) != UST_OK) {
        return fail("run");
      }
    } else {
      std::ostringstream plan;
      if (synthetic || corpus_path.empty()) {
        plan << "corpus = synthetic\n"
             << "gen_classes = " << gen_classes << "\n"
             << "gen_train = " << gen_train << "\n"
             << "gen_test = " << gen_test << "\n"
             << "gen_overlap = " << gen_overlap << "\n"
             << "gen_seed = " << gen_seed << "\n";
      } else {
        plan << "corpus = " << corpus_path << "\n"
             << "format = " << format << "\n";
        if (!corpus_test_path.empty()) {
          plan << "corpus_test = " << corpus_test_path << "\n";
        }
      }
      plan << "cells = " << cells << "\n"
           << "K = " << k_list << "\n"
           << "seeds = " << seed_list << "\n"
           << "master_seed = " << master_seed << "\n"
           << "T = " << t_passes << "\n"
           << "S_u = " << su_size << "\n"
           << "R = " << budget_r << "\n"
           << "iterations = " << iterations << "\n";
      if (ust_run_plan_text(plan.str().c_str(), out_dir.c_str()) != UST_OK) {
        return fail("run");
      }
    }
    std::printf("report written to %s\n", out_dir.c_str());
    return 0;
  }

  if (gen->parsed()) {
    ust_corpus* corpus = nullptr;
    if (ust_corpus_generate(gen_classes, gen_train, gen_test, gen_overlap,
                            gen_seed, &corpus) != UST_OK) {
      return fail("gen-data");
    }
    const std::string train_path = gen_out + ".train.tsv";
    const std::string test_path = gen_out + ".test.tsv";
    if (ust_corpus_save_tsv(corpus, train_path.c_str(), test_path.c_str()) !=
        UST_OK) {
      ust_corpus_free(corpus);
      return fail("gen-data");
    }
    ust_corpus_free(corpus);
    std::printf("wrote %s and %s\n", train_path.c_str(), test_path.c_str());
    return 0;
  }

  if (rep->parsed()) {
    if (ust_render_report(results_path.c_str(), report_out.c_str()) != UST_OK) {
      return fail("report");
    }
    std::printf("report written to %s\n", report_out.c_str());
    return 0;
  }

  if (ins->parsed()) {
    char* text = nullptr;
    if (ust_inspect_run(run_dir.c_str(), &text) != UST_OK) {
      return fail("inspect");
    }
    std::fputs(text, stdout);
    ust_string_free(text);
    return 0;
  }
  return 0;
}
