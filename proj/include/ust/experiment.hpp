#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ust/corpus.hpp"
#include "ust/self_train.hpp"

namespace ust {

// Plan: flat key = value lines, '#' comments, comma-separated lists.
struct ExperimentPlan {
  std::string corpus_train;  // "synthetic" to use the generator
  std::string corpus_test;
  std::string format = "tsv";
  GenConfig gen;

  // Cell names: base | classic_st | ust_easy | ust_hard, with optional
  // ":noconf", ":nocd", ":raw" modifiers.
  std::vector<std::string> cells{"base", "classic_st", "ust_easy"};
  std::vector<int> k_values{30};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::uint64_t master_seed = 42;

  SelfTrainConfig overrides;  // shared training knobs for every cell
};

ExperimentPlan parse_plan(const std::string& text);
ExperimentPlan parse_plan_file(const std::string& path);

// Resolves a cell name against the plan's shared config.
SelfTrainConfig cell_config(const ExperimentPlan& plan,
                            const std::string& cell);

struct CellResult {
  std::string cell;
  int k = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double test_accuracy = 0.0;
  double macro_f1 = 0.0;
  double teacher_val_acc = 0.0;
  int best_round = 0;
  int test_touches = 0;  // single-touch audit
  std::vector<RoundRecord> rounds;
};

struct RunReport {
  std::vector<std::string> cells;
  std::vector<int> k_values;
  std::vector<std::uint64_t> seeds;
  std::vector<CellResult> results;

  bool all_ok() const;
  // Mean and std over seeds for one (cell, K); std is NaN with < 2 seeds.
  void aggregate(const std::string& cell, int k, double* mean,
                 double* stddev) const;
};

// Runs every (cell, K, seed) with randomness derived from
// (master_seed, K, seed); the split and teacher derivation is
// cell-independent so the base cell matches every cell's round 0. Failures
// are isolated per cell. out_dir may be empty to keep everything in memory.
RunReport run_plan(const ExperimentPlan& plan, const std::string& out_dir);

// Writes results.jsonl (machine-readable, deterministic byte-for-byte),
// report.txt (a "mean (std)" accuracy grid) and one per-round accuracy CSV
// per (cell, K).
void emit_report(const RunReport& report, const std::string& out_dir);

std::string render_report_table(const RunReport& report);
RunReport load_results(const std::string& results_path);

double macro_f1_score(const MlpModel& model, std::span<const Example> test);

}  // namespace ust
