#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ust/rng.hpp"
#include "ust/uncertainty.hpp"

namespace ust {

enum class Strategy { kUniform, kEasy, kHard };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct SelectionPolicy {
  Strategy strategy = Strategy::kEasy;
  bool class_dependent = true;
  int budget = 0;  // R
  // Weight by raw BALD instead of bald/ln C; only sensible for C=2 where
  // raw scores stay below 1.
  bool use_raw_bald = false;
};

struct ScoredCandidate {
  std::int64_t id = 0;
  UncertaintyEstimate est;
};

// Per-class trace row for one selection round.
struct SelectionTraceRow {
  int cls = -1;  // -1 for a global (non class-dependent) draw
  std::size_t pool_size = 0;
  int budget = 0;
  bool uniform_fallback = false;
  bool clamped = false;
  double bald_min = 0.0, bald_median = 0.0, bald_max = 0.0;
  std::vector<std::int64_t> chosen_ids;
};

struct SelectionTrace {
  std::vector<SelectionTraceRow> rows;
};

// Disjoint cover of the pool keyed by voted hard label.
std::vector<std::vector<ScoredCandidate>> partition_by_label(
    const std::vector<ScoredCandidate>& pool, int num_classes);

// easy: weights proportional to 1 - score; hard: proportional to score;
// uniform: constant. Score is bald_norm (or raw bald when use_raw_bald).
// All-zero mass falls back to uniform; *fellback reports it when non-null.
std::vector<double> selection_weights(const std::vector<ScoredCandidate>& cands,
                                      Strategy strategy, bool use_raw_bald,
                                      bool* fellback = nullptr);

// k successive weighted draws with renormalization; k is clamped to the
// candidate count (*clamped reports it when non-null).
std::vector<ScoredCandidate> sample_without_replacement(
    const std::vector<ScoredCandidate>& cands, std::vector<double> weights,
    int k, Rng& rng, bool* clamped = nullptr);

// Full selection for one round. Class-dependent budgets are floor(R/C) with
// the remainder spread one per class in ascending index; class shortfalls
// are redistributed to the remaining classes proportionally to pool size.
// Throws on an empty pool (the round must be skipped).
std::vector<ScoredCandidate> select(const std::vector<ScoredCandidate>& pool,
                                    const SelectionPolicy& policy,
                                    int num_classes, Rng& rng,
                                    SelectionTrace* trace = nullptr);

}  // namespace ust
