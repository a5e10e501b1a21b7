#include "ust/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ust/error.hpp"

namespace ust {

namespace {

SelectionTraceRow make_trace_row(int cls,
                                 const std::vector<ScoredCandidate>& cands,
                                 int budget) {
  SelectionTraceRow row;
  row.cls = cls;
  row.pool_size = cands.size();
  row.budget = budget;
  if (!cands.empty()) {
    std::vector<double> balds;
    balds.reserve(cands.size());
    for (const auto& c : cands) balds.push_back(c.est.bald);
    std::sort(balds.begin(), balds.end());
    row.bald_min = balds.front();
    row.bald_max = balds.back();
    row.bald_median = balds[balds.size() / 2];
  }
  return row;
}

std::vector<ScoredCandidate> draw_group(const std::vector<ScoredCandidate>& cands,
                                        const SelectionPolicy& policy,
                                        int budget, Rng& rng,
                                        SelectionTraceRow& row) {
  bool fellback = false, clamped = false;
  std::vector<double> weights =
      selection_weights(cands, policy.strategy, policy.use_raw_bald, &fellback);
  std::vector<ScoredCandidate> chosen =
      sample_without_replacement(cands, std::move(weights), budget, rng, &clamped);
  row.uniform_fallback = fellback;
  row.clamped = clamped;
  for (const auto& c : chosen) row.chosen_ids.push_back(c.id);
  return chosen;
}

}  // namespace

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kUniform: return "uniform";
    case Strategy::kEasy: return "easy";
    case Strategy::kHard: return "hard";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "uniform") return Strategy::kUniform;
  if (name == "easy") return Strategy::kEasy;
  if (name == "hard") return Strategy::kHard;
  throw_invalid("unknown selection strategy: " + name);
}

std::vector<std::vector<ScoredCandidate>> partition_by_label(
    const std::vector<ScoredCandidate>& pool, int num_classes) {
  std::vector<std::vector<ScoredCandidate>> parts(
      static_cast<std::size_t>(num_classes));
  for (const auto& cand : pool) {
    if (cand.est.hard_label < 0 || cand.est.hard_label >= num_classes) {
      throw_invalid("candidate hard label out of range");
    }
    parts[static_cast<std::size_t>(cand.est.hard_label)].push_back(cand);
  }
  return parts;
}

std::vector<double> selection_weights(const std::vector<ScoredCandidate>& cands,
                                      Strategy strategy, bool use_raw_bald,
                                      bool* fellback) {
  if (cands.empty()) throw_invalid("selection_weights on empty candidate list");
  if (fellback) *fellback = false;
  const std::size_t n = cands.size();
  std::vector<double> w(n);
  if (strategy == Strategy::kUniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
    return w;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double score =
        use_raw_bald ? cands[i].est.bald : cands[i].est.bald_norm;
    double v = strategy == Strategy::kEasy ? 1.0 - score : score;
    v = std::max(v, 0.0);  // raw mode can dip below 0 for C > 2
    w[i] = v;
    sum += v;
  }
  if (sum <= 0.0) {
    if (fellback) *fellback = true;
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
    return w;
  }
  for (double& v : w) v /= sum;
  return w;
}

std::vector<ScoredCandidate> sample_without_replacement(
    const std::vector<ScoredCandidate>& cands, std::vector<double> weights,
    int k, Rng& rng, bool* clamped) {
  if (weights.size() != cands.size()) throw_invalid("weights/candidates size mismatch");
  if (clamped) *clamped = false;
  if (k < 0) throw_invalid("negative sample count");
  if (static_cast<std::size_t>(k) > cands.size()) {
    k = static_cast<int>(cands.size());
    if (clamped) *clamped = true;
  }
  std::vector<std::size_t> remaining(cands.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});

  std::vector<ScoredCandidate> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int draw = 0; draw < k; ++draw) {
    double mass = 0.0;
    for (std::size_t i : remaining) mass += weights[i];
    std::size_t picked_pos = remaining.size() - 1;
    if (mass > 0.0) {
      const double u = rng.uniform() * mass;
      double acc = 0.0;
      for (std::size_t pos = 0; pos < remaining.size(); ++pos) {
        acc += weights[remaining[pos]];
        if (u < acc) {
          picked_pos = pos;
          break;
        }
      }
    } else {
      // Remaining mass exhausted; fall back to a uniform pick.
      picked_pos = static_cast<std::size_t>(rng.below(remaining.size()));
    }
    out.push_back(cands[remaining[picked_pos]]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(picked_pos));
  }
  return out;
}

std::vector<ScoredCandidate> select(const std::vector<ScoredCandidate>& pool,
                                    const SelectionPolicy& policy,
                                    int num_classes, Rng& rng,
                                    SelectionTrace* trace) {
  if (pool.empty()) {
    throw_data("empty candidate pool; self-training round must be skipped");
  }
  if (policy.budget < 1) throw_invalid("selection budget must be positive");

  if (!policy.class_dependent) {
    SelectionTraceRow row = make_trace_row(-1, pool, policy.budget);
    std::vector<ScoredCandidate> chosen =
        draw_group(pool, policy, policy.budget, rng, row);
    if (trace) trace->rows.push_back(std::move(row));
    return chosen;
  }

  const auto parts = partition_by_label(pool, num_classes);
  const std::size_t nc = static_cast<std::size_t>(num_classes);

  // floor(R/C) each, remainder one per class in ascending index.
  std::vector<int> budgets(nc, policy.budget / num_classes);
  for (int c = 0; c < policy.budget % num_classes; ++c) {
    budgets[static_cast<std::size_t>(c)] += 1;
  }

  // Clamp to pool sizes and redistribute shortfall proportionally to the
  // pool sizes of classes that still have spare candidates.
  for (;;) {
    long shortfall = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      const int cap = static_cast<int>(parts[c].size());
      if (budgets[c] > cap) {
        shortfall += budgets[c] - cap;
        budgets[c] = cap;
      }
    }
    if (shortfall == 0) break;
    std::vector<std::size_t> eligible;
    double cap_sum = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      if (budgets[c] < static_cast<int>(parts[c].size())) {
        eligible.push_back(c);
        cap_sum += static_cast<double>(parts[c].size());
      }
    }
    if (eligible.empty()) break;  // pool smaller than R; overall clamp
    std::vector<long> add(nc, 0);
    long given = 0;
    std::vector<std::pair<double, std::size_t>> remainders;
    for (std::size_t c : eligible) {
      const double quota = static_cast<double>(shortfall) *
                           static_cast<double>(parts[c].size()) / cap_sum;
      add[c] = static_cast<long>(std::floor(quota));
      given += add[c];
      remainders.emplace_back(quota - std::floor(quota), c);
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
              });
    for (std::size_t i = 0; given < shortfall && i < remainders.size(); ++i, ++given) {
      add[remainders[i].second] += 1;
    }
    for (std::size_t c = 0; c < nc; ++c) {
      budgets[c] += static_cast<int>(add[c]);
    }
  }

  std::vector<ScoredCandidate> chosen;
  for (std::size_t c = 0; c < nc; ++c) {
    SelectionTraceRow row =
        make_trace_row(static_cast<int>(c), parts[c], budgets[c]);
    if (!parts[c].empty() && budgets[c] > 0) {
      auto part_chosen = draw_group(parts[c], policy, budgets[c], rng, row);
      chosen.insert(chosen.end(), part_chosen.begin(), part_chosen.end());
    }
    if (trace) trace->rows.push_back(std::move(row));
  }
  return chosen;
}

}  // namespace ust
