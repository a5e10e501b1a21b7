#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "ust/mlp.hpp"

namespace ust {

// T stochastic softmax outputs for one example, row-major T x C.
struct PassMatrix {
  int passes = 0;   // T
  int classes = 0;  // C
  std::vector<double> probs;

  double at(int t, int c) const {
    return probs[static_cast<std::size_t>(t) * static_cast<std::size_t>(classes) +
                 static_cast<std::size_t>(c)];
  }
  void validate() const;
};

PassMatrix run_passes(const MlpModel& model, const FeatureVec& x, int passes,
                      Rng& rng);

// Column-wise mean of the pass probabilities.
std::vector<double> predictive_mean(const PassMatrix& pm);

// Per-class population variance of the pass probabilities, clamped at 0.
// Constant columns give exactly 0. The aleatoric noise term is taken as 0.
std::vector<double> predictive_variance(const PassMatrix& pm);

// Entropy of the mean prediction minus the mean per-pass entropy, natural
// log, clamped into [0, ln C].
double bald_score(const PassMatrix& pm);

// Majority vote over per-pass argmax; all ties break to the lowest class
// index. Returns (label, fraction of passes voting for it).
std::pair<int, double> vote_hard_label(const PassMatrix& pm);

struct UncertaintyEstimate {
  std::vector<double> mean;
  std::vector<double> variance;
  double bald = 0.0;
  double bald_norm = 0.0;  // bald / ln C
  int hard_label = 0;
  double vote_margin = 0.0;
};

UncertaintyEstimate summarize(const PassMatrix& pm);

UncertaintyEstimate estimate(const MlpModel& model, const FeatureVec& x,
                             int passes, Rng& rng);

// Columnar dump: example id, label, margin, bald, max variance.
void dump_estimates(
    std::ostream& out,
    std::span<const std::pair<std::int64_t, UncertaintyEstimate>> rows);

}  // namespace ust
