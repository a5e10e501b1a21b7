#include "ust/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "ust/error.hpp"

namespace ust {

namespace {

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

}  // namespace

void PassMatrix::validate() const {
  if (passes < 1) throw_invalid("PassMatrix needs at least one pass");
  if (classes < 2) throw_invalid("PassMatrix needs at least two classes");
  if (probs.size() != static_cast<std::size_t>(passes) *
                          static_cast<std::size_t>(classes)) {
    throw_invalid("PassMatrix shape mismatch");
  }
  for (int t = 0; t < passes; ++t) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      const double p = at(t, c);
      if (p < 0.0 || p > 1.0) throw_invalid("PassMatrix entry outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw_invalid("PassMatrix row does not sum to 1");
    }
  }
}

PassMatrix run_passes(const MlpModel& model, const FeatureVec& x, int passes,
                      Rng& rng) {
  if (passes < 1) throw_invalid("need at least one stochastic pass");
  PassMatrix pm;
  pm.passes = passes;
  pm.classes = model.num_classes;
  pm.probs.reserve(static_cast<std::size_t>(passes) *
                   static_cast<std::size_t>(model.num_classes));
  for (int t = 0; t < passes; ++t) {
    const std::vector<double> p = forward_stochastic(model, x, rng);
    pm.probs.insert(pm.probs.end(), p.begin(), p.end());
  }
  return pm;
}

std::vector<double> predictive_mean(const PassMatrix& pm) {
  pm.validate();
  std::vector<double> mean(static_cast<std::size_t>(pm.classes), 0.0);
  for (int t = 0; t < pm.passes; ++t) {
    for (int c = 0; c < pm.classes; ++c) {
      mean[static_cast<std::size_t>(c)] += pm.at(t, c);
    }
  }
  for (double& v : mean) v /= static_cast<double>(pm.passes);
  return mean;
}

std::vector<double> predictive_variance(const PassMatrix& pm) {
  pm.validate();
  const std::vector<double> mean = predictive_mean(pm);
  std::vector<double> var(static_cast<std::size_t>(pm.classes), 0.0);
  for (int c = 0; c < pm.classes; ++c) {
    double lo = pm.at(0, c), hi = pm.at(0, c);
    double acc = 0.0;
    for (int t = 0; t < pm.passes; ++t) {
      const double p = pm.at(t, c);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
      const double d = p - mean[static_cast<std::size_t>(c)];
      acc += d * d;
    }
    // A constant column is exactly zero-variance regardless of rounding.
    var[static_cast<std::size_t>(c)] =
        lo == hi ? 0.0
                 : std::max(acc / static_cast<double>(pm.passes), 0.0);
  }
  return var;
}

double bald_score(const PassMatrix& pm) {
  pm.validate();
  // Identical passes carry no disagreement; short-circuit to an exact 0
  // instead of letting the entropy difference round to +/- a few ulps.
  bool constant = true;
  for (int c = 0; c < pm.classes && constant; ++c) {
    for (int t = 1; t < pm.passes; ++t) {
      if (pm.at(t, c) != pm.at(0, c)) {
        constant = false;
        break;
      }
    }
  }
  if (constant) return 0.0;
  const std::vector<double> mean = predictive_mean(pm);
  double mean_entropy = 0.0;
  for (double p : mean) mean_entropy -= xlogx(p);
  double pass_term = 0.0;
  for (int t = 0; t < pm.passes; ++t) {
    for (int c = 0; c < pm.classes; ++c) pass_term += xlogx(pm.at(t, c));
  }
  pass_term /= static_cast<double>(pm.passes);
  const double bald = mean_entropy + pass_term;
  const double cap = std::log(static_cast<double>(pm.classes));
  return std::clamp(bald, 0.0, cap);
}

std::pair<int, double> vote_hard_label(const PassMatrix& pm) {
  pm.validate();
  std::vector<int> votes(static_cast<std::size_t>(pm.classes), 0);
  for (int t = 0; t < pm.passes; ++t) {
    int best = 0;
    for (int c = 1; c < pm.classes; ++c) {
      if (pm.at(t, c) > pm.at(t, best)) best = c;
    }
    votes[static_cast<std::size_t>(best)] += 1;
  }
  int label = 0;
  for (int c = 1; c < pm.classes; ++c) {
    if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(label)]) {
      label = c;
    }
  }
  const double margin = static_cast<double>(votes[static_cast<std::size_t>(label)]) /
                        static_cast<double>(pm.passes);
  return {label, margin};
}

UncertaintyEstimate summarize(const PassMatrix& pm) {
  UncertaintyEstimate est;
  est.mean = predictive_mean(pm);
  est.variance = predictive_variance(pm);
  est.bald = bald_score(pm);
  est.bald_norm = est.bald / std::log(static_cast<double>(pm.classes));
  const auto [label, margin] = vote_hard_label(pm);
  est.hard_label = label;
  est.vote_margin = margin;
  return est;
}

UncertaintyEstimate estimate(const MlpModel& model, const FeatureVec& x,
                             int passes, Rng& rng) {
  return summarize(run_passes(model, x, passes, rng));
}

void dump_estimates(
    std::ostream& out,
    std::span<const std::pair<std::int64_t, UncertaintyEstimate>> rows) {
  out << "id\tlabel\tmargin\tbald\tmax_variance\n";
  for (const auto& [id, est] : rows) {
    const double max_var =
        est.variance.empty()
            ? 0.0
            : *std::max_element(est.variance.begin(), est.variance.end());
    out << id << '\t' << est.hard_label << '\t' << est.vote_margin << '\t'
        << est.bald << '\t' << max_var << '\n';
  }
}

}  // namespace ust
