#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ust/error.hpp"
#include "ust/uncertainty.hpp"

using namespace ust;

namespace {

PassMatrix make_pm(int classes, std::initializer_list<double> rows) {
  PassMatrix pm;
  pm.classes = classes;
  pm.probs.assign(rows.begin(), rows.end());
  pm.passes = static_cast<int>(pm.probs.size()) / classes;
  return pm;
}

PassMatrix random_pm(Rng& rng, int passes, int classes) {
  PassMatrix pm;
  pm.passes = passes;
  pm.classes = classes;
  for (int t = 0; t < passes; ++t) {
    std::vector<double> row(static_cast<std::size_t>(classes));
    double sum = 0.0;
    for (double& v : row) {
      v = -std::log(1.0 - rng.uniform());
      sum += v;
    }
    for (double v : row) pm.probs.push_back(v / sum);
  }
  return pm;
}

// Brute-force BALD: term-by-term, independent of the implementation path.
double bald_oracle(const PassMatrix& pm) {
  double first = 0.0;
  for (int c = 0; c < pm.classes; ++c) {
    double pbar = 0.0;
    for (int t = 0; t < pm.passes; ++t) pbar += pm.at(t, c);
    pbar /= pm.passes;
    if (pbar > 0.0) first -= pbar * std::log(pbar);
  }
  double second = 0.0;
  for (int t = 0; t < pm.passes; ++t) {
    for (int c = 0; c < pm.classes; ++c) {
      const double p = pm.at(t, c);
      if (p > 0.0) second += p * std::log(p);
    }
  }
  return first + second / pm.passes;
}

// Two-pass population variance oracle.
std::vector<double> variance_oracle(const PassMatrix& pm) {
  std::vector<double> var(static_cast<std::size_t>(pm.classes), 0.0);
  for (int c = 0; c < pm.classes; ++c) {
    double mean = 0.0;
    for (int t = 0; t < pm.passes; ++t) mean += pm.at(t, c);
    mean /= pm.passes;
    double acc = 0.0;
    for (int t = 0; t < pm.passes; ++t) {
      const double d = pm.at(t, c) - mean;
      acc += d * d;
    }
    var[static_cast<std::size_t>(c)] = acc / pm.passes;
  }
  return var;
}

}  // namespace

TEST_CASE("predictive mean basics") {
  const PassMatrix single = make_pm(2, {0.3, 0.7});
  CHECK(predictive_mean(single) == std::vector<double>{0.3, 0.7});

  const PassMatrix sym = make_pm(2, {1.0, 0.0, 0.0, 1.0});
  const auto m = predictive_mean(sym);
  CHECK(m[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m[1] == doctest::Approx(0.5).epsilon(1e-15));

  const PassMatrix two = make_pm(2, {0.2, 0.8, 0.6, 0.4});
  const auto m2 = predictive_mean(two);
  CHECK(m2[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(m2[1] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("predictive variance hand cases") {
  const PassMatrix same = make_pm(2, {0.3, 0.7, 0.3, 0.7, 0.3, 0.7});
  CHECK(predictive_variance(same) == std::vector<double>{0.0, 0.0});

  const PassMatrix two = make_pm(2, {0.2, 0.8, 0.8, 0.2});
  const auto v = predictive_variance(two);
  CHECK(v[0] == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.09).epsilon(1e-12));

  const PassMatrix extreme = make_pm(2, {1.0, 0.0, 0.0, 1.0});
  const auto ve = predictive_variance(extreme);
  CHECK(ve[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("bald hand cases") {
  const PassMatrix same = make_pm(3, {0.2, 0.5, 0.3, 0.2, 0.5, 0.3});
  CHECK(bald_score(same) == doctest::Approx(0.0).epsilon(1e-12));

  const PassMatrix disagree = make_pm(2, {1.0, 0.0, 0.0, 1.0});
  CHECK(bald_score(disagree) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const PassMatrix uniform = make_pm(4, {0.25, 0.25, 0.25, 0.25,
                                         0.25, 0.25, 0.25, 0.25});
  CHECK(bald_score(uniform) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bald oracle equivalence and bounds on random matrices") {
  Rng rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    const int passes = 1 + static_cast<int>(rng.below(8));
    const int classes = 2 + static_cast<int>(rng.below(4));
    const PassMatrix pm = random_pm(rng, passes, classes);
    const double b = bald_score(pm);
    const double oracle = bald_oracle(pm);
    CHECK(std::abs(b - std::clamp(oracle, 0.0, std::log(double(classes)))) < 1e-12);
    CHECK(b >= 0.0);
    CHECK(b <= std::log(static_cast<double>(classes)) + 1e-9);

    // B <= entropy of the predictive mean <= ln C
    const auto mean = predictive_mean(pm);
    double h_mean = 0.0;
    for (double p : mean) {
      if (p > 0.0) h_mean -= p * std::log(p);
    }
    CHECK(b <= h_mean + 1e-12);

    const auto var = predictive_variance(pm);
    const auto var_oracle = variance_oracle(pm);
    for (int c = 0; c < classes; ++c) {
      CHECK(var[c] >= 0.0);
      CHECK(std::abs(var[c] - var_oracle[c]) < 1e-12);
    }
  }
}

TEST_CASE("vote hard label majority and tie rules") {
  const PassMatrix maj = make_pm(2, {0.9, 0.1, 0.8, 0.2, 0.4, 0.6});
  auto [label, margin] = vote_hard_label(maj);
  CHECK(label == 0);
  CHECK(margin == doctest::Approx(2.0 / 3.0));

  const PassMatrix single = make_pm(3, {0.2, 0.5, 0.3});
  auto [l1, m1] = vote_hard_label(single);
  CHECK(l1 == 1);
  CHECK(m1 == 1.0);

  // votes {1,1,2,2} -> tie resolves to the lower class index
  const PassMatrix tie = make_pm(3, {0.1, 0.8, 0.1, 0.1, 0.8, 0.1,
                                     0.1, 0.1, 0.8, 0.1, 0.1, 0.8});
  auto [l2, m2] = vote_hard_label(tie);
  CHECK(l2 == 1);
  CHECK(m2 == doctest::Approx(0.5));

  // per-pass tie also resolves to the lower index
  const PassMatrix rowtie = make_pm(2, {0.5, 0.5});
  CHECK(vote_hard_label(rowtie).first == 0);
}

TEST_CASE("duplicating every row leaves all statistics unchanged") {
  Rng rng(505);
  for (int trial = 0; trial < 50; ++trial) {
    const PassMatrix pm = random_pm(rng, 1 + static_cast<int>(rng.below(6)),
                                    2 + static_cast<int>(rng.below(3)));
    PassMatrix doubled = pm;
    doubled.passes = 2 * pm.passes;
    doubled.probs.insert(doubled.probs.end(), pm.probs.begin(), pm.probs.end());

    const auto m1 = predictive_mean(pm);
    const auto m2 = predictive_mean(doubled);
    for (std::size_t c = 0; c < m1.size(); ++c) {
      CHECK(m1[c] == doctest::Approx(m2[c]).epsilon(1e-12));
    }
    const auto v1 = predictive_variance(pm);
    const auto v2 = predictive_variance(doubled);
    for (std::size_t c = 0; c < v1.size(); ++c) {
      CHECK(v1[c] == doctest::Approx(v2[c]).epsilon(1e-12));
    }
    CHECK(bald_score(pm) == doctest::Approx(bald_score(doubled)).epsilon(1e-12));
    CHECK(vote_hard_label(pm).first == vote_hard_label(doubled).first);
  }
}

TEST_CASE("run_passes determinism and zero-dropout degeneracy") {
  const MlpModel model = MlpModel::init(6, 4, 3, {0.0, 0.0}, 2);
  FeatureVec fv;
  fv.entries = {{0u, 0.6}, {4u, 0.8}};

  Rng r1(9), r2(9);
  const PassMatrix a = run_passes(model, fv, 5, r1);
  const PassMatrix b = run_passes(model, fv, 5, r2);
  CHECK(a.probs == b.probs);

  const auto det = forward_deterministic(model, fv);
  for (int t = 0; t < a.passes; ++t) {
    for (int c = 0; c < a.classes; ++c) CHECK(a.at(t, c) == det[c]);
  }
}

TEST_CASE("estimate composes the statistics; zero dropout is certain") {
  const MlpModel model = MlpModel::init(6, 4, 3, {0.0, 0.0}, 2);
  FeatureVec fv;
  fv.entries = {{1u, 1.0}};
  Rng rng(1);
  const UncertaintyEstimate est = estimate(model, fv, 30, rng);
  CHECK(est.bald == 0.0);
  for (double v : est.variance) CHECK(v == 0.0);
  const auto det = forward_deterministic(model, fv);
  int am = 0;
  for (int c = 1; c < 3; ++c) {
    if (det[c] > det[am]) am = c;
  }
  CHECK(est.hard_label == am);
  CHECK(est.vote_margin == 1.0);
  CHECK(est.bald_norm == est.bald / std::log(3.0));
}

TEST_CASE("stored pass matrix fixture matches independently computed statistics") {
  // 30x4 fixture generated by scripts/make_passmatrix_fixture.py, which also
  // recomputes the expected statistics with its own brute-force code.
  #include "fixtures/passmatrix_30x4.inc"
  PassMatrix pm;
  pm.passes = 30;
  pm.classes = 4;
  pm.probs.assign(std::begin(kFixtureProbs), std::end(kFixtureProbs));
  const UncertaintyEstimate est = summarize(pm);
  for (int c = 0; c < 4; ++c) {
    CHECK(est.mean[c] == doctest::Approx(kFixtureMean[c]).epsilon(1e-10));
    CHECK(est.variance[c] == doctest::Approx(kFixtureVariance[c]).epsilon(1e-10));
  }
  CHECK(est.bald == doctest::Approx(kFixtureBald).epsilon(1e-10));
  CHECK(est.hard_label == kFixtureHardLabel);
  CHECK(est.vote_margin == doctest::Approx(kFixtureVoteMargin).epsilon(1e-12));
}

TEST_CASE("invalid pass matrices are rejected") {
  PassMatrix bad;
  bad.passes = 1;
  bad.classes = 2;
  bad.probs = {0.9, 0.3};
  CHECK_THROWS_AS(predictive_mean(bad), Error);
  PassMatrix empty;
  CHECK_THROWS_AS(bald_score(empty), Error);
}

TEST_CASE("columnar dump has the fixed column order") {
  const PassMatrix pm = make_pm(2, {0.2, 0.8, 0.4, 0.6});
  std::vector<std::pair<std::int64_t, UncertaintyEstimate>> rows;
  rows.emplace_back(17, summarize(pm));
  std::ostringstream out;
  dump_estimates(out, rows);
  CHECK(out.str().rfind("id\tlabel\tmargin\tbald\tmax_variance\n17\t1\t1\t", 0) == 0);
}
