#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ust/error.hpp"
#include "ust/selection.hpp"

using namespace ust;

namespace {

ScoredCandidate cand(std::int64_t id, double bald_norm, int label = 0,
                     double bald = -1.0) {
  ScoredCandidate c;
  c.id = id;
  c.est.bald_norm = bald_norm;
  c.est.bald = bald >= 0.0 ? bald : bald_norm;
  c.est.hard_label = label;
  return c;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::kUniform, Strategy::kEasy, Strategy::kHard}) {
    CHECK(strategy_from_name(strategy_name(s)) == s);
  }
  CHECK_THROWS_AS(strategy_from_name("bogus"), Error);
}

TEST_CASE("selection weight fixtures") {
  // easy ~ 1 - score, hard ~ score; scores 0.2 and 0.6
  const std::vector<ScoredCandidate> cands = {cand(1, 0.2), cand(2, 0.6)};
  const auto easy = selection_weights(cands, Strategy::kEasy, false);
  CHECK(easy[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(easy[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto hard = selection_weights(cands, Strategy::kHard, false);
  CHECK(hard[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(hard[1] == doctest::Approx(0.75).epsilon(1e-15));
  const auto uni = selection_weights(cands, Strategy::kUniform, false);
  CHECK(uni == std::vector<double>{0.5, 0.5});
}

TEST_CASE("zero-uncertainty easy weights are bitwise uniform") {
  // Required for the classic-vs-easy reduction when every score is 0.
  const std::vector<ScoredCandidate> cands = {cand(1, 0.0), cand(2, 0.0),
                                              cand(3, 0.0)};
  const auto easy = selection_weights(cands, Strategy::kEasy, false);
  const auto uni = selection_weights(cands, Strategy::kUniform, false);
  CHECK(easy == uni);
}

TEST_CASE("all-zero mass falls back to uniform and reports it") {
  const std::vector<ScoredCandidate> certain = {cand(1, 0.0), cand(2, 0.0)};
  bool fellback = false;
  const auto w = selection_weights(certain, Strategy::kHard, false, &fellback);
  CHECK(fellback);
  CHECK(w == std::vector<double>{0.5, 0.5});

  fellback = true;
  selection_weights(certain, Strategy::kEasy, false, &fellback);
  CHECK_FALSE(fellback);
}

TEST_CASE("raw mode weights by unnormalized scores") {
  const std::vector<ScoredCandidate> cands = {cand(1, 0.9, 0, 0.1),
                                              cand(2, 0.1, 0, 0.3)};
  const auto hard = selection_weights(cands, Strategy::kHard, true);
  CHECK(hard[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(hard[1] == doctest::Approx(0.75).epsilon(1e-12));
  // raw scores above 1 would push easy weights negative; they clamp at 0
  const std::vector<ScoredCandidate> over = {cand(1, 0.5, 0, 1.2),
                                             cand(2, 0.5, 0, 0.5)};
  const auto easy = selection_weights(over, Strategy::kEasy, true);
  CHECK(easy[0] == 0.0);
  CHECK(easy[1] == 1.0);
}

TEST_CASE("sampling without replacement basics") {
  std::vector<ScoredCandidate> cands;
  for (int i = 0; i < 10; ++i) cands.push_back(cand(i, 0.5));
  std::vector<double> w(10, 0.1);

  Rng r1(3), r2(3);
  const auto a = sample_without_replacement(cands, w, 6, r1);
  const auto b = sample_without_replacement(cands, w, 6, r2);
  REQUIRE(a.size() == 6);
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(ids.insert(a[i].id).second);
  }

  bool clamped = false;
  Rng r3(3);
  const auto all = sample_without_replacement(cands, w, 50, r3, &clamped);
  CHECK(clamped);
  CHECK(all.size() == 10);

  Rng r4(3);
  CHECK(sample_without_replacement(cands, w, 0, r4).empty());
  CHECK_THROWS_AS(sample_without_replacement(cands, {0.5}, 1, r4), Error);
}

TEST_CASE("zero-weight candidates lose to positive mass") {
  const std::vector<ScoredCandidate> cands = {cand(1, 0), cand(2, 0), cand(3, 0)};
  const std::vector<double> w = {0.0, 1.0, 0.0};
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto picked = sample_without_replacement(cands, w, 1, rng);
    CHECK(picked[0].id == 2);
  }
}

TEST_CASE("first-draw frequencies match the weights") {
  const std::vector<ScoredCandidate> cands = {cand(0, 0), cand(1, 0), cand(2, 0)};
  const std::vector<double> w = {0.5, 0.3, 0.2};
  const int n = 20000;
  int counts[3] = {0, 0, 0};
  Rng rng(99);
  for (int i = 0; i < n; ++i) {
    counts[sample_without_replacement(cands, w, 1, rng)[0].id]++;
  }
  for (int c = 0; c < 3; ++c) {
    const double p = w[static_cast<std::size_t>(c)];
    const double sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(counts[c] / double(n) - p) < 3.5 * sigma);
  }
}

TEST_CASE("partition by voted label covers the pool") {
  std::vector<ScoredCandidate> pool;
  for (int i = 0; i < 9; ++i) pool.push_back(cand(i, 0.5, i % 3));
  const auto parts = partition_by_label(pool, 3);
  REQUIRE(parts.size() == 3);
  std::size_t total = 0;
  for (const auto& p : parts) {
    total += p.size();
    CHECK(p.size() == 3);
  }
  CHECK(total == pool.size());
  pool.push_back(cand(100, 0.5, 5));
  CHECK_THROWS_AS(partition_by_label(pool, 3), Error);
}

TEST_CASE("class-dependent budgets split floor plus ascending remainder") {
  std::vector<ScoredCandidate> pool;
  for (int i = 0; i < 20; ++i) pool.push_back(cand(i, 0.5, i % 2));
  SelectionPolicy policy{Strategy::kUniform, true, 5, false};
  SelectionTrace trace;
  Rng rng(7);
  const auto chosen = select(pool, policy, 2, rng, &trace);
  CHECK(chosen.size() == 5);
  REQUIRE(trace.rows.size() == 2);
  CHECK(trace.rows[0].cls == 0);
  CHECK(trace.rows[0].budget == 3);  // 5 = 2+2 with remainder to class 0
  CHECK(trace.rows[1].budget == 2);
  CHECK(trace.rows[0].chosen_ids.size() == 3);
  for (auto id : trace.rows[0].chosen_ids) CHECK(id % 2 == 0);
}

TEST_CASE("class shortfall spills into classes with spare candidates") {
  std::vector<ScoredCandidate> pool;
  pool.push_back(cand(0, 0.5, 0));  // class 0 has a single candidate
  for (int i = 1; i <= 10; ++i) pool.push_back(cand(i, 0.5, 1));
  SelectionPolicy policy{Strategy::kUniform, true, 4, false};
  SelectionTrace trace;
  Rng rng(7);
  const auto chosen = select(pool, policy, 2, rng, &trace);
  CHECK(chosen.size() == 4);
  CHECK(trace.rows[0].budget == 1);
  CHECK(trace.rows[1].budget == 3);
}

TEST_CASE("pool smaller than the budget clamps the selection") {
  std::vector<ScoredCandidate> pool = {cand(0, 0.5, 0), cand(1, 0.5, 1),
                                       cand(2, 0.5, 1)};
  SelectionPolicy policy{Strategy::kEasy, true, 100, false};
  Rng rng(5);
  const auto chosen = select(pool, policy, 2, rng);
  CHECK(chosen.size() == 3);
}

TEST_CASE("global selection ignores labels") {
  std::vector<ScoredCandidate> pool;
  for (int i = 0; i < 12; ++i) pool.push_back(cand(i, 0.5, i % 2));
  SelectionPolicy policy{Strategy::kHard, false, 4, false};
  SelectionTrace trace;
  Rng rng(21);
  const auto chosen = select(pool, policy, 2, rng, &trace);
  CHECK(chosen.size() == 4);
  REQUIRE(trace.rows.size() == 1);
  CHECK(trace.rows[0].cls == -1);
  CHECK(trace.rows[0].pool_size == 12);
}

TEST_CASE("select is deterministic per rng seed and rejects bad input") {
  std::vector<ScoredCandidate> pool;
  for (int i = 0; i < 30; ++i) {
    pool.push_back(cand(i, (i % 10) / 10.0, i % 3));
  }
  SelectionPolicy policy{Strategy::kEasy, true, 9, false};
  Rng r1(8), r2(8);
  const auto a = select(pool, policy, 3, r1);
  const auto b = select(pool, policy, 3, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);

  Rng r3(8);
  CHECK_THROWS_AS(select({}, policy, 3, r3), Error);
  SelectionPolicy bad = policy;
  bad.budget = 0;
  CHECK_THROWS_AS(select(pool, bad, 3, r3), Error);
}

TEST_CASE("trace records the score distribution") {
  std::vector<ScoredCandidate> pool = {cand(0, 0.1, 0, 0.1), cand(1, 0.4, 0, 0.4),
                                       cand(2, 0.9, 0, 0.9)};
  SelectionPolicy policy{Strategy::kUniform, false, 2, false};
  SelectionTrace trace;
  Rng rng(2);
  select(pool, policy, 1, rng, &trace);
  REQUIRE(trace.rows.size() == 1);
  CHECK(trace.rows[0].bald_min == 0.1);
  CHECK(trace.rows[0].bald_median == 0.4);
  CHECK(trace.rows[0].bald_max == 0.9);
}
