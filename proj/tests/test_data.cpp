#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "ust/corpus.hpp"
#include "ust/error.hpp"

using namespace ust;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/ust_test_" + name) {
    std::ofstream(path) << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("tsv loader assigns class indices by first appearance") {
  TempFile f("a.tsv", "pos\tgreat film\nneg\tterrible film\npos\tloved it\n");
  const Corpus corpus = load_corpus(f.path, "", "tsv");
  REQUIRE(corpus.num_classes() == 2);
  CHECK(corpus.class_names[0] == "pos");
  CHECK(corpus.class_names[1] == "neg");
  CHECK(corpus.train.size() == 3);
  CHECK(corpus.train[0].second == 0);
  CHECK(corpus.train[1].second == 1);
}

TEST_CASE("malformed lines are skipped and counted") {
  TempFile f("b.tsv", "pos\tok\nno_tab_here\nneg\tbad\n\npos\t\n");
  LoadStats stats;
  const Corpus corpus = load_corpus(f.path, "", "tsv", &stats);
  CHECK(corpus.train.size() == 2);
  CHECK(stats.parsed == 2);
  CHECK(stats.skipped == 2);  // "no_tab_here" and "pos\t" (missing text)
}

TEST_CASE("csv loader understands the label,text header") {
  TempFile f("c.csv", "label,text\npos,nice one\nneg,awful, truly\n");
  const Corpus corpus = load_corpus(f.path, "", "csv");
  REQUIRE(corpus.train.size() == 2);
  CHECK(corpus.train[1].first == "awful, truly");
}

TEST_CASE("loader errors: missing file, single class") {
  CHECK_THROWS_AS(load_corpus("/nonexistent/file.tsv", "", "tsv"), Error);
  TempFile f("d.tsv", "pos\tone\npos\ttwo\n");
  CHECK_THROWS_AS(load_corpus(f.path, "", "tsv"), Error);
}

TEST_CASE("generated corpus loads back with the declared shape") {
  GenConfig cfg;
  cfg.train_size = 2000;
  cfg.test_size = 500;
  const Corpus corpus = generate_corpus(cfg);
  CHECK(corpus.num_classes() == 2);
  CHECK(corpus.train.size() == 2000);
  CHECK(corpus.test.size() == 500);
  TempFile tr("gen.train.tsv", "");
  TempFile te("gen.test.tsv", "");
  save_corpus_tsv(corpus, tr.path, te.path);
  const Corpus again = load_corpus(tr.path, te.path, "tsv");
  CHECK(again.train.size() == 2000);
  CHECK(again.test.size() == 500);
  CHECK(again.num_classes() == 2);
}

TEST_CASE("generator is deterministic per seed") {
  GenConfig cfg;
  const Corpus a = generate_corpus(cfg);
  const Corpus b = generate_corpus(cfg);
  CHECK(a.train == b.train);
  cfg.seed += 1;
  const Corpus c = generate_corpus(cfg);
  CHECK(a.train != c.train);
}

TEST_CASE("few-shot split partitions the train set exactly") {
  GenConfig cfg;
  cfg.train_size = 400;
  cfg.test_size = 100;
  const Corpus corpus = generate_corpus(cfg);
  SplitDiagnostics diag;
  const FewShotSplit split = few_shot_split(corpus, 10, 123, &diag);

  CHECK(split.labeled.size() == 20);
  CHECK(split.valid.size() == 20);
  CHECK(split.unlabeled.size() == 400 - 40);
  CHECK(split.test.size() == 100);
  CHECK(diag.unlabeled_labels.size() == split.unlabeled.size());

  // pairwise disjoint, union = train
  std::set<std::int64_t> ids(split.labeled_ids.begin(), split.labeled_ids.end());
  for (auto id : split.valid_ids) CHECK(ids.insert(id).second);
  for (const auto& u : split.unlabeled) CHECK(ids.insert(u.id).second);
  CHECK(ids.size() == 400);

  // K per class in both labeled partitions
  for (const auto& part : {split.labeled, split.valid}) {
    int per_class[2] = {0, 0};
    for (const auto& ex : part) per_class[ex.label]++;
    CHECK(per_class[0] == 10);
    CHECK(per_class[1] == 10);
  }
}

TEST_CASE("different split seeds give different labeled sets") {
  GenConfig cfg;
  cfg.train_size = 1000;
  const Corpus corpus = generate_corpus(cfg);
  const FewShotSplit a = few_shot_split(corpus, 10, 1);
  const FewShotSplit b = few_shot_split(corpus, 10, 2);
  CHECK(a.labeled_ids != b.labeled_ids);
  const FewShotSplit a2 = few_shot_split(corpus, 10, 1);
  CHECK(a.labeled_ids == a2.labeled_ids);
}

TEST_CASE("split errors name the class with too few examples") {
  Corpus corpus;
  corpus.class_names = {"tiny", "big"};
  for (int i = 0; i < 3; ++i) corpus.train.emplace_back("a b c", 0);
  for (int i = 0; i < 50; ++i) corpus.train.emplace_back("d e f", 1);
  try {
    few_shot_split(corpus, 10, 7);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("tiny") != std::string::npos);
  }
}
