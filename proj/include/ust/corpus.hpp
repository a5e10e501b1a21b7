#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ust/features.hpp"

namespace ust {

struct Corpus {
  std::vector<std::pair<std::string, int>> train;  // (text, label)
  std::vector<std::pair<std::string, int>> test;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

struct LoadStats {
  std::size_t parsed = 0;
  std::size_t skipped = 0;
};

// Loads a train file and an optional test file ("" to skip). Formats:
//   tsv  label<TAB>text, no quoting
//   csv  header "label,text", text is everything after the first comma
// Class indices follow first appearance order across train then test.
Corpus load_corpus(const std::string& train_path, const std::string& test_path,
                   const std::string& format, LoadStats* stats = nullptr);

void save_corpus_tsv(const Corpus& corpus, const std::string& train_path,
                     const std::string& test_path);

// Synthetic class-conditional vocabulary-mixture corpus. Each document mixes
// shared-pool words (probability vocab_overlap) with class-specific words.
struct GenConfig {
  int classes = 2;
  int train_size = 2000;
  int test_size = 1000;
  double vocab_overlap = 0.6;
  int shared_vocab = 150;
  int class_vocab = 80;
  std::uint64_t seed = 7;
};

Corpus generate_corpus(const GenConfig& cfg);

// ---- Few-shot splitting ----

struct Example {
  FeatureVec x;
  int label = 0;
};

// Unlabeled examples carry features and an id only; the true label lives in
// SplitDiagnostics and is not reachable from training code.
struct UnlabeledExample {
  std::int64_t id = 0;
  FeatureVec x;
};

struct FewShotSplit {
  int num_classes = 0;
  std::vector<Example> labeled;  // D_l, K per class
  std::vector<Example> valid;    // D_v, K per class
  std::vector<UnlabeledExample> unlabeled;
  std::vector<Example> test;
  // Manifest: corpus train indices behind each partition, for reproduction.
  std::vector<std::int64_t> labeled_ids, valid_ids;
};

struct SplitDiagnostics {
  std::vector<std::pair<std::int64_t, int>> unlabeled_labels;
};

// Seeded per-class shuffle; first K to D_l, next K to D_v, rest to D_u.
// Throws (naming the class) if any class has fewer than 2K train examples.
FewShotSplit few_shot_split(const Corpus& corpus, int k, std::uint64_t seed,
                            SplitDiagnostics* diag = nullptr);

}  // namespace ust
