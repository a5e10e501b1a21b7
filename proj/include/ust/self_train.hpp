#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ust/corpus.hpp"
#include "ust/mlp.hpp"
#include "ust/selection.hpp"

namespace ust {

struct SelfTrainConfig {
  int k = 30;              // labeled examples per class (train and validation)
  int passes = 30;         // T
  int su_size = 16384;     // unlabeled mini-pool per round
  int budget_r = 4096;     // selected per round
  int st_iterations = 25;  // max rounds

  int teacher_epochs = 50;
  int student_epochs = 25;
  int teacher_batch = 4;
  int student_batch = 32;
  int teacher_patience = 5;  // fit-level early stop, epochs
  int student_patience = 3;
  int patience = 5;  // round-level early stop on validation loss

  Strategy strategy = Strategy::kEasy;
  bool class_dependent = true;
  bool use_raw_bald = false;
  bool confident_learning = true;
  bool include_labeled_in_student = false;
  double lambda_labeled = 1.0;
  bool student_fresh_init = false;
  bool record_round_test_metrics = false;

  int hidden_dim = 128;
  double dropout_input = 0.3;
  double dropout_output = 0.5;  // softmax dropout
  double learning_rate = 1e-3;

  std::uint64_t seed = 42;

  void validate() const;
  SelectionPolicy policy() const {
    return {strategy, class_dependent, budget_r, use_raw_bald};
  }
};

struct RoundRecord {
  int round = 0;  // consecutive from 1
  bool skipped = false;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = -1.0;  // diagnostic only; -1 when not recorded
  std::vector<int> selected_per_class;
  double mean_bald = 0.0;
  double mean_conf_weight = 0.0;
};

struct SelfTrainResult {
  MlpModel model;  // best-validation model across teacher and all rounds
  std::vector<RoundRecord> records;
  int best_round = 0;  // 0 = teacher
  double teacher_val_loss = 0.0;
  double teacher_val_acc = 0.0;
  double best_val_loss = 0.0;
};

// Confident-learning sample weight: ln(1 + 1/(v + eps))
// with v the predictive variance at the voted class. Returns 1 when
// confident learning is off.
double confidence_weight(const UncertaintyEstimate& est,
                         bool confident_learning);

// Fine-tunes a fresh model on D_l (small batches, best validation
// checkpoint). opt may be null when the caller does not need the state.
MlpModel train_teacher(const FewShotSplit& split, const SelfTrainConfig& cfg,
                       AdamState* opt_out = nullptr);

// Full loop: teacher, then up to st_iterations rounds of mini-pool
// uncertainty estimation, selection, pseudo-labeling and student retraining.
// When run_dir is nonempty writes config snapshot, round log, selection
// traces, split manifest and the final model there.
SelfTrainResult run_self_training(const FewShotSplit& split,
                                  const SelfTrainConfig& cfg,
                                  const std::string& run_dir = "");

std::string config_to_json(const SelfTrainConfig& cfg);
SelfTrainConfig config_from_json(const std::string& json_text);

}  // namespace ust
