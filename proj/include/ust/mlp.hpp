#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ust/corpus.hpp"
#include "ust/features.hpp"
#include "ust/rng.hpp"

namespace ust {

// Two-layer feed-forward classifier: input D -> rectifier hidden H -> C-way
// softmax, with inverted dropout before the hidden layer and before the
// output layer. All math in double precision.
struct MlpModel {
  int input_dim = static_cast<int>(kHashDim);
  int hidden_dim = 128;
  int num_classes = 2;
  std::vector<double> dropout_rates{0.3, 0.5};  // {before hidden, before output}

  std::vector<double> w1;  // input_dim x hidden_dim, feature-major
  std::vector<double> b1;  // hidden_dim
  std::vector<double> w2;  // hidden_dim x num_classes, unit-major
  std::vector<double> b2;  // num_classes

  std::vector<int> layer_dims() const {
    return {input_dim, hidden_dim, num_classes};
  }

  // Centered uniform init scaled by 1/sqrt(fan_in), fixed by seed.
  static MlpModel init(int input_dim, int hidden_dim, int num_classes,
                       std::vector<double> dropout_rates, std::uint64_t seed);

  bool finite() const;
};

// Softmax of the network output with dropout disabled.
std::vector<double> forward_deterministic(const MlpModel& model,
                                          const FeatureVec& x);

// One pass with a fresh dropout mask drawn from rng. Layers with rate 0
// consume no rng state, so a rate-0 model reproduces the deterministic pass.
std::vector<double> forward_stochastic(const MlpModel& model,
                                       const FeatureVec& x, Rng& rng);

// Pre-activation of the hidden layer; rng == nullptr disables dropout.
// Exposed for the inverted-dropout expectation check.
std::vector<double> hidden_preactivation(const MlpModel& model,
                                         const FeatureVec& x, Rng* rng);

struct TrainExample {
  const FeatureVec* x = nullptr;
  int label = 0;
  double weight = 1.0;
};

// Mean of weight * (-log p(label|x)) over the batch; deterministic unless an
// rng is supplied.
double batch_loss(const MlpModel& model, std::span<const TrainExample> batch,
                  Rng* rng = nullptr);

// Batch gradients of batch_loss. w1 is a dense buffer with only the entries
// of `touched` feature columns nonzero.
struct Gradients {
  std::vector<double> w1, b1, w2, b2;
  std::vector<std::uint32_t> touched;
  std::vector<std::uint8_t> touched_flag;

  void resize_for(const MlpModel& model);
  void clear_touched(const MlpModel& model);
};

double compute_gradients(const MlpModel& model,
                         std::span<const TrainExample> batch, Rng* rng,
                         Gradients& grads);

// Adaptive-moment optimizer state. Input-layer moments are tracked per
// feature column and updated only for columns that have ever received
// gradient; an untouched column has zero moments and zero gradient, so the
// dense update would not move it either.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;

  std::vector<double> m_w1, v_w1, m_b1, v_b1, m_w2, v_w2, m_b2, v_b2;
  std::vector<std::uint32_t> active_features;
  std::vector<std::uint8_t> feature_active;

  Gradients scratch;

  static AdamState init(const MlpModel& model, double learning_rate = 1e-3);
};

// One optimizer step on the batch using a dropout-on pass; returns the
// pre-update loss. Throws on non-finite loss.
double train_step(MlpModel& model, AdamState& opt,
                  std::span<const TrainExample> batch, Rng& rng);

struct FitOptions {
  int epochs = 1;
  int batch_size = 32;
  int patience = 5;
  // Divide each mini-batch's weights by their batch mean (confident-learning
  // normalization). Batches of equal weights are left untouched.
  bool normalize_batch_weights = false;
};

// Shuffled mini-batch epochs with per-epoch deterministic validation loss;
// returns the snapshot with minimum validation loss, stopping early after
// `patience` epochs without improvement. Mutates `model` in place to the
// final-epoch state and returns the best snapshot.
MlpModel fit(MlpModel& model, AdamState& opt, std::vector<TrainExample> data,
             std::span<const TrainExample> valid, const FitOptions& options,
             Rng& rng);

double validation_loss(const MlpModel& model, std::span<const Example> examples);
double accuracy(const MlpModel& model, std::span<const Example> examples);

std::vector<TrainExample> as_train_examples(std::span<const Example> examples);

// Binary checkpoint; round-trips bitwise.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace ust
