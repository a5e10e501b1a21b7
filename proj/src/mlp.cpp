#include "ust/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "ust/error.hpp"

namespace ust {

namespace {

constexpr char kModelMagic[8] = {'U', 'S', 'T', 'M', '0', '0', '0', '1'};

void check_input(const MlpModel& model, const FeatureVec& x) {
  for (const auto& [idx, val] : x.entries) {
    if (idx >= static_cast<std::uint32_t>(model.input_dim)) {
      throw_invalid("feature index " + std::to_string(idx) +
                    " out of range for input dim " +
                    std::to_string(model.input_dim));
    }
    (void)val;
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p[c] = std::exp(logits[c] - mx);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

int argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;  // ties keep the lowest index
}

// Per-example forward cache for backprop.
struct ForwardCache {
  std::vector<std::pair<std::uint32_t, double>> x_masked;  // after mask/scale
  std::vector<double> z1;         // hidden pre-activation
  std::vector<double> hidden;     // after relu, mask and scale
  std::vector<double> hid_scale;  // per-unit mask*scale (1 when dropout off)
  std::vector<double> probs;
};

void forward_into(const MlpModel& model, const FeatureVec& x, Rng* rng,
                  ForwardCache& cache) {
  const int h_dim = model.hidden_dim;
  const int c_dim = model.num_classes;
  const double p_in = model.dropout_rates[0];
  const double p_hid = model.dropout_rates[1];

  cache.x_masked.clear();
  if (rng != nullptr && p_in > 0.0) {
    const double scale = 1.0 / (1.0 - p_in);
    for (const auto& [idx, val] : x.entries) {
      if (!rng->bernoulli(p_in)) cache.x_masked.emplace_back(idx, val * scale);
    }
  } else {
    cache.x_masked.assign(x.entries.begin(), x.entries.end());
  }

  cache.z1.assign(static_cast<std::size_t>(h_dim), 0.0);
  for (const auto& [idx, val] : cache.x_masked) {
    const double* col = &model.w1[static_cast<std::size_t>(idx) *
                                  static_cast<std::size_t>(h_dim)];
    for (int h = 0; h < h_dim; ++h) cache.z1[static_cast<std::size_t>(h)] += val * col[h];
  }
  for (int h = 0; h < h_dim; ++h) {
    cache.z1[static_cast<std::size_t>(h)] += model.b1[static_cast<std::size_t>(h)];
  }

  cache.hidden.resize(static_cast<std::size_t>(h_dim));
  cache.hid_scale.resize(static_cast<std::size_t>(h_dim));
  if (rng != nullptr && p_hid > 0.0) {
    const double scale = 1.0 / (1.0 - p_hid);
    for (int h = 0; h < h_dim; ++h) {
      const double a = std::max(cache.z1[static_cast<std::size_t>(h)], 0.0);
      const double s = rng->bernoulli(p_hid) ? 0.0 : scale;
      cache.hid_scale[static_cast<std::size_t>(h)] = s;
      cache.hidden[static_cast<std::size_t>(h)] = a * s;
    }
  } else {
    for (int h = 0; h < h_dim; ++h) {
      cache.hid_scale[static_cast<std::size_t>(h)] = 1.0;
      cache.hidden[static_cast<std::size_t>(h)] =
          std::max(cache.z1[static_cast<std::size_t>(h)], 0.0);
    }
  }

  std::vector<double> logits(static_cast<std::size_t>(c_dim));
  for (int c = 0; c < c_dim; ++c) logits[static_cast<std::size_t>(c)] = model.b2[static_cast<std::size_t>(c)];
  for (int h = 0; h < h_dim; ++h) {
    const double a = cache.hidden[static_cast<std::size_t>(h)];
    if (a == 0.0) continue;
    const double* row = &model.w2[static_cast<std::size_t>(h) *
                                  static_cast<std::size_t>(c_dim)];
    for (int c = 0; c < c_dim; ++c) logits[static_cast<std::size_t>(c)] += a * row[c];
  }
  cache.probs = softmax(logits);
}

}  // namespace

MlpModel MlpModel::init(int input_dim, int hidden_dim, int num_classes,
                        std::vector<double> dropout_rates, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) throw_invalid("layer dims must be positive");
  if (num_classes < 2) throw_invalid("need at least 2 classes");
  if (dropout_rates.size() != 2) throw_invalid("expected 2 dropout rates");
  for (double p : dropout_rates) {
    if (p < 0.0 || p >= 1.0) throw_invalid("dropout rate must be in [0,1)");
  }
  MlpModel model;
  model.input_dim = input_dim;
  model.hidden_dim = hidden_dim;
  model.num_classes = num_classes;
  model.dropout_rates = std::move(dropout_rates);

  Rng rng(derive_seed(seed, {stream_tag("mlp-init")}));
  auto fill = [&](std::vector<double>& w, std::size_t n, int fan_in) {
    w.resize(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w) v = (2.0 * rng.uniform() - 1.0) * scale;
  };
  fill(model.w1,
       static_cast<std::size_t>(input_dim) * static_cast<std::size_t>(hidden_dim),
       input_dim);
  model.b1.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  fill(model.w2,
       static_cast<std::size_t>(hidden_dim) * static_cast<std::size_t>(num_classes),
       hidden_dim);
  model.b2.assign(static_cast<std::size_t>(num_classes), 0.0);
  return model;
}

bool MlpModel::finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
  };
  return ok(w1) && ok(b1) && ok(w2) && ok(b2);
}

std::vector<double> forward_deterministic(const MlpModel& model,
                                          const FeatureVec& x) {
  check_input(model, x);
  ForwardCache cache;
  forward_into(model, x, nullptr, cache);
  return cache.probs;
}

std::vector<double> forward_stochastic(const MlpModel& model,
                                       const FeatureVec& x, Rng& rng) {
  check_input(model, x);
  ForwardCache cache;
  forward_into(model, x, &rng, cache);
  return cache.probs;
}

std::vector<double> hidden_preactivation(const MlpModel& model,
                                         const FeatureVec& x, Rng* rng) {
  check_input(model, x);
  const double p_in = model.dropout_rates[0];
  std::vector<double> z1(static_cast<std::size_t>(model.hidden_dim), 0.0);
  for (const auto& [idx, val] : x.entries) {
    double v = val;
    if (rng != nullptr && p_in > 0.0) {
      if (rng->bernoulli(p_in)) continue;
      v *= 1.0 / (1.0 - p_in);
    }
    const double* col = &model.w1[static_cast<std::size_t>(idx) *
                                  static_cast<std::size_t>(model.hidden_dim)];
    for (int h = 0; h < model.hidden_dim; ++h) z1[static_cast<std::size_t>(h)] += v * col[h];
  }
  for (int h = 0; h < model.hidden_dim; ++h) z1[static_cast<std::size_t>(h)] += model.b1[static_cast<std::size_t>(h)];
  return z1;
}

double batch_loss(const MlpModel& model, std::span<const TrainExample> batch,
                  Rng* rng) {
  if (batch.empty()) throw_invalid("empty batch");
  ForwardCache cache;
  double total = 0.0;
  for (const auto& ex : batch) {
    if (ex.label < 0 || ex.label >= model.num_classes) {
      throw_invalid("label out of range");
    }
    check_input(model, *ex.x);
    forward_into(model, *ex.x, rng, cache);
    const double p = cache.probs[static_cast<std::size_t>(ex.label)];
    total += ex.weight * -std::log(std::max(p, 1e-300));
  }
  return total / static_cast<double>(batch.size());
}

void Gradients::resize_for(const MlpModel& model) {
  w1.assign(model.w1.size(), 0.0);
  b1.assign(model.b1.size(), 0.0);
  w2.assign(model.w2.size(), 0.0);
  b2.assign(model.b2.size(), 0.0);
  touched.clear();
  touched_flag.assign(static_cast<std::size_t>(model.input_dim), 0);
}

void Gradients::clear_touched(const MlpModel& model) {
  const std::size_t h_dim = static_cast<std::size_t>(model.hidden_dim);
  for (std::uint32_t f : touched) {
    std::fill_n(&w1[static_cast<std::size_t>(f) * h_dim], h_dim, 0.0);
    touched_flag[f] = 0;
  }
  touched.clear();
}

double compute_gradients(const MlpModel& model,
                         std::span<const TrainExample> batch, Rng* rng,
                         Gradients& grads) {
  if (batch.empty()) throw_invalid("empty batch");
  if (grads.w1.size() != model.w1.size()) grads.resize_for(model);
  std::fill(grads.b1.begin(), grads.b1.end(), 0.0);
  std::fill(grads.w2.begin(), grads.w2.end(), 0.0);
  std::fill(grads.b2.begin(), grads.b2.end(), 0.0);

  const int h_dim = model.hidden_dim;
  const int c_dim = model.num_classes;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  ForwardCache cache;
  std::vector<double> dz2(static_cast<std::size_t>(c_dim));
  std::vector<double> dz1(static_cast<std::size_t>(h_dim));
  double total = 0.0;

  for (const auto& ex : batch) {
    if (ex.label < 0 || ex.label >= c_dim) throw_invalid("label out of range");
    check_input(model, *ex.x);
    forward_into(model, *ex.x, rng, cache);
    const double p = cache.probs[static_cast<std::size_t>(ex.label)];
    total += ex.weight * -std::log(std::max(p, 1e-300));

    const double coeff = ex.weight * inv_batch;
    for (int c = 0; c < c_dim; ++c) {
      dz2[static_cast<std::size_t>(c)] =
          coeff * (cache.probs[static_cast<std::size_t>(c)] -
                   (c == ex.label ? 1.0 : 0.0));
    }
    for (int c = 0; c < c_dim; ++c) grads.b2[static_cast<std::size_t>(c)] += dz2[static_cast<std::size_t>(c)];
    for (int h = 0; h < h_dim; ++h) {
      const double a = cache.hidden[static_cast<std::size_t>(h)];
      double dh = 0.0;
      const double* row = &model.w2[static_cast<std::size_t>(h) *
                                    static_cast<std::size_t>(c_dim)];
      double* grow = &grads.w2[static_cast<std::size_t>(h) *
                               static_cast<std::size_t>(c_dim)];
      for (int c = 0; c < c_dim; ++c) {
        grow[c] += a * dz2[static_cast<std::size_t>(c)];
        dh += row[c] * dz2[static_cast<std::size_t>(c)];
      }
      // relu gate, then the dropout mask and inverted scale.
      dz1[static_cast<std::size_t>(h)] =
          cache.z1[static_cast<std::size_t>(h)] > 0.0
              ? dh * cache.hid_scale[static_cast<std::size_t>(h)]
              : 0.0;
    }
    for (int h = 0; h < h_dim; ++h) grads.b1[static_cast<std::size_t>(h)] += dz1[static_cast<std::size_t>(h)];
    for (const auto& [idx, val] : cache.x_masked) {
      if (!grads.touched_flag[idx]) {
        grads.touched_flag[idx] = 1;
        grads.touched.push_back(idx);
      }
      double* col = &grads.w1[static_cast<std::size_t>(idx) *
                              static_cast<std::size_t>(h_dim)];
      for (int h = 0; h < h_dim; ++h) col[h] += val * dz1[static_cast<std::size_t>(h)];
    }
  }
  return total * inv_batch;
}

AdamState AdamState::init(const MlpModel& model, double learning_rate) {
  AdamState opt;
  opt.learning_rate = learning_rate;
  opt.m_w1.assign(model.w1.size(), 0.0);
  opt.v_w1.assign(model.w1.size(), 0.0);
  opt.m_b1.assign(model.b1.size(), 0.0);
  opt.v_b1.assign(model.b1.size(), 0.0);
  opt.m_w2.assign(model.w2.size(), 0.0);
  opt.v_w2.assign(model.w2.size(), 0.0);
  opt.m_b2.assign(model.b2.size(), 0.0);
  opt.v_b2.assign(model.b2.size(), 0.0);
  opt.feature_active.assign(static_cast<std::size_t>(model.input_dim), 0);
  return opt;
}

double train_step(MlpModel& model, AdamState& opt,
                  std::span<const TrainExample> batch, Rng& rng) {
  for (const auto& ex : batch) {
    if (!(ex.weight >= 0.0) || !std::isfinite(ex.weight)) {
      throw_invalid("sample weight must be finite and nonnegative");
    }
  }
  const double loss = compute_gradients(model, batch, &rng, opt.scratch);
  if (!std::isfinite(loss)) {
    throw_numeric("non-finite training loss; learning rate likely too high");
  }

  opt.step += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  const double lr = opt.learning_rate;
  const double b1 = opt.beta1, b2 = opt.beta2, eps = opt.epsilon;

  // Non-finite values propagate through the sum of updated parameters, so
  // the post-step check only has to look at the checksum; parameters this
  // step does not touch were finite before and stay unchanged.
  double checksum = 0.0;
  auto update = [&](double* w, double* m, double* v, const double* g,
                    std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
      checksum += w[i];
    }
  };

  for (std::uint32_t f : opt.scratch.touched) {
    if (!opt.feature_active[f]) {
      opt.feature_active[f] = 1;
      opt.active_features.push_back(f);
    }
  }
  const std::size_t h_dim = static_cast<std::size_t>(model.hidden_dim);
  for (std::uint32_t f : opt.active_features) {
    const std::size_t off = static_cast<std::size_t>(f) * h_dim;
    update(&model.w1[off], &opt.m_w1[off], &opt.v_w1[off],
           &opt.scratch.w1[off], h_dim);
  }
  update(model.b1.data(), opt.m_b1.data(), opt.v_b1.data(),
         opt.scratch.b1.data(), model.b1.size());
  update(model.w2.data(), opt.m_w2.data(), opt.v_w2.data(),
         opt.scratch.w2.data(), model.w2.size());
  update(model.b2.data(), opt.m_b2.data(), opt.v_b2.data(),
         opt.scratch.b2.data(), model.b2.size());

  opt.scratch.clear_touched(model);

  if (!std::isfinite(checksum)) {
    throw_numeric("non-finite parameters after optimizer step");
  }
  return loss;
}

MlpModel fit(MlpModel& model, AdamState& opt, std::vector<TrainExample> data,
             std::span<const TrainExample> valid, const FitOptions& options,
             Rng& rng) {
  if (options.epochs < 1) throw_invalid("epochs must be >= 1");
  if (options.batch_size < 1) throw_invalid("batch_size must be >= 1");
  if (data.empty()) throw_invalid("empty training set");
  if (valid.empty()) throw_invalid("empty validation set");

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  MlpModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  const int stop_after = std::max(options.patience, 1);

  std::vector<TrainExample> batch;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(options.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      if (options.normalize_batch_weights) {
        double lo = batch[0].weight, hi = batch[0].weight, sum = 0.0;
        for (const auto& ex : batch) {
          lo = std::min(lo, ex.weight);
          hi = std::max(hi, ex.weight);
          sum += ex.weight;
        }
        const double mean = sum / static_cast<double>(batch.size());
        // Equal weights normalize to exactly 1; zero mass is left as-is.
        if (lo != hi && mean > 0.0) {
          for (auto& ex : batch) ex.weight /= mean;
        } else if (lo == hi && lo > 0.0) {
          for (auto& ex : batch) ex.weight = 1.0;
        }
      }
      train_step(model, opt, batch, rng);
    }
    double vloss = batch_loss(model, valid, nullptr);
    if (vloss < best_loss) {
      best_loss = vloss;
      best = model;
      bad_epochs = 0;
    } else {
      bad_epochs += 1;
      if (bad_epochs >= stop_after) break;
    }
  }
  return best;
}

double validation_loss(const MlpModel& model,
                       std::span<const Example> examples) {
  std::vector<TrainExample> batch = as_train_examples(examples);
  return batch_loss(model, batch, nullptr);
}

double accuracy(const MlpModel& model, std::span<const Example> examples) {
  if (examples.empty()) throw_invalid("empty evaluation set");
  std::size_t correct = 0;
  ForwardCache cache;
  for (const auto& ex : examples) {
    forward_into(model, ex.x, nullptr, cache);
    if (argmax(cache.probs) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

std::vector<TrainExample> as_train_examples(std::span<const Example> examples) {
  std::vector<TrainExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back({&ex.x, ex.label, 1.0});
  return out;
}

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write model checkpoint: " + path);
  out.write(kModelMagic, sizeof(kModelMagic));
  const std::int32_t dims[3] = {model.input_dim, model.hidden_dim,
                                model.num_classes};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const std::int32_t n_drop = static_cast<std::int32_t>(model.dropout_rates.size());
  out.write(reinterpret_cast<const char*>(&n_drop), sizeof(n_drop));
  auto write_vec = [&](const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  write_vec(model.dropout_rates);
  write_vec(model.w1);
  write_vec(model.b1);
  write_vec(model.w2);
  write_vec(model.b2);
  if (!out) throw_io("failed writing model checkpoint: " + path);
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open model checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw_data("not a model checkpoint: " + path);
  }
  std::int32_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  std::int32_t n_drop = 0;
  in.read(reinterpret_cast<char*>(&n_drop), sizeof(n_drop));
  if (!in || dims[0] < 1 || dims[1] < 1 || dims[2] < 2 || n_drop != 2) {
    throw_data("corrupt model checkpoint: " + path);
  }
  MlpModel model;
  model.input_dim = dims[0];
  model.hidden_dim = dims[1];
  model.num_classes = dims[2];
  auto read_vec = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  };
  read_vec(model.dropout_rates, static_cast<std::size_t>(n_drop));
  read_vec(model.w1, static_cast<std::size_t>(dims[0]) *
                         static_cast<std::size_t>(dims[1]));
  read_vec(model.b1, static_cast<std::size_t>(dims[1]));
  read_vec(model.w2, static_cast<std::size_t>(dims[1]) *
                         static_cast<std::size_t>(dims[2]));
  read_vec(model.b2, static_cast<std::size_t>(dims[2]));
  if (!in) throw_data("truncated model checkpoint: " + path);
  return model;
}

}  // namespace ust
