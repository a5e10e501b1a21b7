#include "ust/self_train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ust/error.hpp"

namespace ust {

namespace {

constexpr double kVarianceEpsilon = 1e-6;

constexpr std::uint64_t kTagTeacher = stream_tag("teacher");
constexpr std::uint64_t kTagRound = stream_tag("round");
constexpr std::uint64_t kTagPool = stream_tag("pool");
constexpr std::uint64_t kTagEstimate = stream_tag("estimate");
constexpr std::uint64_t kTagSelect = stream_tag("select");
constexpr std::uint64_t kTagStudentFit = stream_tag("student-fit");
constexpr std::uint64_t kTagStudentInit = stream_tag("student-init");

void write_trace(std::ofstream& out, int round, const SelectionTrace& trace) {
  for (const auto& row : trace.rows) {
    out << "round=" << round << "\tclass=" << row.cls
        << "\tpool=" << row.pool_size << "\tbudget=" << row.budget
        << "\tfallback=" << (row.uniform_fallback ? 1 : 0)
        << "\tclamped=" << (row.clamped ? 1 : 0)
        << "\tbald_min=" << row.bald_min << "\tbald_median=" << row.bald_median
        << "\tbald_max=" << row.bald_max << "\tchosen=";
    for (std::size_t i = 0; i < row.chosen_ids.size(); ++i) {
      if (i) out << ',';
      out << row.chosen_ids[i];
    }
    out << '\n';
  }
}

nlohmann::json record_to_json(const RoundRecord& rec) {
  nlohmann::json j;
  j["round"] = rec.round;
  j["skipped"] = rec.skipped;
  j["val_loss"] = rec.val_loss;
  j["val_acc"] = rec.val_acc;
  if (rec.test_acc >= 0.0) j["test_acc"] = rec.test_acc;
  j["selected_per_class"] = rec.selected_per_class;
  j["mean_bald"] = rec.mean_bald;
  j["mean_conf_weight"] = rec.mean_conf_weight;
  return j;
}

}  // namespace

void SelfTrainConfig::validate() const {
  if (k < 1) throw_invalid("K must be positive");
  if (passes < 1) throw_invalid("T must be positive");
  if (su_size < 1 || budget_r < 1) throw_invalid("S_u and R must be positive");
  if (budget_r > su_size) throw_invalid("R must not exceed S_u");
  if (st_iterations < 0) throw_invalid("iterations must be nonnegative");
  if (teacher_epochs < 1 || student_epochs < 1) throw_invalid("epochs must be positive");
  if (teacher_batch < 1 || student_batch < 1) throw_invalid("batch sizes must be positive");
  if (lambda_labeled < 0.0) throw_invalid("lambda_labeled must be nonnegative");
  if (hidden_dim < 1) throw_invalid("hidden_dim must be positive");
}

double confidence_weight(const UncertaintyEstimate& est,
                         bool confident_learning) {
  if (!confident_learning) return 1.0;
  const double v = est.variance[static_cast<std::size_t>(est.hard_label)];
  return std::log1p(1.0 / (v + kVarianceEpsilon));
}

MlpModel train_teacher(const FewShotSplit& split, const SelfTrainConfig& cfg,
                       AdamState* opt_out) {
  cfg.validate();
  if (split.labeled.empty() || split.valid.empty()) {
    throw_data("few-shot split has empty labeled or validation partition");
  }
  MlpModel model = MlpModel::init(static_cast<int>(kHashDim), cfg.hidden_dim,
                                  split.num_classes,
                                  {cfg.dropout_input, cfg.dropout_output},
                                  cfg.seed);
  AdamState opt = AdamState::init(model, cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, {kTagTeacher}));
  const std::vector<TrainExample> valid = as_train_examples(split.valid);
  FitOptions options;
  options.epochs = cfg.teacher_epochs;
  options.batch_size = cfg.teacher_batch;
  options.patience = cfg.teacher_patience;
  MlpModel best =
      fit(model, opt, as_train_examples(split.labeled), valid, options, rng);
  if (opt_out) *opt_out = std::move(opt);
  return best;
}

SelfTrainResult run_self_training(const FewShotSplit& split,
                                  const SelfTrainConfig& cfg,
                                  const std::string& run_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::ofstream rounds_out, trace_out;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    std::ofstream(run_dir + "/config.json") << config_to_json(cfg) << '\n';
    nlohmann::json manifest;
    manifest["labeled_ids"] = split.labeled_ids;
    manifest["valid_ids"] = split.valid_ids;
    std::vector<std::int64_t> unlabeled_ids;
    unlabeled_ids.reserve(split.unlabeled.size());
    for (const auto& u : split.unlabeled) unlabeled_ids.push_back(u.id);
    manifest["unlabeled_ids"] = unlabeled_ids;
    std::ofstream(run_dir + "/split_manifest.json") << manifest.dump() << '\n';
    rounds_out.open(run_dir + "/rounds.jsonl");
    trace_out.open(run_dir + "/selection_trace.txt");
  }

  SelfTrainResult result;
  AdamState opt;
  result.model = train_teacher(split, cfg, &opt);
  MlpModel model = result.model;

  result.teacher_val_loss = validation_loss(result.model, split.valid);
  result.teacher_val_acc = accuracy(result.model, split.valid);
  result.best_val_loss = result.teacher_val_loss;
  result.best_round = 0;

  const std::vector<TrainExample> valid = as_train_examples(split.valid);
  int bad_rounds = 0;
  const int stop_after = std::max(cfg.patience, 1);

  for (int round = 1; round <= cfg.st_iterations; ++round) {
    RoundRecord rec;
    rec.round = round;

    if (split.unlabeled.empty()) {
      rec.skipped = true;
      result.records.push_back(rec);
      if (rounds_out) rounds_out << record_to_json(rec).dump() << '\n';
      break;
    }

    const std::uint64_t round_seed =
        derive_seed(cfg.seed, {kTagRound, static_cast<std::uint64_t>(round)});

    // 1. Uniform mini-pool of min(S_u, |D_u|) unlabeled examples.
    std::vector<std::size_t> pool_idx(split.unlabeled.size());
    std::iota(pool_idx.begin(), pool_idx.end(), std::size_t{0});
    Rng pool_rng(derive_seed(round_seed, {kTagPool}));
    pool_rng.shuffle(pool_idx);
    const std::size_t pool_n =
        std::min(pool_idx.size(), static_cast<std::size_t>(cfg.su_size));
    pool_idx.resize(pool_n);

    // 2. Per-example uncertainty, rng stream derived from the example id so
    // results are independent of iteration order.
    std::vector<ScoredCandidate> candidates;
    candidates.reserve(pool_n);
    for (std::size_t i : pool_idx) {
      const UnlabeledExample& ex = split.unlabeled[i];
      Rng ex_rng(derive_seed(round_seed,
                             {kTagEstimate, static_cast<std::uint64_t>(ex.id)}));
      candidates.push_back({ex.id, estimate(model, ex.x, cfg.passes, ex_rng)});
    }

    // 3. Select R via the policy.
    SelectionTrace trace;
    Rng sel_rng(derive_seed(round_seed, {kTagSelect}));
    std::vector<ScoredCandidate> chosen;
    try {
      chosen = select(candidates, cfg.policy(), split.num_classes, sel_rng,
                      &trace);
    } catch (const Error&) {
      rec.skipped = true;
      result.records.push_back(rec);
      if (rounds_out) rounds_out << record_to_json(rec).dump() << '\n';
      continue;
    }
    if (trace_out) write_trace(trace_out, round, trace);

    // 4. Pseudo-labeled student set with confidence weights.
    rec.selected_per_class.assign(static_cast<std::size_t>(split.num_classes), 0);
    std::vector<TrainExample> student_set;
    student_set.reserve(chosen.size() + split.labeled.size());
    double bald_sum = 0.0, weight_sum = 0.0, max_weight = 0.0;
    for (const auto& cand : chosen) {
      const auto it = std::lower_bound(
          split.unlabeled.begin(), split.unlabeled.end(), cand.id,
          [](const UnlabeledExample& u, std::int64_t id) { return u.id < id; });
      const double w = confidence_weight(cand.est, cfg.confident_learning);
      student_set.push_back({&it->x, cand.est.hard_label, w});
      rec.selected_per_class[static_cast<std::size_t>(cand.est.hard_label)] += 1;
      bald_sum += cand.est.bald;
      weight_sum += w;
      max_weight = std::max(max_weight, w);
    }
    rec.mean_bald = bald_sum / static_cast<double>(chosen.size());
    rec.mean_conf_weight = weight_sum / static_cast<double>(chosen.size());

    // 5. Optional labeled augmentation: train on D_l alongside the selection.
    if (cfg.include_labeled_in_student) {
      const double w = max_weight * cfg.lambda_labeled;
      for (const auto& ex : split.labeled) {
        student_set.push_back({&ex.x, ex.label, w});
      }
    }

    // 6. Student starts from the current parameters (or fresh init).
    if (cfg.student_fresh_init) {
      model = MlpModel::init(model.input_dim, cfg.hidden_dim,
                             split.num_classes,
                             {cfg.dropout_input, cfg.dropout_output},
                             derive_seed(round_seed, {kTagStudentInit}));
      opt = AdamState::init(model, cfg.learning_rate);
    }
    FitOptions options;
    options.epochs = cfg.student_epochs;
    options.batch_size = cfg.student_batch;
    options.patience = cfg.student_patience;
    options.normalize_batch_weights = true;
    Rng fit_rng(derive_seed(round_seed, {kTagStudentFit}));
    model = fit(model, opt, std::move(student_set), valid, options, fit_rng);

    // 7. Validation metrics and convergence bookkeeping.
    rec.val_loss = validation_loss(model, split.valid);
    rec.val_acc = accuracy(model, split.valid);
    if (cfg.record_round_test_metrics && !split.test.empty()) {
      rec.test_acc = accuracy(model, split.test);
    }
    result.records.push_back(rec);
    if (rounds_out) rounds_out << record_to_json(rec).dump() << '\n';

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_round = round;
      result.model = model;
      bad_rounds = 0;
    } else {
      bad_rounds += 1;
      if (bad_rounds >= stop_after) break;
    }
  }

  if (!run_dir.empty()) {
    save_model(result.model, run_dir + "/model.bin");
    nlohmann::json metrics;
    metrics["teacher_val_loss"] = result.teacher_val_loss;
    metrics["teacher_val_acc"] = result.teacher_val_acc;
    metrics["best_round"] = result.best_round;
    metrics["best_val_loss"] = result.best_val_loss;
    metrics["rounds_run"] = result.records.size();
    std::ofstream(run_dir + "/metrics.json") << metrics.dump(2) << '\n';
  }
  return result;
}

std::string config_to_json(const SelfTrainConfig& cfg) {
  nlohmann::json j;
  j["K"] = cfg.k;
  j["T"] = cfg.passes;
  j["S_u"] = cfg.su_size;
  j["R"] = cfg.budget_r;
  j["iterations"] = cfg.st_iterations;
  j["teacher_epochs"] = cfg.teacher_epochs;
  j["student_epochs"] = cfg.student_epochs;
  j["teacher_batch"] = cfg.teacher_batch;
  j["student_batch"] = cfg.student_batch;
  j["teacher_patience"] = cfg.teacher_patience;
  j["student_patience"] = cfg.student_patience;
  j["patience"] = cfg.patience;
  j["strategy"] = strategy_name(cfg.strategy);
  j["class_dependent"] = cfg.class_dependent;
  j["use_raw_bald"] = cfg.use_raw_bald;
  j["confident_learning"] = cfg.confident_learning;
  j["include_labeled_in_student"] = cfg.include_labeled_in_student;
  j["lambda_labeled"] = cfg.lambda_labeled;
  j["student_fresh_init"] = cfg.student_fresh_init;
  j["record_round_test_metrics"] = cfg.record_round_test_metrics;
  j["hidden_dim"] = cfg.hidden_dim;
  j["dropout_input"] = cfg.dropout_input;
  j["dropout_output"] = cfg.dropout_output;
  j["learning_rate"] = cfg.learning_rate;
  j["seed"] = cfg.seed;
  return j.dump(2);
}

SelfTrainConfig config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw_data(std::string("bad config JSON: ") + e.what());
  }
  SelfTrainConfig cfg;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("K", cfg.k);
  get("T", cfg.passes);
  get("S_u", cfg.su_size);
  get("R", cfg.budget_r);
  get("iterations", cfg.st_iterations);
  get("teacher_epochs", cfg.teacher_epochs);
  get("student_epochs", cfg.student_epochs);
  get("teacher_batch", cfg.teacher_batch);
  get("student_batch", cfg.student_batch);
  get("teacher_patience", cfg.teacher_patience);
  get("student_patience", cfg.student_patience);
  get("patience", cfg.patience);
  if (j.contains("strategy")) {
    cfg.strategy = strategy_from_name(j.at("strategy").get<std::string>());
  }
  get("class_dependent", cfg.class_dependent);
  get("use_raw_bald", cfg.use_raw_bald);
  get("confident_learning", cfg.confident_learning);
  get("include_labeled_in_student", cfg.include_labeled_in_student);
  get("lambda_labeled", cfg.lambda_labeled);
  get("student_fresh_init", cfg.student_fresh_init);
  get("record_round_test_metrics", cfg.record_round_test_metrics);
  get("hidden_dim", cfg.hidden_dim);
  get("dropout_input", cfg.dropout_input);
  get("dropout_output", cfg.dropout_output);
  get("learning_rate", cfg.learning_rate);
  get("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

}  // namespace ust
