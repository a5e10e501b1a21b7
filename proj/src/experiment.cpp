#include "ust/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ust/error.hpp"

namespace ust {

namespace {

constexpr std::uint64_t kTagSplit = stream_tag("plan-split");
constexpr std::uint64_t kTagRun = stream_tag("plan-run");

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct TestEval {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Single pass over the test set producing both metrics, so the single-touch
// audit stays meaningful.
TestEval evaluate_test(const MlpModel& model, std::span<const Example> test) {
  if (test.empty()) throw_data("empty test set");
  const std::size_t c_count = static_cast<std::size_t>(model.num_classes);
  std::vector<std::size_t> tp(c_count, 0), fp(c_count, 0), fn(c_count, 0);
  std::size_t correct = 0;
  for (const auto& ex : test) {
    const std::vector<double> p = forward_deterministic(model, ex.x);
    int pred = 0;
    for (int c = 1; c < model.num_classes; ++c) {
      if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(pred)]) pred = c;
    }
    if (pred == ex.label) {
      ++correct;
      ++tp[static_cast<std::size_t>(pred)];
    } else {
      ++fp[static_cast<std::size_t>(pred)];
      ++fn[static_cast<std::size_t>(ex.label)];
    }
  }
  TestEval eval;
  eval.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < c_count; ++c) {
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
  }
  eval.macro_f1 = f1_sum / static_cast<double>(c_count);
  return eval;
}

std::string cell_dir_name(const std::string& cell) {
  std::string s = cell;
  std::replace(s.begin(), s.end(), ':', '-');
  return s;
}

nlohmann::json result_to_json(const CellResult& r) {
  nlohmann::json j;
  j["cell"] = r.cell;
  j["K"] = r.k;
  j["seed"] = r.seed;
  j["ok"] = r.ok;
  if (!r.ok) j["error"] = r.error;
  j["test_accuracy"] = r.test_accuracy;
  j["macro_f1"] = r.macro_f1;
  j["teacher_val_acc"] = r.teacher_val_acc;
  j["best_round"] = r.best_round;
  j["test_touches"] = r.test_touches;
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& rec : r.rounds) {
    nlohmann::json rj;
    rj["round"] = rec.round;
    rj["skipped"] = rec.skipped;
    rj["val_loss"] = rec.val_loss;
    rj["val_acc"] = rec.val_acc;
    if (rec.test_acc >= 0.0) rj["test_acc"] = rec.test_acc;
    rounds.push_back(rj);
  }
  j["rounds"] = rounds;
  return j;
}

}  // namespace

ExperimentPlan parse_plan(const std::string& text) {
  ExperimentPlan plan;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw_data("plan line " + std::to_string(lineno) + " is not key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto as_int = [&] { return std::stoi(value); };
    auto as_double = [&] { return std::stod(value); };
    auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw_data("plan key " + key + " expects a boolean");
    };

    if (key == "corpus") plan.corpus_train = value;
    else if (key == "corpus_test") plan.corpus_test = value;
    else if (key == "format") plan.format = value;
    else if (key == "cells") plan.cells = split_list(value);
    else if (key == "K") {
      plan.k_values.clear();
      for (const auto& v : split_list(value)) plan.k_values.push_back(std::stoi(v));
    } else if (key == "seeds") {
      plan.seeds.clear();
      for (const auto& v : split_list(value)) {
        plan.seeds.push_back(static_cast<std::uint64_t>(std::stoull(v)));
      }
    } else if (key == "master_seed") plan.master_seed = as_u64();
    else if (key == "gen_classes") plan.gen.classes = as_int();
    else if (key == "gen_train") plan.gen.train_size = as_int();
    else if (key == "gen_test") plan.gen.test_size = as_int();
    else if (key == "gen_overlap") plan.gen.vocab_overlap = as_double();
    else if (key == "gen_seed") plan.gen.seed = as_u64();
    else if (key == "T") plan.overrides.passes = as_int();
    else if (key == "S_u") plan.overrides.su_size = as_int();
    else if (key == "R") plan.overrides.budget_r = as_int();
    else if (key == "iterations") plan.overrides.st_iterations = as_int();
    else if (key == "teacher_epochs") plan.overrides.teacher_epochs = as_int();
    else if (key == "student_epochs") plan.overrides.student_epochs = as_int();
    else if (key == "teacher_batch") plan.overrides.teacher_batch = as_int();
    else if (key == "student_batch") plan.overrides.student_batch = as_int();
    else if (key == "teacher_patience") plan.overrides.teacher_patience = as_int();
    else if (key == "student_patience") plan.overrides.student_patience = as_int();
    else if (key == "patience") plan.overrides.patience = as_int();
    else if (key == "hidden_dim") plan.overrides.hidden_dim = as_int();
    else if (key == "dropout_input") plan.overrides.dropout_input = as_double();
    else if (key == "dropout_output") plan.overrides.dropout_output = as_double();
    else if (key == "learning_rate") plan.overrides.learning_rate = as_double();
    else if (key == "lambda_labeled") plan.overrides.lambda_labeled = as_double();
    else if (key == "include_labeled") plan.overrides.include_labeled_in_student = as_bool();
    else if (key == "student_fresh_init") plan.overrides.student_fresh_init = as_bool();
    else if (key == "record_round_test_metrics") plan.overrides.record_round_test_metrics = as_bool();
    else throw_data("unknown plan key: " + key);
  }
  if (plan.cells.empty()) throw_data("plan has no cells");
  if (plan.k_values.empty()) throw_data("plan has no K values");
  if (plan.seeds.empty()) throw_data("plan has no seeds");
  return plan;
}

ExperimentPlan parse_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open plan file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str());
}

SelfTrainConfig cell_config(const ExperimentPlan& plan,
                            const std::string& cell) {
  SelfTrainConfig cfg = plan.overrides;
  const std::vector<std::string> parts = [&] {
    std::vector<std::string> out;
    std::stringstream ss(cell);
    std::string item;
    while (std::getline(ss, item, ':')) out.push_back(item);
    return out;
  }();
  if (parts.empty()) throw_invalid("empty cell name");

  const std::string& method = parts[0];
  if (method == "base") {
    cfg.st_iterations = 0;
  } else if (method == "classic_st") {
    cfg.strategy = Strategy::kUniform;
    cfg.class_dependent = false;
    cfg.confident_learning = false;
    cfg.include_labeled_in_student = true;
  } else if (method == "ust_easy") {
    cfg.strategy = Strategy::kEasy;
  } else if (method == "ust_hard") {
    cfg.strategy = Strategy::kHard;
  } else {
    throw_invalid("unknown method in cell: " + cell);
  }

  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string& mod = parts[i];
    if (mod == "noconf") cfg.confident_learning = false;
    else if (mod == "conf") cfg.confident_learning = true;
    else if (mod == "nocd") cfg.class_dependent = false;
    else if (mod == "cd") cfg.class_dependent = true;
    else if (mod == "raw") cfg.use_raw_bald = true;
    else throw_invalid("unknown cell modifier: " + mod);
  }
  return cfg;
}

bool RunReport::all_ok() const {
  return std::all_of(results.begin(), results.end(),
                     [](const CellResult& r) { return r.ok; });
}

void RunReport::aggregate(const std::string& cell, int k, double* mean,
                          double* stddev) const {
  std::vector<double> vals;
  for (const auto& r : results) {
    if (r.ok && r.cell == cell && r.k == k) vals.push_back(r.test_accuracy);
  }
  if (vals.empty()) {
    *mean = std::numeric_limits<double>::quiet_NaN();
    *stddev = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double sum = 0.0;
  for (double v : vals) sum += v;
  *mean = sum / static_cast<double>(vals.size());
  if (vals.size() < 2) {
    *stddev = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double sq = 0.0;
  for (double v : vals) sq += (v - *mean) * (v - *mean);
  *stddev = std::sqrt(sq / static_cast<double>(vals.size() - 1));
}

RunReport run_plan(const ExperimentPlan& plan, const std::string& out_dir) {
  Corpus corpus;
  if (plan.corpus_train == "synthetic" || plan.corpus_train.empty()) {
    corpus = generate_corpus(plan.gen);
  } else {
    corpus = load_corpus(plan.corpus_train, plan.corpus_test, plan.format);
  }

  RunReport report;
  report.cells = plan.cells;
  report.k_values = plan.k_values;
  report.seeds = plan.seeds;

  for (const auto& cell : plan.cells) {
    for (int k : plan.k_values) {
      for (std::size_t si = 0; si < plan.seeds.size(); ++si) {
        const std::uint64_t seed = plan.seeds[si];
        CellResult result;
        result.cell = cell;
        result.k = k;
        result.seed = seed;
        try {
          // Cell-independent derivation keeps the base cell's teacher
          // identical to every self-training cell's round 0.
          const std::uint64_t split_seed = derive_seed(
              plan.master_seed, {kTagSplit, static_cast<std::uint64_t>(k), seed});
          const FewShotSplit split = few_shot_split(corpus, k, split_seed);

          SelfTrainConfig cfg = cell_config(plan, cell);
          cfg.k = k;
          cfg.seed = derive_seed(plan.master_seed,
                                 {kTagRun, static_cast<std::uint64_t>(k), seed});

          std::string run_dir;
          if (!out_dir.empty()) {
            run_dir = out_dir + "/runs/" + cell_dir_name(cell) + "_K" +
                      std::to_string(k) + "_s" + std::to_string(seed);
          }
          SelfTrainResult st = run_self_training(split, cfg, run_dir);

          // Test set: one touch, after model selection.
          const TestEval eval = evaluate_test(st.model, split.test);
          result.test_touches = 1;
          for (const auto& rec : st.records) {
            if (rec.test_acc >= 0.0) result.test_touches += 1;
          }
          result.test_accuracy = eval.accuracy;
          result.macro_f1 = eval.macro_f1;
          result.teacher_val_acc = st.teacher_val_acc;
          result.best_round = st.best_round;
          result.rounds = std::move(st.records);
          result.ok = true;
        } catch (const std::exception& e) {
          result.ok = false;
          result.error = e.what();
        }
        report.results.push_back(std::move(result));
      }
    }
  }

  if (!out_dir.empty()) emit_report(report, out_dir);
  return report;
}

std::string render_report_table(const RunReport& report) {
  std::ostringstream out;
  out << "cell";
  for (int k : report.k_values) {
    out << "\tK=" << k << " acc (std)\tK=" << k << " mF1";
  }
  out << '\n';
  char buf[64];
  for (const auto& cell : report.cells) {
    out << cell;
    for (int k : report.k_values) {
      double mean = 0.0, stddev = 0.0;
      report.aggregate(cell, k, &mean, &stddev);
      if (std::isnan(mean)) {
        out << "\tFAILED\t-";
        continue;
      }
      if (std::isnan(stddev)) {
        std::snprintf(buf, sizeof(buf), "%.2f (--)", 100.0 * mean);
      } else {
        std::snprintf(buf, sizeof(buf), "%.2f (%.2f)", 100.0 * mean,
                      100.0 * stddev);
      }
      out << '\t' << buf;
      double f1_sum = 0.0;
      int f1_n = 0;
      for (const auto& r : report.results) {
        if (r.ok && r.cell == cell && r.k == k) {
          f1_sum += r.macro_f1;
          ++f1_n;
        }
      }
      std::snprintf(buf, sizeof(buf), "%.2f",
                    f1_n ? 100.0 * f1_sum / f1_n : 0.0);
      out << '\t' << buf;
    }
    out << '\n';
  }
  return out.str();
}

void emit_report(const RunReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::ofstream results(out_dir + "/results.jsonl");
  if (!results) throw_io("cannot write results file in " + out_dir);
  for (const auto& r : report.results) {
    results << result_to_json(r).dump() << '\n';
  }

  std::ofstream(out_dir + "/report.txt") << render_report_table(report);

  for (const auto& cell : report.cells) {
    for (int k : report.k_values) {
      std::vector<const CellResult*> runs;
      for (const auto& r : report.results) {
        if (r.ok && r.cell == cell && r.k == k) runs.push_back(&r);
      }
      if (runs.empty()) continue;
      std::ofstream csv(out_dir + "/curve_" + cell_dir_name(cell) + "_K" +
                        std::to_string(k) + ".csv");
      csv << "round";
      for (const auto* r : runs) csv << ",seed" << r->seed;
      csv << '\n';
      std::size_t max_rounds = 0;
      for (const auto* r : runs) max_rounds = std::max(max_rounds, r->rounds.size());
      csv << "0";
      for (const auto* r : runs) csv << ',' << r->teacher_val_acc;
      csv << '\n';
      for (std::size_t i = 0; i < max_rounds; ++i) {
        csv << (i + 1);
        for (const auto* r : runs) {
          csv << ',';
          if (i < r->rounds.size() && !r->rounds[i].skipped) {
            csv << r->rounds[i].val_acc;
          }
        }
        csv << '\n';
      }
    }
  }
}

RunReport load_results(const std::string& results_path) {
  std::ifstream in(results_path);
  if (!in) throw_io("cannot open results file: " + results_path);
  RunReport report;
  std::string line;
  auto remember = [](auto& vec, const auto& v) {
    if (std::find(vec.begin(), vec.end(), v) == vec.end()) vec.push_back(v);
  };
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw_data(std::string("bad results line: ") + e.what());
    }
    CellResult r;
    r.cell = j.at("cell").get<std::string>();
    r.k = j.at("K").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ok = j.at("ok").get<bool>();
    if (j.contains("error")) r.error = j.at("error").get<std::string>();
    r.test_accuracy = j.value("test_accuracy", 0.0);
    r.macro_f1 = j.value("macro_f1", 0.0);
    r.teacher_val_acc = j.value("teacher_val_acc", 0.0);
    r.best_round = j.value("best_round", 0);
    r.test_touches = j.value("test_touches", 0);
    if (j.contains("rounds")) {
      for (const auto& rj : j.at("rounds")) {
        RoundRecord rec;
        rec.round = rj.value("round", 0);
        rec.skipped = rj.value("skipped", false);
        rec.val_loss = rj.value("val_loss", 0.0);
        rec.val_acc = rj.value("val_acc", 0.0);
        rec.test_acc = rj.value("test_acc", -1.0);
        r.rounds.push_back(rec);
      }
    }
    remember(report.cells, r.cell);
    remember(report.k_values, r.k);
    remember(report.seeds, r.seed);
    report.results.push_back(std::move(r));
  }
  return report;
}

double macro_f1_score(const MlpModel& model, std::span<const Example> test) {
  return evaluate_test(model, test).macro_f1;
}

}  // namespace ust
