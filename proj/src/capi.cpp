#include "ust.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ust/corpus.hpp"
#include "ust/error.hpp"
#include "ust/experiment.hpp"
#include "ust/mlp.hpp"
#include "ust/self_train.hpp"
#include "ust/uncertainty.hpp"

namespace {

thread_local std::string g_last_error;

ust_status to_status(const ust::Error& e) {
  switch (e.code()) {
    case ust::ErrorCode::kInvalidArgument: return UST_ERR_INVALID_ARGUMENT;
    case ust::ErrorCode::kIo: return UST_ERR_IO;
    case ust::ErrorCode::kData: return UST_ERR_DATA;
    case ust::ErrorCode::kNumeric: return UST_ERR_NUMERIC;
  }
  return UST_ERR_INTERNAL;
}

template <class Fn>
ust_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ust::Error& e) {
    g_last_error = e.what();
    return to_status(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return UST_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return UST_ERR_INTERNAL;
  }
}

constexpr std::uint64_t kTagApiSplit = ust::stream_tag("api-split");

}  // namespace

struct ust_corpus {
  ust::Corpus corpus;
};

struct ust_model {
  ust::MlpModel model;
};

extern "C" {

const char* ust_version(void) { return "1.0.0"; }

const char* ust_last_error(void) { return g_last_error.c_str(); }

ust_status ust_corpus_load(const char* train_path, const char* test_path,
                           const char* format, ust_corpus** out) {
  return guarded([&]() -> ust_status {
    if (!train_path || !format || !out) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    auto handle = std::make_unique<ust_corpus>();
    handle->corpus = ust::load_corpus(train_path, test_path ? test_path : "",
                                      format);
    *out = handle.release();
    return UST_OK;
  });
}

ust_status ust_corpus_generate(int classes, int train_size, int test_size,
                               double vocab_overlap, uint64_t seed,
                               ust_corpus** out) {
  return guarded([&]() -> ust_status {
    if (!out) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    ust::GenConfig cfg;
    cfg.classes = classes;
    cfg.train_size = train_size;
    cfg.test_size = test_size;
    cfg.vocab_overlap = vocab_overlap;
    cfg.seed = seed;
    auto handle = std::make_unique<ust_corpus>();
    handle->corpus = ust::generate_corpus(cfg);
    *out = handle.release();
    return UST_OK;
  });
}

ust_status ust_corpus_save_tsv(const ust_corpus* corpus,
                               const char* train_path, const char* test_path) {
  return guarded([&]() -> ust_status {
    if (!corpus || !train_path) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    ust::save_corpus_tsv(corpus->corpus, train_path,
                         test_path ? test_path : "");
    return UST_OK;
  });
}

ust_status ust_corpus_info(const ust_corpus* corpus, int* classes,
                           int* train_size, int* test_size) {
  return guarded([&]() -> ust_status {
    if (!corpus) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    if (classes) *classes = corpus->corpus.num_classes();
    if (train_size) *train_size = static_cast<int>(corpus->corpus.train.size());
    if (test_size) *test_size = static_cast<int>(corpus->corpus.test.size());
    return UST_OK;
  });
}

void ust_corpus_free(ust_corpus* corpus) { delete corpus; }

ust_status ust_self_train(const ust_corpus* corpus, const char* config_json,
                          const char* run_dir, ust_model** out) {
  return guarded([&]() -> ust_status {
    if (!corpus || !out) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    ust::SelfTrainConfig cfg;
    if (config_json && config_json[0]) {
      cfg = ust::config_from_json(config_json);
    }
    const ust::FewShotSplit split = ust::few_shot_split(
        corpus->corpus, cfg.k, ust::derive_seed(cfg.seed, {kTagApiSplit}));
    ust::SelfTrainResult result =
        ust::run_self_training(split, cfg, run_dir ? run_dir : "");
    auto handle = std::make_unique<ust_model>();
    handle->model = std::move(result.model);
    *out = handle.release();
    return UST_OK;
  });
}

ust_status ust_model_save(const ust_model* model, const char* path) {
  return guarded([&]() -> ust_status {
    if (!model || !path) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    ust::save_model(model->model, path);
    return UST_OK;
  });
}

ust_status ust_model_load(const char* path, ust_model** out) {
  return guarded([&]() -> ust_status {
    if (!path || !out) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    auto handle = std::make_unique<ust_model>();
    handle->model = ust::load_model(path);
    *out = handle.release();
    return UST_OK;
  });
}

ust_status ust_model_num_classes(const ust_model* model, int* out) {
  return guarded([&]() -> ust_status {
    if (!model || !out) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    *out = model->model.num_classes;
    return UST_OK;
  });
}

ust_status ust_model_predict(const ust_model* model, const char* text,
                             double* probs, int probs_len) {
  return guarded([&]() -> ust_status {
    if (!model || !text || !probs) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    if (probs_len < model->model.num_classes) {
      g_last_error = "probs buffer too small";
      return UST_ERR_INVALID_ARGUMENT;
    }
    const std::vector<double> p =
        ust::forward_deterministic(model->model, ust::featurize(text));
    std::memcpy(probs, p.data(), p.size() * sizeof(double));
    return UST_OK;
  });
}

ust_status ust_model_uncertainty(const ust_model* model, const char* text,
                                 int passes, uint64_t seed, double* mean,
                                 double* variance, int len, double* bald,
                                 int* hard_label) {
  return guarded([&]() -> ust_status {
    if (!model || !text) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    const int c_count = model->model.num_classes;
    if ((mean || variance) && len < c_count) {
      g_last_error = "output buffer too small";
      return UST_ERR_INVALID_ARGUMENT;
    }
    ust::Rng rng(seed);
    const ust::UncertaintyEstimate est =
        ust::estimate(model->model, ust::featurize(text), passes, rng);
    if (mean) std::memcpy(mean, est.mean.data(), est.mean.size() * sizeof(double));
    if (variance) {
      std::memcpy(variance, est.variance.data(),
                  est.variance.size() * sizeof(double));
    }
    if (bald) *bald = est.bald;
    if (hard_label) *hard_label = est.hard_label;
    return UST_OK;
  });
}

void ust_model_free(ust_model* model) { delete model; }

ust_status ust_run_plan_text(const char* plan_text, const char* out_dir) {
  return guarded([&]() -> ust_status {
    if (!plan_text || !out_dir) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    const ust::ExperimentPlan plan = ust::parse_plan(plan_text);
    const ust::RunReport report = ust::run_plan(plan, out_dir);
    if (!report.all_ok()) {
      g_last_error = "one or more plan cells failed; see results.jsonl";
      return UST_ERR_DATA;
    }
    return UST_OK;
  });
}

ust_status ust_run_plan_file(const char* plan_path, const char* out_dir) {
  return guarded([&]() -> ust_status {
    if (!plan_path || !out_dir) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    const ust::ExperimentPlan plan = ust::parse_plan_file(plan_path);
    const ust::RunReport report = ust::run_plan(plan, out_dir);
    if (!report.all_ok()) {
      g_last_error = "one or more plan cells failed; see results.jsonl";
      return UST_ERR_DATA;
    }
    return UST_OK;
  });
}

ust_status ust_render_report(const char* results_path, const char* out_dir) {
  return guarded([&]() -> ust_status {
    if (!results_path || !out_dir) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    const ust::RunReport report = ust::load_results(results_path);
    ust::emit_report(report, out_dir);
    return UST_OK;
  });
}

ust_status ust_inspect_run(const char* run_dir, char** out_text) {
  return guarded([&]() -> ust_status {
    if (!run_dir || !out_text) {
      g_last_error = "null argument";
      return UST_ERR_INVALID_ARGUMENT;
    }
    namespace fs = std::filesystem;
    std::ostringstream out;
    bool found = false;
    for (const char* name :
         {"config.json", "metrics.json", "rounds.jsonl", "selection_trace.txt"}) {
      const fs::path path = fs::path(run_dir) / name;
      if (!fs::exists(path)) continue;
      found = true;
      out << "==> " << name << " <==\n";
      std::ifstream in(path);
      out << in.rdbuf() << '\n';
    }
    if (!found) {
      g_last_error = std::string("no run artifacts under ") + run_dir;
      return UST_ERR_IO;
    }
    const std::string text = out.str();
    char* buf = static_cast<char*>(std::malloc(text.size() + 1));
    if (!buf) {
      g_last_error = "out of memory";
      return UST_ERR_INTERNAL;
    }
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out_text = buf;
    return UST_OK;
  });
}

void ust_string_free(char* s) { std::free(s); }

}  // extern "C"
