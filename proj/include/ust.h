/* C API for the uncertainty-aware self-training library.
 *
 * All functions return ust_status; UST_OK on success. On failure
 * ust_last_error() returns a thread-local description of the most recent
 * error. Handles are opaque and must be released with the matching _free.
 */
#ifndef UST_H
#define UST_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ust_status {
  UST_OK = 0,
  UST_ERR_INVALID_ARGUMENT = 1,
  UST_ERR_IO = 2,
  UST_ERR_DATA = 3,
  UST_ERR_NUMERIC = 4,
  UST_ERR_INTERNAL = 5
} ust_status;

const char* ust_version(void);
const char* ust_last_error(void);

/* ---- corpus ---- */

typedef struct ust_corpus ust_corpus;

/* format: "tsv" (label<TAB>text) or "csv" (header "label,text").
 * test_path may be NULL or "" when there is no test partition. */
ust_status ust_corpus_load(const char* train_path, const char* test_path,
                           const char* format, ust_corpus** out);

/* Seeded synthetic class-conditional vocabulary-mixture corpus. */
ust_status ust_corpus_generate(int classes, int train_size, int test_size,
                               double vocab_overlap, uint64_t seed,
                               ust_corpus** out);

ust_status ust_corpus_save_tsv(const ust_corpus* corpus,
                               const char* train_path, const char* test_path);

ust_status ust_corpus_info(const ust_corpus* corpus, int* classes,
                           int* train_size, int* test_size);

void ust_corpus_free(ust_corpus* corpus);

/* ---- model ---- */

typedef struct ust_model ust_model;

/* Runs the full self-training loop. config_json may be NULL/"" for defaults;
 * keys mirror the config snapshot written to run_dir. run_dir may be NULL to
 * skip writing run artifacts. */
ust_status ust_self_train(const ust_corpus* corpus, const char* config_json,
                          const char* run_dir, ust_model** out);

ust_status ust_model_save(const ust_model* model, const char* path);
ust_status ust_model_load(const char* path, ust_model** out);
ust_status ust_model_num_classes(const ust_model* model, int* out);

/* probs must have room for num_classes doubles. */
ust_status ust_model_predict(const ust_model* model, const char* text,
                             double* probs, int probs_len);

/* Monte-Carlo-dropout uncertainty for one text: predictive mean and
 * per-class variance (len >= num_classes each), BALD score and voted label.
 * Any output pointer may be NULL to skip it. */
ust_status ust_model_uncertainty(const ust_model* model, const char* text,
                                 int passes, uint64_t seed, double* mean,
                                 double* variance, int len, double* bald,
                                 int* hard_label);

void ust_model_free(ust_model* model);

/* ---- experiment harness ---- */

/* Runs an experiment plan (flat key = value text). Writes results.jsonl,
 * report.txt and per-round curves under out_dir. Returns UST_ERR_DATA if any
 * cell failed (failures are isolated and recorded in the results file). */
ust_status ust_run_plan_file(const char* plan_path, const char* out_dir);
ust_status ust_run_plan_text(const char* plan_text, const char* out_dir);

/* Re-renders report.txt and curves from an existing results.jsonl. */
ust_status ust_render_report(const char* results_path, const char* out_dir);

/* Returns a malloc'd text dump of a run directory's selection traces and
 * round log; release with ust_string_free. */
ust_status ust_inspect_run(const char* run_dir, char** out_text);

void ust_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* UST_H */
