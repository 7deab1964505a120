/*
 * C interface to the almost-exact matching engine.
 *
 * Every object is an opaque handle created by an ame_*_create/_read/_run
 * function and released by the matching ame_*_free function. Functions that
 * can fail return an ame_status; on failure ame_last_error_message() holds a
 * description for the calling thread until its next failing call.
 *
 * A handle must not be used from two threads at once. Distinct handles are
 * independent.
 */
#ifndef AME_AME_H
#define AME_AME_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(AME_BUILDING_LIBRARY)
#    define AME_API __declspec(dllexport)
#  else
#    define AME_API __declspec(dllimport)
#  endif
#else
#  define AME_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ame_status {
  AME_OK = 0,
  AME_ERR_INVALID_ARGUMENT = 1,
  AME_ERR_UNFITTED = 2,
  AME_ERR_IO = 10,
  AME_ERR_MISSING_COLUMN = 11,
  AME_ERR_NON_BINARY_TREATMENT = 12,
  AME_ERR_UNPARSEABLE_OUTCOME = 13,
  AME_ERR_MALFORMED_CSV = 14,
  AME_ERR_EMPTY_TABLE = 15,
  AME_ERR_ALL_ROWS_DROPPED = 16,
  AME_ERR_SCHEMA_MISMATCH = 17,
  AME_ERR_HOLDOUT_TOO_SMALL = 18,
  AME_ERR_EMPTY_ARM = 19,
  AME_ERR_WRITE_FAILED = 30,
  AME_ERR_NO_AVAILABLE_UNITS = 31,
  AME_ERR_NO_MATCHES = 32,
  AME_ERR_UNIT_UNMATCHED = 33,
  AME_ERR_PREDICTOR_FAILURE = 34,
  AME_ERR_INTERNAL = 99
} ame_status;

typedef enum ame_algorithm { AME_FLAME = 0, AME_DAME = 1, AME_HYBRID = 2 } ame_algorithm;

typedef enum ame_missing_mode { AME_MISSING_DROP = 0, AME_MISSING_IMPUTE = 1, AME_MISSING_SENTINEL = 2 } ame_missing_mode;

typedef enum ame_phase { AME_PHASE_EXACT = 0, AME_PHASE_FLAME = 1, AME_PHASE_DAME = 2 } ame_phase;

typedef enum ame_output {
  AME_OUTPUT_MATCHED_CSV = 0,
  AME_OUTPUT_GROUPS_JSON = 1,
  AME_OUTPUT_ITERATIONS_CSV = 2,
  AME_OUTPUT_EFFECTS_JSON = 3
} ame_output;

/* Matcher configuration. Initialise with ame_options_init(); optional
 * stopping thresholds are unset at their initial values (0 for
 * max_iterations, negative for the others). */
typedef struct ame_options {
  ame_algorithm algorithm;
  double c;
  int flame_iterations_before_dame;
  int with_replacement;
  int max_iterations;
  int64_t min_unmatched_treated;
  int64_t min_unmatched_control;
  double pe_rise_epsilon;
  double bf_floor;
  double ridge_lambda;
  ame_missing_mode missing;
  int impute_sweeps;
  int impute_count;
  double holdout_fraction;
  uint64_t seed;
  unsigned threads; /* 0 picks the hardware concurrency */
} ame_options;

typedef struct ame_load_options {
  const char* treatment_col;
  const char* outcome_col;
  const char* na_token; /* NULL means "NA"; empty cells are always missing */
  const char* id_col;   /* NULL means row indices */
} ame_load_options;

typedef struct ame_effects {
  int has_ate;
  double ate;
  int has_att;
  double att;
  size_t n_units;
  size_t n_groups;
  size_t n_treated_units;
} ame_effects;

typedef struct ame_iteration {
  int iteration;
  ame_phase phase;
  const char* dropped; /* ';'-separated covariate names, owned by the result */
  double pe;
  double bf;
  int has_mq;
  double mq;
  size_t n_newly_matched;
  size_t cumulative_matched;
} ame_iteration;

typedef struct ame_summary {
  size_t n_runs; /* completed datasets; above 1 only under multiple imputation */
  size_t n_matching_units;
  size_t n_holdout_units;
  size_t n_matched_units;
  size_t n_groups;
  double baseline_pe;
  const char* stop_reason; /* machine-readable, owned by the result */
} ame_summary;

/* Pluggable predictor: fill *loss with a finite non-negative loss for one
 * holdout arm and return 0, or return nonzero on failure. `codes` is
 * row-major, n_rows x n_columns, restricted to the covariate columns listed
 * in `columns`. */
typedef int (*ame_predictor_fn)(void* user, int treated, size_t n_rows, size_t n_columns, const size_t* columns,
                                const uint32_t* codes, const double* outcomes, double* loss);

typedef struct ame_table ame_table;
typedef struct ame_matcher ame_matcher;
typedef struct ame_result ame_result;

AME_API const char* ame_version(void);
AME_API const char* ame_status_name(ame_status status);
/* 0 for AME_OK, 2 for usage errors, 3 for data errors, 4 for runtime errors. */
AME_API int ame_status_exit_code(ame_status status);
AME_API const char* ame_last_error_message(void);

AME_API void ame_options_init(ame_options* options);

/* Tables keep their cells as text; category codes are assigned when a run
 * starts so that a holdout and a matching table share one encoding. Both
 * constructors validate the treatment, outcome and id columns eagerly. */
AME_API ame_status ame_table_read_csv(const char* path, const ame_load_options* load, ame_table** out);
/* `header` has n_columns names; `cells` is row-major n_rows x n_columns and a
 * NULL cell is missing. */
AME_API ame_status ame_table_from_cells(size_t n_rows, size_t n_columns, const char* const* header,
                                        const char* const* cells, const ame_load_options* load, ame_table** out);
AME_API size_t ame_table_rows(const ame_table* table);
AME_API void ame_table_free(ame_table* table);

/* One-shot run. With holdout == NULL the input is split by
 * options->holdout_fraction; otherwise `holdout` is used as is. */
AME_API ame_status ame_run(const ame_options* options, const ame_table* input, const ame_table* holdout,
                           ame_result** out);

AME_API ame_status ame_matcher_create(const ame_options* options, ame_matcher** out);
AME_API ame_status ame_matcher_set_predictor(ame_matcher* matcher, ame_predictor_fn fn, void* user);
/* Stores the holdout training table, replacing any earlier one. */
AME_API ame_status ame_matcher_fit(ame_matcher* matcher, const ame_table* holdout);
AME_API int ame_matcher_is_fitted(const ame_matcher* matcher);
/* Matches `matching` using the fitted holdout; AME_ERR_UNFITTED before fit. */
AME_API ame_status ame_matcher_predict(const ame_matcher* matcher, const ame_table* matching, ame_result** out);
AME_API void ame_matcher_free(ame_matcher* matcher);

AME_API ame_status ame_result_summary(const ame_result* result, ame_summary* out);
AME_API ame_status ame_result_effects(const ame_result* result, ame_effects* out);
AME_API size_t ame_result_iteration_count(const ame_result* result);
AME_API ame_status ame_result_iteration(const ame_result* result, size_t index, ame_iteration* out);
AME_API ame_status ame_result_unit_cate(const ame_result* result, const char* unit_id, double* out);
/* Renders one output document; release *text with ame_string_free. */
AME_API ame_status ame_result_render(const ame_result* result, ame_output which, char** text);
/* Writes matched.csv, groups.json, iterations.csv and effects.json. */
AME_API ame_status ame_result_write(const ame_result* result, const char* directory);
AME_API void ame_result_free(ame_result* result);

AME_API void ame_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* AME_AME_H */
