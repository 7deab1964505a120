#include "ame/ame.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <cstring>
#include <new>
#include <string>
#include <thread>

#include "ame/effects.hpp"
#include "ame/error.hpp"
#include "ame/pipeline.hpp"
#include "ame/report.hpp"

struct ame_table {
  ame::CsvTable table;
  ame::LoadOptions load;
};

struct ame_matcher {
  ame::Matcher matcher;
};

struct ame_result {
  ame::PipelineResult result;
  std::vector<std::string> dropped;
};

namespace {

thread_local std::string g_last_error;

ame_status to_status(ame::ErrorCode code) {
  using ame::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return AME_ERR_INVALID_ARGUMENT;
    case ErrorCode::kUnfitted: return AME_ERR_UNFITTED;
    case ErrorCode::kIo: return AME_ERR_IO;
    case ErrorCode::kMissingColumn: return AME_ERR_MISSING_COLUMN;
    case ErrorCode::kNonBinaryTreatment: return AME_ERR_NON_BINARY_TREATMENT;
    case ErrorCode::kUnparseableOutcome: return AME_ERR_UNPARSEABLE_OUTCOME;
    case ErrorCode::kMalformedCsv: return AME_ERR_MALFORMED_CSV;
    case ErrorCode::kEmptyTable: return AME_ERR_EMPTY_TABLE;
    case ErrorCode::kAllRowsDropped: return AME_ERR_ALL_ROWS_DROPPED;
    case ErrorCode::kSchemaMismatch: return AME_ERR_SCHEMA_MISMATCH;
    case ErrorCode::kHoldoutTooSmall: return AME_ERR_HOLDOUT_TOO_SMALL;
    case ErrorCode::kEmptyArm: return AME_ERR_EMPTY_ARM;
    case ErrorCode::kWriteFailed: return AME_ERR_WRITE_FAILED;
    case ErrorCode::kNoAvailableUnits: return AME_ERR_NO_AVAILABLE_UNITS;
    case ErrorCode::kNoMatches: return AME_ERR_NO_MATCHES;
    case ErrorCode::kUnitUnmatched: return AME_ERR_UNIT_UNMATCHED;
    case ErrorCode::kPredictorFailure: return AME_ERR_PREDICTOR_FAILURE;
  }
  return AME_ERR_INTERNAL;
}

ame_status fail(ame_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <class Fn>
ame_status guarded(Fn&& fn) {
  try {
    fn();
    return AME_OK;
  } catch (const ame::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(AME_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(AME_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AME_ERR_INTERNAL, "unknown error");
  }
}

void require(bool condition, const char* message) {
  if (!condition) throw ame::Error(ame::ErrorCode::kInvalidArgument, message);
}

ame::LoadOptions to_load_options(const ame_load_options* load) {
  require(load != nullptr, "load options are required");
  require(load->treatment_col != nullptr && load->outcome_col != nullptr,
          "treatment and outcome column names are required");
  ame::LoadOptions out;
  out.treatment_col = load->treatment_col;
  out.outcome_col = load->outcome_col;
  if (load->na_token != nullptr) out.na_token = load->na_token;
  if (load->id_col != nullptr) out.id_col = std::string(load->id_col);
  return out;
}

ame::PipelineOptions to_pipeline_options(const ame_options* o) {
  require(o != nullptr, "options are required");
  ame::PipelineOptions p;
  switch (o->algorithm) {
    case AME_FLAME: p.algo.algorithm = ame::Algorithm::kFlame; break;
    case AME_DAME: p.algo.algorithm = ame::Algorithm::kDame; break;
    case AME_HYBRID: p.algo.algorithm = ame::Algorithm::kHybrid; break;
    default: require(false, "unknown algorithm");
  }
  p.algo.c = o->c;
  p.algo.flame_iterations_before_dame = o->flame_iterations_before_dame;
  p.algo.with_replacement = o->with_replacement != 0;
  if (o->max_iterations != 0) p.algo.stopping.max_iterations = o->max_iterations;
  if (o->min_unmatched_treated >= 0) p.algo.stopping.min_unmatched_treated = static_cast<std::size_t>(o->min_unmatched_treated);
  if (o->min_unmatched_control >= 0) p.algo.stopping.min_unmatched_control = static_cast<std::size_t>(o->min_unmatched_control);
  if (o->pe_rise_epsilon >= 0.0) p.algo.stopping.pe_rise_epsilon = o->pe_rise_epsilon;
  if (o->bf_floor >= 0.0) p.algo.stopping.bf_floor = o->bf_floor;
  p.algo.predictor.ridge_lambda = o->ridge_lambda;
  p.algo.seed = o->seed;
  p.algo.threads = o->threads != 0 ? o->threads : std::max(1U, std::thread::hardware_concurrency());

  switch (o->missing) {
    case AME_MISSING_DROP: p.missing.mode = ame::MissingMode::kDrop; break;
    case AME_MISSING_IMPUTE: p.missing.mode = ame::MissingMode::kImpute; break;
    case AME_MISSING_SENTINEL: p.missing.mode = ame::MissingMode::kSentinel; break;
    default: require(false, "unknown missing-data mode");
  }
  p.missing.impute_sweeps = o->impute_sweeps;
  p.missing.impute_count = o->impute_count;
  p.missing.seed = o->seed;
  p.missing.ridge_lambda = o->ridge_lambda;
  require(p.missing.impute_sweeps >= 1 && p.missing.impute_count >= 1, "impute sweeps and count must be positive");

  p.holdout.source = ame::HoldoutSource::kFraction;
  p.holdout.fraction = o->holdout_fraction;
  p.holdout.seed = o->seed;
  ame::validate(p.algo);
  return p;
}

ame_result* make_result(ame::PipelineResult result) {
  auto* out = new ame_result{std::move(result), {}};
  const auto& first = out->result.runs.front();
  for (const auto& rec : first.run.records) {
    std::string names;
    for (std::size_t j : rec.dropped.columns()) {
      if (!names.empty()) names.push_back(';');
      names += first.matching.covariate_names()[j];
    }
    out->dropped.push_back(std::move(names));
  }
  return out;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* ame_version(void) { return "1.0.0"; }

const char* ame_status_name(ame_status status) {
  switch (status) {
    case AME_OK: return "OK";
    case AME_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case AME_ERR_UNFITTED: return "UnfittedHandle";
    case AME_ERR_IO: return "IoError";
    case AME_ERR_MISSING_COLUMN: return "MissingColumn";
    case AME_ERR_NON_BINARY_TREATMENT: return "NonBinaryTreatment";
    case AME_ERR_UNPARSEABLE_OUTCOME: return "UnparseableOutcome";
    case AME_ERR_MALFORMED_CSV: return "MalformedCsv";
    case AME_ERR_EMPTY_TABLE: return "EmptyTable";
    case AME_ERR_ALL_ROWS_DROPPED: return "AllRowsDropped";
    case AME_ERR_SCHEMA_MISMATCH: return "SchemaMismatch";
    case AME_ERR_HOLDOUT_TOO_SMALL: return "HoldoutTooSmall";
    case AME_ERR_EMPTY_ARM: return "EmptyArm";
    case AME_ERR_WRITE_FAILED: return "WriteFailed";
    case AME_ERR_NO_AVAILABLE_UNITS: return "NoAvailableUnits";
    case AME_ERR_NO_MATCHES: return "NoMatches";
    case AME_ERR_UNIT_UNMATCHED: return "UnitUnmatched";
    case AME_ERR_PREDICTOR_FAILURE: return "PredictorFailure";
    case AME_ERR_INTERNAL: return "InternalError";
  }
  return "Unknown";
}

int ame_status_exit_code(ame_status status) {
  if (status == AME_OK) return 0;
  if (status == AME_ERR_INVALID_ARGUMENT || status == AME_ERR_UNFITTED) return 2;
  if (status >= AME_ERR_IO && status < AME_ERR_WRITE_FAILED) return 3;
  return 4;
}

const char* ame_last_error_message(void) { return g_last_error.c_str(); }

void ame_options_init(ame_options* options) {
  if (options == nullptr) return;
  *options = ame_options{};
  options->algorithm = AME_FLAME;
  options->c = 0.1;
  options->flame_iterations_before_dame = 1;
  options->with_replacement = 0;
  options->max_iterations = 0;
  options->min_unmatched_treated = -1;
  options->min_unmatched_control = -1;
  options->pe_rise_epsilon = -1.0;
  options->bf_floor = -1.0;
  options->ridge_lambda = 0.1;
  options->missing = AME_MISSING_DROP;
  options->impute_sweeps = 5;
  options->impute_count = 1;
  options->holdout_fraction = 0.1;
  options->seed = 0;
  options->threads = 1;
}

ame_status ame_table_read_csv(const char* path, const ame_load_options* load, ame_table** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    auto table = std::make_unique<ame_table>(ame_table{ame::read_csv(path), to_load_options(load)});
    ame::encode_table(table->table, table->load);
    *out = table.release();
  });
}

ame_status ame_table_from_cells(size_t n_rows, size_t n_columns, const char* const* header, const char* const* cells,
                                const ame_load_options* load, ame_table** out) {
  return guarded([&] {
    require(out != nullptr && header != nullptr, "header and out are required");
    require(n_rows == 0 || cells != nullptr, "cells are required");
    auto table = std::make_unique<ame_table>();
    table->load = to_load_options(load);
    for (size_t c = 0; c < n_columns; ++c) {
      require(header[c] != nullptr, "header names must not be NULL");
      table->table.header.emplace_back(header[c]);
    }
    table->table.rows.resize(n_rows);
    for (size_t r = 0; r < n_rows; ++r) {
      for (size_t c = 0; c < n_columns; ++c) {
        const char* cell = cells[r * n_columns + c];
        table->table.rows[r].emplace_back(cell != nullptr ? cell : "");
      }
    }
    ame::encode_table(table->table, table->load);
    *out = table.release();
  });
}

size_t ame_table_rows(const ame_table* table) { return table != nullptr ? table->table.rows.size() : 0; }

void ame_table_free(ame_table* table) { delete table; }

ame_status ame_run(const ame_options* options, const ame_table* input, const ame_table* holdout, ame_result** out) {
  return guarded([&] {
    require(input != nullptr && out != nullptr, "input and out are required");
    const ame::PipelineOptions pipeline = to_pipeline_options(options);
    const ame::EncodedDataset matching = ame::encode_table(input->table, input->load);
    ame::PipelineResult result;
    if (holdout != nullptr) {
      const ame::EncodedDataset external = ame::encode_table(holdout->table, holdout->load, &matching);
      result = ame::run_pipeline(matching, &external, pipeline);
    } else {
      result = ame::run_pipeline(matching, nullptr, pipeline);
    }
    *out = make_result(std::move(result));
  });
}

ame_status ame_matcher_create(const ame_options* options, ame_matcher** out) {
  return guarded([&] {
    require(out != nullptr, "out is required");
    *out = new ame_matcher{ame::Matcher(to_pipeline_options(options))};
  });
}

ame_status ame_matcher_set_predictor(ame_matcher* matcher, ame_predictor_fn fn, void* user) {
  return guarded([&] {
    require(matcher != nullptr, "matcher is required");
    ame::PredictorSpec spec = matcher->matcher.options().algo.predictor;
    if (fn == nullptr) {
      spec.kind = ame::PredictorKind::kRidge;
      spec.callback = nullptr;
    } else {
      spec.kind = ame::PredictorKind::kCallback;
      spec.callback = [fn, user](const ame::ArmTrainingData& arm) {
        double loss = 0.0;
        const int rc = fn(user, arm.treated ? 1 : 0, arm.rows(), arm.columns.size(), arm.columns.data(),
                          arm.codes.data(), arm.outcomes.data(), &loss);
        if (rc != 0) {
          throw ame::Error(ame::ErrorCode::kPredictorFailure,
                           "predictor callback returned error " + std::to_string(rc));
        }
        return loss;
      };
    }
    matcher->matcher.set_predictor(std::move(spec));
  });
}

ame_status ame_matcher_fit(ame_matcher* matcher, const ame_table* holdout) {
  return guarded([&] {
    require(matcher != nullptr && holdout != nullptr, "matcher and holdout are required");
    matcher->matcher.fit(holdout->table, holdout->load);
  });
}

int ame_matcher_is_fitted(const ame_matcher* matcher) {
  return matcher != nullptr && matcher->matcher.fitted() ? 1 : 0;
}

ame_status ame_matcher_predict(const ame_matcher* matcher, const ame_table* matching, ame_result** out) {
  return guarded([&] {
    require(matcher != nullptr && matching != nullptr && out != nullptr, "matcher, matching and out are required");
    *out = make_result(matcher->matcher.predict(matching->table, matching->load));
  });
}

void ame_matcher_free(ame_matcher* matcher) { delete matcher; }

ame_status ame_result_summary(const ame_result* result, ame_summary* out) {
  return guarded([&] {
    require(result != nullptr && out != nullptr, "result and out are required");
    const auto& first = result->result.runs.front();
    out->n_runs = result->result.runs.size();
    out->n_matching_units = first.matching.n_units();
    out->n_holdout_units = first.holdout.n_units();
    out->n_matched_units = first.run.state.n_matched();
    out->n_groups = first.run.state.groups().size();
    out->baseline_pe = first.run.baseline_pe;
    out->stop_reason = ame::stop_reason_name(first.run.stop_reason).data();
  });
}

ame_status ame_result_effects(const ame_result* result, ame_effects* out) {
  return guarded([&] {
    require(result != nullptr && out != nullptr, "result and out are required");
    const auto& r = result->result;
    const auto& first = r.runs.front();
    *out = ame_effects{};
    out->has_ate = r.ate.has_value() ? 1 : 0;
    out->ate = r.ate.value_or(std::nan(""));
    out->has_att = r.att.has_value() ? 1 : 0;
    out->att = r.att.value_or(std::nan(""));
    out->n_units = first.ate ? first.ate->n_units : 0;
    out->n_groups = first.ate ? first.ate->n_groups : 0;
    out->n_treated_units = first.att ? first.att->n_units : 0;
  });
}

size_t ame_result_iteration_count(const ame_result* result) {
  return result != nullptr ? result->result.runs.front().run.records.size() : 0;
}

ame_status ame_result_iteration(const ame_result* result, size_t index, ame_iteration* out) {
  return guarded([&] {
    require(result != nullptr && out != nullptr, "result and out are required");
    const auto& records = result->result.runs.front().run.records;
    require(index < records.size(), "iteration index out of range");
    const auto& rec = records[index];
    out->iteration = rec.iteration;
    out->phase = rec.phase == ame::Phase::kBootstrap ? AME_PHASE_EXACT
                 : rec.phase == ame::Phase::kFlame   ? AME_PHASE_FLAME
                                                     : AME_PHASE_DAME;
    out->dropped = result->dropped[index].c_str();
    out->pe = rec.pe;
    out->bf = rec.bf;
    out->has_mq = rec.mq.has_value() ? 1 : 0;
    out->mq = rec.mq.value_or(std::nan(""));
    out->n_newly_matched = rec.n_newly_matched;
    out->cumulative_matched = rec.cumulative_matched;
  });
}

ame_status ame_result_unit_cate(const ame_result* result, const char* unit_id, double* out) {
  return guarded([&] {
    require(result != nullptr && unit_id != nullptr && out != nullptr, "result, unit_id and out are required");
    const auto& first = result->result.runs.front();
    const auto& ids = first.matching.unit_ids();
    const auto it = std::find(ids.begin(), ids.end(), unit_id);
    if (it == ids.end()) {
      throw ame::Error(ame::ErrorCode::kUnitUnmatched, std::string("unit '") + unit_id + "' is not in the matching set");
    }
    *out = ame::unit_cate(static_cast<std::size_t>(it - ids.begin()), first.run.state, first.matching.outcome(),
                          first.matching.treatment());
  });
}

ame_status ame_result_render(const ame_result* result, ame_output which, char** text) {
  return guarded([&] {
    require(result != nullptr && text != nullptr, "result and text are required");
    const auto& first = result->result.runs.front();
    std::string doc;
    switch (which) {
      case AME_OUTPUT_MATCHED_CSV: doc = ame::render_matched_csv(first.matching, first.run.state); break;
      case AME_OUTPUT_GROUPS_JSON: doc = ame::render_groups_json(first.matching, first.run.state); break;
      case AME_OUTPUT_ITERATIONS_CSV: doc = ame::render_iterations_csv(first.matching, first.run); break;
      case AME_OUTPUT_EFFECTS_JSON: doc = ame::render_effects_json(result->result); break;
      default: require(false, "unknown output kind");
    }
    *text = copy_string(doc);
  });
}

ame_status ame_result_write(const ame_result* result, const char* directory) {
  return guarded([&] {
    require(result != nullptr && directory != nullptr, "result and directory are required");
    ame::write_outputs(directory, result->result);
  });
}

void ame_result_free(ame_result* result) { delete result; }

void ame_string_free(char* text) { std::free(text); }

}  // extern "C"
