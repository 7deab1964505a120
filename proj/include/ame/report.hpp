#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ame/dataset.hpp"
#include "ame/match_engine.hpp"
#include "ame/pipeline.hpp"

namespace ame {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// One row per matched unit in row order: unit id, covariates (decoded where
/// the column is in the unit's main-group covariate set, "*" elsewhere),
/// treatment, outcome, main group id and the iteration it was formed.
std::string render_matched_csv(const EncodedDataset& ds, const MatchState& state);

/// Array of {group_id, iteration, on_set, signature, members, n_treated,
/// n_control, cate}.
std::string render_groups_json(const EncodedDataset& ds, const MatchState& state);

/// iteration, phase, dropped, pe, bf, mq, n_newly_matched, cumulative_matched.
std::string render_iterations_csv(const EncodedDataset& ds, const MatchRun& run);

/// {ate, att, n_units, n_groups} from the first run, with ate/att replaced by
/// the across-imputation averages and a per-imputation list when there are
/// several runs.
std::string render_effects_json(const PipelineResult& result);

/// Rebuilds group membership from groups.json text against the dataset it
/// was produced from. Main groups follow group order.
MatchState state_from_groups_json(std::string_view json, const EncodedDataset& ds);

/// Writes matched.csv, groups.json, iterations.csv and effects.json for the
/// first run into `dir`, creating it if needed.
void write_outputs(const std::filesystem::path& dir, const PipelineResult& result);

void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace ame
