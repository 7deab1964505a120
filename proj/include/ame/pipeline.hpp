#pragma once

#include <optional>
#include <vector>

#include "ame/algorithms.hpp"
#include "ame/csv.hpp"
#include "ame/dataset.hpp"
#include "ame/effects.hpp"

namespace ame {

struct PipelineOptions {
  AlgoConfig algo;
  MissingPolicy missing;
  HoldoutSpec holdout;
};

/// One matching run on one completed dataset.
struct RunOutput {
  EncodedDataset matching;
  EncodedDataset holdout;
  MatchRun run;
  std::optional<EffectEstimate> ate;  // empty when nothing matched
  std::optional<EffectEstimate> att;
};

/// Runs per completed dataset (several under multiple imputation) and their
/// equally weighted effect averages.
struct PipelineResult {
  std::vector<RunOutput> runs;
  std::optional<double> ate;
  std::optional<double> att;
};

/// Missing-data policy, holdout split, matching and effect estimation.
/// `external_holdout`, when given, must have been encoded with `input` as
/// its reference and is used instead of splitting the input.
PipelineResult run_pipeline(const EncodedDataset& input, const EncodedDataset* external_holdout,
                            const PipelineOptions& options);

/// Host-facing matcher: fit() takes a holdout table, predict() a matching
/// table, both as raw CSV-shaped tables so that category codes can be shared
/// between them at prediction time.
class Matcher {
 public:
  explicit Matcher(PipelineOptions options);

  /// Validates and stores the holdout; replaces any earlier one. Throws
  /// EmptyArm when the holdout lacks an arm after the missing-data policy.
  void fit(CsvTable holdout, LoadOptions load);
  bool fitted() const { return holdout_.has_value(); }

  /// Throws Unfitted before fit().
  PipelineResult predict(const CsvTable& matching, const LoadOptions& load) const;

  const PipelineOptions& options() const { return options_; }
  /// Swaps the predictor; an existing fit is kept.
  void set_predictor(PredictorSpec predictor) { options_.algo.predictor = std::move(predictor); }

 private:
  PipelineOptions options_;
  std::optional<CsvTable> holdout_;
  LoadOptions holdout_load_;
};

}  // namespace ame
