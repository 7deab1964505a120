#include "ame/pipeline.hpp"

#include <string>

#include "ame/error.hpp"

namespace ame {

namespace {

std::optional<double> mean_of(const std::vector<RunOutput>& runs, std::optional<EffectEstimate> RunOutput::*field) {
  double sum = 0.0;
  for (const RunOutput& r : runs) {
    if (!(r.*field)) return std::nullopt;
    sum += (r.*field)->value;
  }
  return sum / static_cast<double>(runs.size());
}

std::optional<EffectEstimate> try_effect(EffectEstimate (*fn)(const MatchState&, std::span<const double>,
                                                              std::span<const std::uint8_t>),
                                         const MatchState& state, const EncodedDataset& ds) {
  try {
    return fn(state, ds.outcome(), ds.treatment());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNoMatches) return std::nullopt;
    throw;
  }
}

}  // namespace

PipelineResult run_pipeline(const EncodedDataset& input, const EncodedDataset* external_holdout,
                            const PipelineOptions& options) {
  validate(options.algo);
  HoldoutSpec spec = options.holdout;
  if (external_holdout != nullptr) spec.source = HoldoutSource::kExternal;
  if (spec.source == HoldoutSource::kExternal && external_holdout == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "external holdout requested but none given");
  }

  const std::vector<EncodedDataset> completed = apply_missing_policy(input, options.missing);
  std::vector<EncodedDataset> completed_holdouts;
  if (external_holdout != nullptr) completed_holdouts = apply_missing_policy(*external_holdout, options.missing);

  PipelineResult result;
  for (std::size_t r = 0; r < completed.size(); ++r) {
    HoldoutSplit split =
        split_holdout(completed[r], spec, external_holdout != nullptr ? &completed_holdouts[r] : nullptr);
    const PredictiveErrorModel pe(split.holdout, options.algo.predictor);
    MatchRun run = run_matching(split.matching, pe, options.algo);
    RunOutput out{std::move(split.matching), std::move(split.holdout), std::move(run), std::nullopt, std::nullopt};
    out.ate = try_effect(&ate, out.run.state, out.matching);
    out.att = try_effect(&att, out.run.state, out.matching);
    result.runs.push_back(std::move(out));
  }
  result.ate = mean_of(result.runs, &RunOutput::ate);
  result.att = mean_of(result.runs, &RunOutput::att);
  return result;
}

Matcher::Matcher(PipelineOptions options) : options_(std::move(options)) {
  validate(options_.algo);
  options_.holdout.source = HoldoutSource::kExternal;
}

void Matcher::fit(CsvTable holdout, LoadOptions load) {
  const EncodedDataset encoded = encode_table(holdout, load);
  for (const EncodedDataset& completed : apply_missing_policy(encoded, options_.missing)) {
    const std::size_t treated = completed.count_treated();
    if (treated == 0 || treated == completed.n_units()) {
      throw Error(ErrorCode::kEmptyArm, "holdout needs treated and control units (got " + std::to_string(treated) +
                                            " treated of " + std::to_string(completed.n_units()) + ")");
    }
  }
  holdout_ = std::move(holdout);
  holdout_load_ = std::move(load);
}

PipelineResult Matcher::predict(const CsvTable& matching, const LoadOptions& load) const {
  if (!holdout_) throw Error(ErrorCode::kUnfitted, "predict called before fit");
  const EncodedDataset input = encode_table(matching, load);
  const EncodedDataset holdout = encode_table(*holdout_, holdout_load_, &input);
  return run_pipeline(input, &holdout, options_);
}

}  // namespace ame
