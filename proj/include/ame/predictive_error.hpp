#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "ame/covariate_set.hpp"
#include "ame/dataset.hpp"

namespace ame {

/// Training rows of one holdout arm restricted to a covariate set, handed to
/// a pluggable predictor. `codes` is row-major, rows x columns.size().
struct ArmTrainingData {
  bool treated = false;
  std::vector<std::size_t> columns;
  std::vector<std::uint32_t> codes;
  std::vector<std::uint32_t> cardinalities;
  std::vector<double> outcomes;

  std::size_t rows() const { return outcomes.size(); }
};

/// Returns a finite, non-negative loss for one arm.
using PredictorCallback = std::function<double(const ArmTrainingData&)>;

enum class PredictorKind { kRidge, kCallback };

struct PredictorSpec {
  PredictorKind kind = PredictorKind::kRidge;
  double ridge_lambda = 0.1;
  PredictorCallback callback;
};

struct PEResult {
  double pe = 0.0;
  double pe_treated = 0.0;
  double pe_control = 0.0;
  CovariateSet on_set;

  bool operator==(const PEResult&) const = default;
};

/// Predictive error of covariate subsets on a fixed holdout set.
///
/// One predictor is fit per holdout arm using only the columns of the subset,
/// each covariate one-hot encoded (sentinel codes share one extra level). The
/// default predictor is ridge regression and the per-arm loss is its in-sample
/// mean squared error; pe is the sum of the two arms' losses. Results are
/// memoized per subset; evaluate() may be called concurrently.
class PredictiveErrorModel {
 public:
  /// Throws EmptyArm unless the holdout has both treated and control units.
  PredictiveErrorModel(EncodedDataset holdout, PredictorSpec spec);

  PEResult evaluate(CovariateSet s) const;
  /// Bypasses the cache.
  PEResult compute(CovariateSet s) const;

  const EncodedDataset& holdout() const { return holdout_; }
  const PredictorSpec& spec() const { return spec_; }
  std::size_t cache_size() const;

 private:
  double arm_loss(CovariateSet s, bool treated) const;

  EncodedDataset holdout_;
  PredictorSpec spec_;
  std::vector<std::size_t> arm_rows_[2];
  std::vector<double> arm_outcomes_[2];
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<CovariateSet, PEResult, CovariateSetHash> cache_;
};

/// Uncached one-off evaluation.
PEResult predictive_error(const EncodedDataset& holdout, CovariateSet s, const PredictorSpec& spec);

}  // namespace ame
