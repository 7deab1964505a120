#include "ame/predictive_error.hpp"

#include <cmath>
#include <exception>
#include <string>

#include "ame/error.hpp"
#include "ame/one_hot.hpp"
#include "ame/ridge.hpp"

namespace ame {

PredictiveErrorModel::PredictiveErrorModel(EncodedDataset holdout, PredictorSpec spec)
    : holdout_(std::move(holdout)), spec_(std::move(spec)) {
  if (spec_.kind == PredictorKind::kRidge && !(spec_.ridge_lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ridge lambda must be non-negative");
  }
  if (spec_.kind == PredictorKind::kCallback && !spec_.callback) {
    throw Error(ErrorCode::kInvalidArgument, "callback predictor needs a callback");
  }
  if (holdout_.has_unresolved_missing()) {
    throw Error(ErrorCode::kInvalidArgument, "holdout still has unresolved missing cells");
  }
  const auto treatment = holdout_.treatment();
  const auto outcome = holdout_.outcome();
  for (std::size_t i = 0; i < holdout_.n_units(); ++i) {
    arm_rows_[treatment[i]].push_back(i);
    arm_outcomes_[treatment[i]].push_back(outcome[i]);
  }
  if (arm_rows_[0].empty() || arm_rows_[1].empty()) {
    throw Error(ErrorCode::kEmptyArm, "holdout needs treated and control units (got " +
                                          std::to_string(arm_rows_[1].size()) + " treated, " +
                                          std::to_string(arm_rows_[0].size()) + " control)");
  }
}

double PredictiveErrorModel::arm_loss(CovariateSet s, bool treated) const {
  const auto& rows = arm_rows_[treated ? 1 : 0];
  const auto& y = arm_outcomes_[treated ? 1 : 0];

  if (spec_.kind == PredictorKind::kCallback) {
    ArmTrainingData data;
    data.treated = treated;
    data.columns = s.columns();
    data.outcomes = y;
    for (std::size_t j : data.columns) data.cardinalities.push_back(holdout_.effective_cardinality(j));
    data.codes.reserve(rows.size() * data.columns.size());
    for (std::size_t u : rows) {
      for (std::size_t j : data.columns) data.codes.push_back(holdout_.code(u, j));
    }
    double loss = 0.0;
    try {
      loss = spec_.callback(data);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kPredictorFailure, std::string("predictor callback failed: ") + e.what());
    }
    if (!std::isfinite(loss) || loss < 0.0) {
      throw Error(ErrorCode::kPredictorFailure, "predictor callback returned a negative or non-finite loss");
    }
    return loss;
  }

  const OneHotLayout layout(holdout_, s.columns());
  Eigen::MatrixXd gram;
  Eigen::VectorXd rhs;
  layout.accumulate(holdout_, rows, y, gram, rhs);
  const Eigen::VectorXd beta = solve_ridge_normal(gram, rhs, spec_.ridge_lambda);
  double sse = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double e = y[r] - layout.predict(holdout_, rows[r], beta);
    sse += e * e;
  }
  return sse / static_cast<double>(rows.size());
}

PEResult PredictiveErrorModel::compute(CovariateSet s) const {
  if (s.empty()) throw Error(ErrorCode::kInvalidArgument, "predictive error needs a nonempty covariate set");
  PEResult result;
  result.on_set = s;
  result.pe_treated = arm_loss(s, true);
  result.pe_control = arm_loss(s, false);
  result.pe = result.pe_treated + result.pe_control;
  return result;
}

PEResult PredictiveErrorModel::evaluate(CovariateSet s) const {
  {
    std::lock_guard lock(cache_mutex_);
    if (const auto it = cache_.find(s); it != cache_.end()) return it->second;
  }
  PEResult result = compute(s);
  std::lock_guard lock(cache_mutex_);
  cache_.emplace(s, result);
  return result;
}

std::size_t PredictiveErrorModel::cache_size() const {
  std::lock_guard lock(cache_mutex_);
  return cache_.size();
}

PEResult predictive_error(const EncodedDataset& holdout, CovariateSet s, const PredictorSpec& spec) {
  return PredictiveErrorModel(holdout, spec).compute(s);
}

}  // namespace ame
