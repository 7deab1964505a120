#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "ame/covariate_set.hpp"
#include "ame/dataset.hpp"
#include "ame/match_engine.hpp"
#include "ame/predictive_error.hpp"

namespace ame {

enum class Algorithm { kFlame, kDame, kHybrid };

std::string_view algorithm_name(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view name);

/// Optional stopping thresholds; unset fields never trigger. Matching always
/// stops once an arm has no unmatched units or no covariate set is left.
struct StoppingRule {
  std::optional<int> max_iterations;
  std::optional<std::size_t> min_unmatched_treated;
  std::optional<std::size_t> min_unmatched_control;
  std::optional<double> pe_rise_epsilon;
  std::optional<double> bf_floor;
};

struct AlgoConfig {
  Algorithm algorithm = Algorithm::kFlame;
  double c = 0.1;
  int flame_iterations_before_dame = 1;
  bool with_replacement = false;
  StoppingRule stopping;
  PredictorSpec predictor;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  SignatureOptions signatures;
};

/// Throws InvalidArgument on out-of-range settings.
void validate(const AlgoConfig& config);

enum class Phase { kBootstrap, kFlame, kDame };
std::string_view phase_name(Phase phase);

struct IterationRecord {
  int iteration = 0;
  Phase phase = Phase::kBootstrap;
  CovariateSet dropped;     // every covariate not matched on, relative to the full set
  CovariateSet matched_on;  // full set minus dropped
  double pe = 0.0;
  double bf = 0.0;
  std::optional<double> mq;  // FLAME selections only
  std::size_t n_newly_matched = 0;
  std::size_t cumulative_matched = 0;
};

enum class StopReason {
  kAllUnitsMatched,
  kNoCovariateSets,
  kTooFewUnmatched,
  kMaxIterations,
  kPeRise,
  kBfFloor,
};

/// Machine-readable name, e.g. "all_units_matched".
std::string_view stop_reason_name(StopReason reason);
std::optional<StopReason> parse_stop_reason(std::string_view name);
/// Human-readable text, e.g. "all units matched".
std::string_view stop_reason_description(StopReason reason);

struct StopDecision {
  bool stop = false;
  StopReason reason = StopReason::kAllUnitsMatched;
};

/// Checks the stop conditions in precedence order: the two mandatory ones,
/// then too-few-unmatched, iteration cap, PE rise over (1 + eps) * baseline
/// and BF floor. The PE and BF checks apply to records after the exact-match
/// bootstrap only.
StopDecision should_stop(const MatchState& state, const EncodedDataset& ds, bool candidates_remain,
                         const IterationRecord& last, const StoppingRule& rule, double baseline_pe);

/// DAME drop-set lattice. Sets move from active to processed exactly once.
class ActiveSetLattice {
 public:
  void add_active(CovariateSet s);
  /// Moves `s` from active to processed.
  void mark_processed(CovariateSet s);

  bool is_active(CovariateSet s) const { return active_.contains(s); }
  bool is_processed(CovariateSet s) const { return processed_.contains(s); }
  const std::set<CovariateSet>& active() const { return active_; }
  const std::set<CovariateSet>& processed() const { return processed_; }
  const std::vector<CovariateSet>& processed_of_size(std::size_t k) const;

 private:
  std::set<CovariateSet> active_;
  std::set<CovariateSet> processed_;
  std::vector<std::vector<CovariateSet>> processed_by_size_;
};

/// New candidate drop-sets after `just_processed` (size k) was processed:
/// just_processed + {a} for covariates a of `universe` outside it, where a
/// appears in at least k processed sets of size k and every size-k subset of
/// the candidate is processed. Candidates already active or processed are
/// left out. Ascending by bitmask.
std::vector<CovariateSet> generate_new_active_sets(CovariateSet just_processed, const ActiveSetLattice& lattice,
                                                   CovariateSet universe);

struct MatchRun {
  MatchState state;
  std::vector<IterationRecord> records;
  StopReason stop_reason = StopReason::kAllUnitsMatched;
  double baseline_pe = 0.0;
};

/// Matches every unit that agrees exactly on all covariates (iteration 0).
IterationRecord exact_match_bootstrap(MatchState& state, const EncodedDataset& ds);

MatchRun run_flame(const EncodedDataset& ds, const PredictiveErrorModel& pe, const AlgoConfig& config);
MatchRun run_dame(const EncodedDataset& ds, const PredictiveErrorModel& pe, const AlgoConfig& config);
MatchRun run_hybrid(const EncodedDataset& ds, const PredictiveErrorModel& pe, const AlgoConfig& config);

/// Dispatches on config.algorithm. Throws InvalidArgument when the matching
/// set lacks an arm or the schemas disagree.
MatchRun run_matching(const EncodedDataset& ds, const PredictiveErrorModel& pe, const AlgoConfig& config);
MatchRun run_matching(const EncodedDataset& ds, const EncodedDataset& holdout, const AlgoConfig& config);

}  // namespace ame
