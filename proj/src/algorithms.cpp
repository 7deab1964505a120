#include "ame/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ame/error.hpp"
#include "parallel.hpp"

namespace ame {

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kFlame: return "flame";
    case Algorithm::kDame: return "dame";
    case Algorithm::kHybrid: return "hybrid";
  }
  return "flame";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  if (name == "flame") return Algorithm::kFlame;
  if (name == "dame") return Algorithm::kDame;
  if (name == "hybrid") return Algorithm::kHybrid;
  return std::nullopt;
}

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::kBootstrap: return "exact";
    case Phase::kFlame: return "flame";
    case Phase::kDame: return "dame";
  }
  return "exact";
}

namespace {

constexpr StopReason kAllReasons[] = {StopReason::kAllUnitsMatched, StopReason::kNoCovariateSets,
                                      StopReason::kTooFewUnmatched, StopReason::kMaxIterations,
                                      StopReason::kPeRise,          StopReason::kBfFloor};

}  // namespace

std::string_view stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::kAllUnitsMatched: return "all_units_matched";
    case StopReason::kNoCovariateSets: return "no_covariate_sets";
    case StopReason::kTooFewUnmatched: return "too_few_unmatched";
    case StopReason::kMaxIterations: return "max_iterations";
    case StopReason::kPeRise: return "pe_rise";
    case StopReason::kBfFloor: return "bf_floor";
  }
  return "unknown";
}

std::optional<StopReason> parse_stop_reason(std::string_view name) {
  for (StopReason r : kAllReasons) {
    if (stop_reason_name(r) == name) return r;
  }
  return std::nullopt;
}

std::string_view stop_reason_description(StopReason reason) {
  switch (reason) {
    case StopReason::kAllUnitsMatched: return "all units matched";
    case StopReason::kNoCovariateSets: return "no covariate sets remain";
    case StopReason::kTooFewUnmatched: return "too few unmatched units";
    case StopReason::kMaxIterations: return "iteration limit reached";
    case StopReason::kPeRise: return "predictive error rises too much";
    case StopReason::kBfFloor: return "balancing factor below floor";
  }
  return "unknown";
}

void validate(const AlgoConfig& config) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (!(config.c >= 0.0) || !std::isfinite(config.c)) fail("C must be a finite non-negative number");
  if (config.algorithm == Algorithm::kHybrid && config.flame_iterations_before_dame < 1) {
    fail("hybrid needs at least one FLAME iteration before DAME");
  }
  const auto& s = config.stopping;
  if (s.max_iterations && *s.max_iterations < 1) fail("max iterations must be positive");
  if (s.pe_rise_epsilon && !(*s.pe_rise_epsilon >= 0.0)) fail("PE rise epsilon must be non-negative");
  if (s.bf_floor && !(*s.bf_floor >= 0.0 && *s.bf_floor <= 2.0)) fail("BF floor must lie in [0, 2]");
  if (config.predictor.kind == PredictorKind::kRidge && !(config.predictor.ridge_lambda >= 0.0)) {
    fail("ridge lambda must be non-negative");
  }
  if (config.predictor.kind == PredictorKind::kCallback && !config.predictor.callback) {
    fail("callback predictor needs a callback");
  }
}

StopDecision should_stop(const MatchState& state, const EncodedDataset& ds, bool candidates_remain,
                         const IterationRecord& last, const StoppingRule& rule, double baseline_pe) {
  std::size_t unmatched_treated = 0;
  std::size_t unmatched_control = 0;
  const auto treatment = ds.treatment();
  for (std::size_t u = 0; u < ds.n_units(); ++u) {
    if (state.is_matched(u)) continue;
    if (treatment[u]) {
      ++unmatched_treated;
    } else {
      ++unmatched_control;
    }
  }
  auto stop = [](StopReason r) { return StopDecision{true, r}; };
  if (unmatched_treated == 0 || unmatched_control == 0) return stop(StopReason::kAllUnitsMatched);
  if (!candidates_remain) return stop(StopReason::kNoCovariateSets);
  if ((rule.min_unmatched_treated && unmatched_treated <= *rule.min_unmatched_treated) ||
      (rule.min_unmatched_control && unmatched_control <= *rule.min_unmatched_control)) {
    return stop(StopReason::kTooFewUnmatched);
  }
  if (rule.max_iterations && last.iteration >= *rule.max_iterations) return stop(StopReason::kMaxIterations);
  if (last.iteration >= 1) {
    if (rule.pe_rise_epsilon && last.pe > (1.0 + *rule.pe_rise_epsilon) * baseline_pe) {
      return stop(StopReason::kPeRise);
    }
    if (rule.bf_floor && last.bf < *rule.bf_floor) return stop(StopReason::kBfFloor);
  }
  return {};
}

void ActiveSetLattice::add_active(CovariateSet s) {
  if (processed_.contains(s)) throw Error(ErrorCode::kInvalidArgument, "drop-set already processed");
  active_.insert(s);
}

void ActiveSetLattice::mark_processed(CovariateSet s) {
  if (active_.erase(s) == 0) throw Error(ErrorCode::kInvalidArgument, "drop-set is not active");
  processed_.insert(s);
  const std::size_t k = s.size();
  if (processed_by_size_.size() <= k) processed_by_size_.resize(k + 1);
  processed_by_size_[k].push_back(s);
}

const std::vector<CovariateSet>& ActiveSetLattice::processed_of_size(std::size_t k) const {
  static const std::vector<CovariateSet> kNone;
  return k < processed_by_size_.size() ? processed_by_size_[k] : kNone;
}

std::vector<CovariateSet> generate_new_active_sets(CovariateSet just_processed, const ActiveSetLattice& lattice,
                                                   CovariateSet universe) {
  const std::size_t k = just_processed.size();
  const auto& same_size = lattice.processed_of_size(k);
  std::vector<CovariateSet> out;
  for (std::size_t alpha : universe.minus(just_processed).columns()) {
    std::size_t support = 0;
    for (CovariateSet t : same_size) support += t.contains(alpha) ? 1 : 0;
    if (support < k) continue;
    const CovariateSet candidate = just_processed.with(alpha);
    if (lattice.is_active(candidate) || lattice.is_processed(candidate)) continue;
    bool closed = true;
    for (std::size_t beta : candidate.columns()) {
      if (!lattice.is_processed(candidate.without(beta))) {
        closed = false;
        break;
      }
    }
    if (closed) out.push_back(candidate);
  }
  return out;
}

IterationRecord exact_match_bootstrap(MatchState& state, const EncodedDataset& ds) {
  const CovariateSet full = CovariateSet::full(ds.n_covariates());
  const MatchStep step = match_on_set(state, ds, full, 0);
  IterationRecord rec;
  rec.iteration = 0;
  rec.phase = Phase::kBootstrap;
  rec.matched_on = full;
  rec.bf = step.bf;
  rec.n_newly_matched = step.newly_matched;
  rec.cumulative_matched = state.n_matched();
  return rec;
}

namespace {

class Runner {
 public:
  Runner(const EncodedDataset& ds, const PredictiveErrorModel& pe, const AlgoConfig& config)
      : ds_(ds), pe_(pe), config_(config), full_(CovariateSet::full(ds.n_covariates())) {
    validate(config_);
    if (pe_.holdout().covariate_names() != ds_.covariate_names()) {
      throw Error(ErrorCode::kSchemaMismatch, "holdout and matching covariates differ");
    }
    if (ds_.has_unresolved_missing()) {
      throw Error(ErrorCode::kInvalidArgument, "matching set still has unresolved missing cells");
    }
    const std::size_t treated = ds_.count_treated();
    if (treated == 0 || treated == ds_.n_units()) {
      throw Error(ErrorCode::kEmptyArm, "matching set needs treated and control units");
    }
    run_.state = MatchState(ds_.n_units(), config_.with_replacement);
  }

  MatchRun run() && {
    run_.baseline_pe = pe_.evaluate(full_).pe;
    IterationRecord boot = exact_match_bootstrap(run_.state, ds_);
    boot.pe = run_.baseline_pe;
    if (config_.algorithm != Algorithm::kDame) boot.mq = config_.c * boot.bf - boot.pe;
    run_.records.push_back(boot);

    current_ = full_;
    bool stopped = false;
    if (config_.algorithm == Algorithm::kFlame) {
      stopped = flame_phase(std::nullopt);
    } else if (config_.algorithm == Algorithm::kHybrid) {
      stopped = flame_phase(config_.flame_iterations_before_dame);
    }
    if (!stopped) dame_phase();
    return std::move(run_);
  }

 private:
  bool check_stop(bool candidates_remain) {
    const StopDecision d = should_stop(run_.state, ds_, candidates_remain, run_.records.back(), config_.stopping,
                                       run_.baseline_pe);
    if (d.stop) run_.stop_reason = d.reason;
    return d.stop;
  }

  void commit(CovariateSet match_set, Phase phase, double pe, std::optional<double> mq_c) {
    const int iteration = run_.records.back().iteration + 1;
    const MatchStep step = match_on_set(run_.state, ds_, match_set, iteration, config_.signatures);
    IterationRecord rec;
    rec.iteration = iteration;
    rec.phase = phase;
    rec.matched_on = match_set;
    rec.dropped = full_.minus(match_set);
    rec.pe = pe;
    rec.bf = step.bf;
    if (mq_c) rec.mq = *mq_c * step.bf - pe;
    rec.n_newly_matched = step.newly_matched;
    rec.cumulative_matched = run_.state.n_matched();
    run_.records.push_back(rec);
  }

  // Returns true when a stop condition ended the run. With a limit, returns
  // false after that many committed iterations so DAME can take over.
  bool flame_phase(std::optional<int> limit) {
    for (int done = 0; !limit || done < *limit; ++done) {
      if (check_stop(current_.size() >= 2)) return true;
      const std::vector<std::size_t> candidates = current_.columns();
      const std::vector<std::size_t> eligible = run_.state.eligible_units();
      const Availability avail = availability(ds_, eligible);
      std::vector<double> pe(candidates.size());
      std::vector<double> bf(candidates.size());
      detail::parallel_for(candidates.size(), config_.threads, [&](std::size_t i) {
        const CovariateSet s = current_.without(candidates[i]);
        pe[i] = pe_.evaluate(s).pe;
        bf[i] = balancing_factor(count_matchable(ds_, s, eligible, config_.signatures), avail.treated,
                                 avail.control);
      });
      std::size_t best = 0;
      double best_mq = config_.c * bf[0] - pe[0];
      for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double mq = config_.c * bf[i] - pe[i];
        if (mq > best_mq) {
          best_mq = mq;
          best = i;
        }
      }
      current_ = current_.without(candidates[best]);
      commit(current_, Phase::kFlame, pe[best], config_.c);
    }
    return false;
  }

  void dame_phase() {
    const CovariateSet universe = current_;
    ActiveSetLattice lattice;
    for (std::size_t j : universe.columns()) lattice.add_active(CovariateSet::single(j));

    // The drop-set equal to the universe would match on nothing.
    auto candidates = [&] {
      std::vector<CovariateSet> out;
      for (CovariateSet s : lattice.active()) {
        if (s != universe) out.push_back(s);
      }
      return out;
    };
    while (true) {
      const std::vector<CovariateSet> active = candidates();
      if (check_stop(!active.empty())) return;
      std::vector<double> pe(active.size());
      detail::parallel_for(active.size(), config_.threads,
                           [&](std::size_t i) { pe[i] = pe_.evaluate(universe.minus(active[i])).pe; });
      // Active sets ascend by bitmask, so among equal PE and size the
      // earliest entry wins.
      std::size_t best = 0;
      for (std::size_t i = 1; i < active.size(); ++i) {
        if (pe[i] < pe[best] || (pe[i] == pe[best] && active[i].size() < active[best].size())) best = i;
      }
      const CovariateSet chosen = active[best];
      commit(universe.minus(chosen), Phase::kDame, pe[best], std::nullopt);
      lattice.mark_processed(chosen);
      for (CovariateSet s : generate_new_active_sets(chosen, lattice, universe)) lattice.add_active(s);
    }
  }

  const EncodedDataset& ds_;
  const PredictiveErrorModel& pe_;
  const AlgoConfig& config_;
  const CovariateSet full_;
  CovariateSet current_;
  MatchRun run_;
};

}  // namespace

MatchRun run_flame(const EncodedDataset& ds, const PredictiveErrorModel& pe, const AlgoConfig& config) {
  AlgoConfig c = config;
  c.algorithm = Algorithm::kFlame;
  return Runner(ds, pe, c).run();
}

MatchRun run_dame(const EncodedDataset& ds, const PredictiveErrorModel& pe, const AlgoConfig& config) {
  AlgoConfig c = config;
  c.algorithm = Algorithm::kDame;
  return Runner(ds, pe, c).run();
}

MatchRun run_hybrid(const EncodedDataset& ds, const PredictiveErrorModel& pe, const AlgoConfig& config) {
  AlgoConfig c = config;
  c.algorithm = Algorithm::kHybrid;
  return Runner(ds, pe, c).run();
}

MatchRun run_matching(const EncodedDataset& ds, const PredictiveErrorModel& pe, const AlgoConfig& config) {
  return Runner(ds, pe, config).run();
}

MatchRun run_matching(const EncodedDataset& ds, const EncodedDataset& holdout, const AlgoConfig& config) {
  validate(config);
  const PredictiveErrorModel pe(holdout, config.predictor);
  return run_matching(ds, pe, config);
}

}  // namespace ame
