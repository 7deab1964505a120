#include "ame/match_engine.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "ame/error.hpp"

namespace ame {

namespace {

constexpr std::uint64_t kDenseFloor = std::uint64_t{1} << 16;
constexpr std::uint64_t kDenseCeiling = std::uint64_t{1} << 24;

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

bool codes_less(const EncodedDataset& ds, const std::vector<std::size_t>& cols, std::size_t a, std::size_t b) {
  for (std::size_t j : cols) {
    const std::uint32_t ca = ds.code(a, j);
    const std::uint32_t cb = ds.code(b, j);
    if (ca != cb) return ca < cb;
  }
  return false;
}

std::vector<std::size_t> all_units(std::size_t n) {
  std::vector<std::size_t> units(n);
  for (std::size_t i = 0; i < n; ++i) units[i] = i;
  return units;
}

void require_nonempty(CovariateSet s) {
  if (s.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot match on an empty covariate set");
}

// Runs of units sharing a code tuple on `s`, each run sorted by unit index.
// Buckets come out in ascending signature order, which for hashed
// signatures is not the tuple order.
std::vector<std::vector<std::size_t>> bucket_units(const EncodedDataset& ds, CovariateSet s,
                                                   std::span<const std::size_t> units, SignatureOptions options) {
  const Signatures sigs = compute_signatures(ds, s, units, options);
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(units.size());
  for (std::size_t r = 0; r < units.size(); ++r) keyed[r] = {sigs.values[r], units[r]};
  std::sort(keyed.begin(), keyed.end());

  const std::vector<std::size_t> cols = s.columns();
  std::vector<std::vector<std::size_t>> buckets;
  std::size_t begin = 0;
  while (begin < keyed.size()) {
    std::size_t end = begin + 1;
    while (end < keyed.size() && keyed[end].first == keyed[begin].first) ++end;
    std::vector<std::size_t> run;
    run.reserve(end - begin);
    for (std::size_t r = begin; r < end; ++r) run.push_back(keyed[r].second);
    if (sigs.exact) {
      buckets.push_back(std::move(run));
    } else {
      // Collision check: split the digest run by actual code tuple.
      std::stable_sort(run.begin(), run.end(),
                       [&](std::size_t a, std::size_t b) { return codes_less(ds, cols, a, b); });
      std::size_t sub = 0;
      while (sub < run.size()) {
        std::size_t sub_end = sub + 1;
        while (sub_end < run.size() && same_codes(ds, s, run[sub], run[sub_end])) ++sub_end;
        std::vector<std::size_t> bucket(run.begin() + static_cast<std::ptrdiff_t>(sub),
                                        run.begin() + static_cast<std::ptrdiff_t>(sub_end));
        std::sort(bucket.begin(), bucket.end());
        buckets.push_back(std::move(bucket));
        sub = sub_end;
      }
    }
    begin = end;
  }
  return buckets;
}

}  // namespace

std::optional<std::uint64_t> radix_capacity(const EncodedDataset& ds, CovariateSet s) {
  std::uint64_t product = 1;
  for (std::size_t j : s.columns()) {
    const std::uint64_t card = std::max<std::uint32_t>(ds.effective_cardinality(j), 1);
    if (__builtin_mul_overflow(product, card, &product)) return std::nullopt;
  }
  return product;
}

Signatures compute_signatures(const EncodedDataset& ds, CovariateSet s, std::span<const std::size_t> units,
                              SignatureOptions options) {
  require_nonempty(s);
  std::vector<std::size_t> everyone;
  if (units.empty()) {
    everyone = all_units(ds.n_units());
    units = everyone;
  }
  const std::vector<std::size_t> cols = s.columns();
  Signatures out;
  out.values.assign(units.size(), 0);
  const auto capacity = radix_capacity(ds, s);
  if (capacity && !options.force_hash) {
    std::uint64_t radix = 1;
    for (std::size_t j : cols) {
      const auto column = ds.column(j);
      for (std::size_t r = 0; r < units.size(); ++r) out.values[r] += column[units[r]] * radix;
      radix *= std::max<std::uint32_t>(ds.effective_cardinality(j), 1);
    }
    out.exact = true;
    return out;
  }
  out.exact = false;
  const std::uint64_t mask =
      options.hash_bits >= 64 ? std::numeric_limits<std::uint64_t>::max() : (std::uint64_t{1} << options.hash_bits) - 1;
  for (std::size_t r = 0; r < units.size(); ++r) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (std::size_t j : cols) h = mix64(h ^ (ds.code(units[r], j) + 0x9e3779b97f4a7c15ULL + (j << 32)));
    out.values[r] = h & mask;
  }
  return out;
}

bool same_codes(const EncodedDataset& ds, CovariateSet s, std::size_t a, std::size_t b) {
  for (std::size_t j : s.columns()) {
    if (ds.code(a, j) != ds.code(b, j)) return false;
  }
  return true;
}

std::vector<MatchedGroup> form_groups(const EncodedDataset& ds, CovariateSet s, std::span<const std::size_t> eligible,
                                      int iteration, SignatureOptions options) {
  require_nonempty(s);
  if (eligible.empty()) return {};
  const auto treatment = ds.treatment();
  const std::vector<std::size_t> cols = s.columns();

  std::vector<MatchedGroup> groups;
  for (auto& bucket : bucket_units(ds, s, eligible, options)) {
    std::size_t treated = 0;
    for (std::size_t u : bucket) treated += treatment[u];
    const std::size_t control = bucket.size() - treated;
    if (treated == 0 || control == 0) continue;
    MatchedGroup g;
    g.on_set = s;
    for (std::size_t j : cols) g.signature_values.emplace_back(j, ds.code(bucket.front(), j));
    g.members = std::move(bucket);
    g.n_treated = treated;
    g.n_control = control;
    g.iteration = iteration;
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(), [](const MatchedGroup& a, const MatchedGroup& b) {
    return a.signature_values < b.signature_values;
  });
  return groups;
}

MatchCounts count_matchable(const EncodedDataset& ds, CovariateSet s, std::span<const std::size_t> eligible,
                            SignatureOptions options) {
  require_nonempty(s);
  MatchCounts counts;
  if (eligible.empty()) return counts;
  const auto treatment = ds.treatment();
  const auto capacity = radix_capacity(ds, s);
  const std::uint64_t dense_limit = std::clamp<std::uint64_t>(4 * eligible.size(), kDenseFloor, kDenseCeiling);

  if (capacity && *capacity <= dense_limit && !options.force_hash) {
    const Signatures sigs = compute_signatures(ds, s, eligible, options);
    std::vector<std::uint32_t> treated(*capacity, 0);
    std::vector<std::uint32_t> control(*capacity, 0);
    for (std::size_t r = 0; r < eligible.size(); ++r) {
      if (treatment[eligible[r]]) {
        ++treated[sigs.values[r]];
      } else {
        ++control[sigs.values[r]];
      }
    }
    for (std::size_t r = 0; r < eligible.size(); ++r) {
      const std::uint64_t sig = sigs.values[r];
      if (treated[sig] == 0 || control[sig] == 0) continue;
      if (treatment[eligible[r]]) {
        ++counts.matched_treated;
      } else {
        ++counts.matched_control;
      }
    }
    return counts;
  }
  for (const auto& bucket : bucket_units(ds, s, eligible, options)) {
    std::size_t t = 0;
    for (std::size_t u : bucket) t += treatment[u];
    if (t == 0 || t == bucket.size()) continue;
    counts.matched_treated += t;
    counts.matched_control += bucket.size() - t;
  }
  return counts;
}

double balancing_factor(MatchCounts matched, std::size_t available_treated, std::size_t available_control) {
  if (available_treated == 0 || available_control == 0) {
    throw Error(ErrorCode::kNoAvailableUnits, "balancing factor needs at least one available unit in each arm (" +
                                                  std::to_string(available_treated) + " treated, " +
                                                  std::to_string(available_control) + " control)");
  }
  return static_cast<double>(matched.matched_treated) / static_cast<double>(available_treated) +
         static_cast<double>(matched.matched_control) / static_cast<double>(available_control);
}

double balancing_factor(std::span<const MatchedGroup> groups, std::size_t available_treated,
                        std::size_t available_control) {
  MatchCounts counts;
  for (const MatchedGroup& g : groups) {
    counts.matched_treated += g.n_treated;
    counts.matched_control += g.n_control;
  }
  return balancing_factor(counts, available_treated, available_control);
}

MatchState::MatchState(std::size_t n_units, bool with_replacement)
    : matched_(n_units, 0),
      main_group_(n_units, std::numeric_limits<std::size_t>::max()),
      with_replacement_(with_replacement) {}

std::optional<std::size_t> MatchState::main_group(std::size_t unit) const {
  if (!matched_[unit]) return std::nullopt;
  return main_group_[unit];
}

std::vector<std::size_t> MatchState::eligible_units() const {
  std::vector<std::size_t> out;
  out.reserve(matched_.size());
  for (std::size_t i = 0; i < matched_.size(); ++i) {
    if (with_replacement_ || !matched_[i]) out.push_back(i);
  }
  return out;
}

std::size_t MatchState::add_groups(std::vector<MatchedGroup> groups) {
  std::size_t newly = 0;
  for (MatchedGroup& g : groups) {
    const std::size_t id = groups_.size();
    for (std::size_t u : g.members) {
      if (matched_[u]) {
        if (!with_replacement_) {
          throw Error(ErrorCode::kInvalidArgument,
                      "unit " + std::to_string(u) + " is already matched and replacement is off");
        }
        continue;
      }
      matched_[u] = 1;
      main_group_[u] = id;
      ++newly;
    }
    groups_.push_back(std::move(g));
  }
  n_matched_ += newly;
  return newly;
}

Availability availability(const EncodedDataset& ds, std::span<const std::size_t> eligible) {
  Availability a;
  const auto treatment = ds.treatment();
  for (std::size_t u : eligible) {
    if (treatment[u]) {
      ++a.treated;
    } else {
      ++a.control;
    }
  }
  return a;
}

MatchStep match_on_set(MatchState& state, const EncodedDataset& ds, CovariateSet s, int iteration,
                       SignatureOptions options) {
  const std::vector<std::size_t> eligible = state.eligible_units();
  const Availability avail = availability(ds, eligible);
  auto groups = form_groups(ds, s, eligible, iteration, options);
  MatchStep step;
  step.bf = balancing_factor(groups, avail.treated, avail.control);
  step.groups_added = groups.size();
  step.newly_matched = state.add_groups(std::move(groups));
  return step;
}

double tentative_balancing_factor(const MatchState& state, const EncodedDataset& ds, CovariateSet s,
                                  SignatureOptions options) {
  const std::vector<std::size_t> eligible = state.eligible_units();
  const Availability avail = availability(ds, eligible);
  return balancing_factor(count_matchable(ds, s, eligible, options), avail.treated, avail.control);
}

}  // namespace ame
