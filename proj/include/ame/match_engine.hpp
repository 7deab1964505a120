#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ame/covariate_set.hpp"
#include "ame/dataset.hpp"

namespace ame {

struct SignatureOptions {
  // Testing hooks: take the hashing route even when the mixed-radix code
  // fits, and truncate digests to force collisions.
  bool force_hash = false;
  unsigned hash_bits = 64;
};

/// Per-unit signatures on a covariate set. When `exact` is true the values are
/// mixed-radix codes and equality is exact; otherwise they are digests and
/// equal values must be confirmed by comparing code tuples.
struct Signatures {
  std::vector<std::uint64_t> values;
  bool exact = true;
};

/// Product of effective cardinalities over `s`, or nullopt when it does not
/// fit in 64 bits.
std::optional<std::uint64_t> radix_capacity(const EncodedDataset& ds, CovariateSet s);

/// Signatures of `units` (all units when empty) on the nonempty set `s`.
/// The mixed-radix code is sum_j code(u, j) * R_j with R_j the product of the
/// effective cardinalities of the columns of `s` preceding j.
Signatures compute_signatures(const EncodedDataset& ds, CovariateSet s, std::span<const std::size_t> units = {},
                              SignatureOptions options = {});

/// True when units `a` and `b` agree on every column of `s`.
bool same_codes(const EncodedDataset& ds, CovariateSet s, std::size_t a, std::size_t b);

struct MatchedGroup {
  CovariateSet on_set;
  std::vector<std::pair<std::size_t, std::uint32_t>> signature_values;  // (column, code)
  std::vector<std::size_t> members;                                    // row indices, ascending
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  int iteration = 0;
};

/// Buckets the eligible units by their codes on `s` and keeps buckets holding
/// both arms. Groups come out ordered by ascending code tuple.
std::vector<MatchedGroup> form_groups(const EncodedDataset& ds, CovariateSet s, std::span<const std::size_t> eligible,
                                      int iteration, SignatureOptions options = {});

struct MatchCounts {
  std::size_t matched_treated = 0;
  std::size_t matched_control = 0;
};

/// How many eligible units of each arm would land in a valid group on `s`.
/// Same answer as form_groups without materializing the groups.
MatchCounts count_matchable(const EncodedDataset& ds, CovariateSet s, std::span<const std::size_t> eligible,
                            SignatureOptions options = {});

/// matched_treated / available_treated + matched_control / available_control.
/// Throws NoAvailableUnits when either arm has nothing available.
double balancing_factor(MatchCounts matched, std::size_t available_treated, std::size_t available_control);

/// Groups from one form_groups call are disjoint, so their arm counts add up.
double balancing_factor(std::span<const MatchedGroup> groups, std::size_t available_treated,
                        std::size_t available_control);

class MatchState {
 public:
  MatchState() = default;
  MatchState(std::size_t n_units, bool with_replacement);

  std::size_t n_units() const { return matched_.size(); }
  bool with_replacement() const { return with_replacement_; }
  bool is_matched(std::size_t unit) const { return matched_[unit] != 0; }
  std::optional<std::size_t> main_group(std::size_t unit) const;
  const std::vector<MatchedGroup>& groups() const { return groups_; }
  std::size_t n_matched() const { return n_matched_; }

  /// All units with replacement, unmatched units without.
  std::vector<std::size_t> eligible_units() const;

  /// Appends groups and returns the number of units matched for the first time.
  std::size_t add_groups(std::vector<MatchedGroup> groups);

 private:
  std::vector<std::uint8_t> matched_;
  std::vector<std::size_t> main_group_;
  std::vector<MatchedGroup> groups_;
  std::size_t n_matched_ = 0;
  bool with_replacement_ = false;
};

struct Availability {
  std::size_t treated = 0;
  std::size_t control = 0;
};

Availability availability(const EncodedDataset& ds, std::span<const std::size_t> eligible);

struct MatchStep {
  double bf = 0.0;
  std::size_t newly_matched = 0;
  std::size_t groups_added = 0;
};

/// Forms groups on `s` among the currently eligible units and commits them.
MatchStep match_on_set(MatchState& state, const EncodedDataset& ds, CovariateSet s, int iteration,
                       SignatureOptions options = {});

/// BF that match_on_set would report, without touching the state.
double tentative_balancing_factor(const MatchState& state, const EncodedDataset& ds, CovariateSet s,
                                  SignatureOptions options = {});

}  // namespace ame
