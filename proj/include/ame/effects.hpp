#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ame/match_engine.hpp"

namespace ame {

enum class EffectKind { kAte, kAtt, kCate };

struct EffectEstimate {
  EffectKind kind = EffectKind::kAte;
  double value = 0.0;
  std::size_t n_units = 0;
  std::size_t n_groups = 0;
};

/// Mean treated outcome minus mean control outcome within the group.
double group_cate(const MatchedGroup& g, std::span<const double> outcomes, std::span<const std::uint8_t> treatment);

/// CATE of the unit's main group. Throws UnitUnmatched.
double unit_cate(std::size_t unit, const MatchState& state, std::span<const double> outcomes,
                 std::span<const std::uint8_t> treatment);

/// Mean of unit CATEs over matched units, i.e. group CATEs weighted by the
/// number of units whose main group they are. Throws NoMatches.
EffectEstimate ate(const MatchState& state, std::span<const double> outcomes, std::span<const std::uint8_t> treatment);

/// Mean of unit CATEs over matched treated units. Throws NoMatches.
EffectEstimate att(const MatchState& state, std::span<const double> outcomes, std::span<const std::uint8_t> treatment);

/// Group CATEs in group order.
std::vector<double> group_cates(const MatchState& state, std::span<const double> outcomes,
                                std::span<const std::uint8_t> treatment);

}  // namespace ame
