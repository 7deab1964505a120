#include "ame/effects.hpp"

#include <string>

#include "ame/error.hpp"

namespace ame {

double group_cate(const MatchedGroup& g, std::span<const double> outcomes, std::span<const std::uint8_t> treatment) {
  double treated_sum = 0.0;
  double control_sum = 0.0;
  std::size_t treated = 0;
  std::size_t control = 0;
  for (std::size_t u : g.members) {
    if (treatment[u]) {
      treated_sum += outcomes[u];
      ++treated;
    } else {
      control_sum += outcomes[u];
      ++control;
    }
  }
  if (treated == 0 || control == 0) {
    throw Error(ErrorCode::kInvalidArgument, "group CATE needs treated and control members");
  }
  return treated_sum / static_cast<double>(treated) - control_sum / static_cast<double>(control);
}

std::vector<double> group_cates(const MatchState& state, std::span<const double> outcomes,
                                std::span<const std::uint8_t> treatment) {
  std::vector<double> out;
  out.reserve(state.groups().size());
  for (const MatchedGroup& g : state.groups()) out.push_back(group_cate(g, outcomes, treatment));
  return out;
}

double unit_cate(std::size_t unit, const MatchState& state, std::span<const double> outcomes,
                 std::span<const std::uint8_t> treatment) {
  const auto main = unit < state.n_units() ? state.main_group(unit) : std::nullopt;
  if (!main) throw Error(ErrorCode::kUnitUnmatched, "unit " + std::to_string(unit) + " is not matched");
  return group_cate(state.groups()[*main], outcomes, treatment);
}

namespace {

EffectEstimate average_over_units(const MatchState& state, std::span<const double> outcomes,
                                  std::span<const std::uint8_t> treatment, bool treated_only, EffectKind kind) {
  const std::vector<double> cates = group_cates(state, outcomes, treatment);
  std::vector<std::uint8_t> used(cates.size(), 0);
  double sum = 0.0;
  EffectEstimate est;
  est.kind = kind;
  for (std::size_t u = 0; u < state.n_units(); ++u) {
    const auto main = state.main_group(u);
    if (!main || (treated_only && !treatment[u])) continue;
    sum += cates[*main];
    ++est.n_units;
    if (!used[*main]) {
      used[*main] = 1;
      ++est.n_groups;
    }
  }
  if (est.n_units == 0) {
    throw Error(ErrorCode::kNoMatches, treated_only ? "no treated unit is matched" : "no unit is matched");
  }
  est.value = sum / static_cast<double>(est.n_units);
  return est;
}

}  // namespace

EffectEstimate ate(const MatchState& state, std::span<const double> outcomes, std::span<const std::uint8_t> treatment) {
  return average_over_units(state, outcomes, treatment, false, EffectKind::kAte);
}

EffectEstimate att(const MatchState& state, std::span<const double> outcomes, std::span<const std::uint8_t> treatment) {
  return average_over_units(state, outcomes, treatment, true, EffectKind::kAtt);
}

}  // namespace ame
