// Shared fixtures and reference implementations for the test suites. The
// oracles here deliberately avoid the library's own grouping, lattice and
// solver code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ame/algorithms.hpp"
#include "ame/dataset.hpp"
#include "ame/match_engine.hpp"
#include "ame/predictive_error.hpp"
#include "ame/random.hpp"

namespace ame::test {

/// Dataset from per-unit code rows. Cardinalities default to max code + 1.
inline EncodedDataset make_dataset(const std::vector<std::vector<std::uint32_t>>& rows,
                                   const std::vector<std::uint8_t>& treatment, std::vector<double> outcome = {},
                                   std::vector<std::uint32_t> cards = {}) {
  const std::size_t n = rows.size();
  const std::size_t p = rows.front().size();
  if (outcome.empty()) outcome.assign(n, 0.0);
  if (cards.empty()) {
    cards.assign(p, 1);
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < p; ++j) cards[j] = std::max(cards[j], r[j] + 1);
    }
  }
  DatasetParts parts;
  for (std::size_t j = 0; j < p; ++j) {
    parts.covariate_names.push_back("x" + std::to_string(j));
    std::vector<std::string> labels;
    for (std::uint32_t c = 0; c < cards[j]; ++c) labels.push_back(std::to_string(c));
    parts.labels.push_back(std::move(labels));
  }
  parts.codes.resize(n * p);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t j = 0; j < p; ++j) parts.codes[j * n + u] = rows[u][j];
    parts.unit_ids.push_back(std::to_string(u));
  }
  parts.treatment = treatment;
  parts.outcome = std::move(outcome);
  return EncodedDataset(std::move(parts));
}

struct RandomSpec {
  std::size_t n = 40;
  std::size_t p = 4;
  std::uint32_t max_card = 3;
  double treated_share = 0.5;
};

/// Random codes and treatment with both arms present; outcome is a noisy
/// linear function of the codes.
inline EncodedDataset random_dataset(std::mt19937_64& rng, const RandomSpec& spec) {
  std::vector<std::uint32_t> cards(spec.p);
  for (auto& c : cards) c = 1 + static_cast<std::uint32_t>(uniform_below(rng, spec.max_card));
  std::vector<double> weight(spec.p);
  for (auto& w : weight) w = standard_normal(rng);
  std::vector<std::vector<std::uint32_t>> rows(spec.n, std::vector<std::uint32_t>(spec.p));
  std::vector<std::uint8_t> t(spec.n);
  std::vector<double> y(spec.n);
  for (std::size_t u = 0; u < spec.n; ++u) {
    for (std::size_t j = 0; j < spec.p; ++j) rows[u][j] = static_cast<std::uint32_t>(uniform_below(rng, cards[j]));
    t[u] = uniform_unit(rng) < spec.treated_share ? 1 : 0;
    y[u] = 0.5 * standard_normal(rng) + t[u];
    for (std::size_t j = 0; j < spec.p; ++j) y[u] += weight[j] * rows[u][j];
  }
  t[0] = 1;
  t[1] = 0;
  return make_dataset(rows, t, y, cards);
}

using MemberSets = std::set<std::vector<std::size_t>>;

/// Naive grouping: key each eligible unit by its code tuple on `s`, keep
/// keys holding both arms.
inline MemberSets naive_groups(const EncodedDataset& ds, CovariateSet s, const std::vector<std::size_t>& eligible) {
  std::map<std::vector<std::uint32_t>, std::vector<std::size_t>> buckets;
  for (std::size_t u : eligible) {
    std::vector<std::uint32_t> key;
    for (std::size_t j = 0; j < ds.n_covariates(); ++j) {
      if (s.contains(j)) key.push_back(ds.code(u, j));
    }
    buckets[key].push_back(u);
  }
  MemberSets out;
  for (auto& [key, members] : buckets) {
    bool t = false;
    bool c = false;
    for (std::size_t u : members) (ds.treatment()[u] ? t : c) = true;
    if (t && c) {
      std::sort(members.begin(), members.end());
      out.insert(members);
    }
  }
  return out;
}

inline MemberSets member_sets(const std::vector<MatchedGroup>& groups) {
  MemberSets out;
  for (const auto& g : groups) out.insert(g.members);
  return out;
}

inline std::vector<std::size_t> all_units(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

/// Number of groups violating validity: an empty arm, wrong arm counts, or a
/// member disagreeing with the signature values on the on_set.
inline std::size_t group_violations(const EncodedDataset& ds, const MatchState& state) {
  std::size_t bad = 0;
  for (const MatchedGroup& g : state.groups()) {
    std::size_t t = 0;
    for (std::size_t u : g.members) t += ds.treatment()[u];
    const std::size_t c = g.members.size() - t;
    bool ok = t >= 1 && c >= 1 && t == g.n_treated && c == g.n_control;
    ok = ok && g.signature_values.size() == g.on_set.size();
    for (const auto& [j, code] : g.signature_values) {
      ok = ok && g.on_set.contains(j);
      for (std::size_t u : g.members) ok = ok && ds.code(u, j) == code;
    }
    bad += ok ? 0 : 1;
  }
  return bad;
}

/// DAME by brute force over the drop-set lattice. At every step the active
/// drop-sets are recomputed from scratch as every unprocessed nonempty
/// proper subset of the covariates whose one-smaller subsets are all
/// processed (singletons are always admissible). PE values come from `pe`;
/// grouping is naive tuple keying. Runs until an arm is exhausted or no
/// drop-set is left. Returns each unit's main-group covariate set.
inline std::vector<std::optional<CovariateSet>> dame_oracle(const EncodedDataset& ds, const PredictiveErrorModel& pe) {
  const std::size_t p = ds.n_covariates();
  const std::uint64_t full = (std::uint64_t{1} << p) - 1;
  std::vector<std::optional<CovariateSet>> main(ds.n_units());
  std::set<std::uint64_t> processed;

  auto match = [&](std::uint64_t on) {
    std::vector<std::size_t> eligible;
    for (std::size_t u = 0; u < ds.n_units(); ++u) {
      if (!main[u]) eligible.push_back(u);
    }
    for (const auto& members : naive_groups(ds, CovariateSet(on), eligible)) {
      for (std::size_t u : members) main[u] = CovariateSet(on);
    }
  };
  auto arms_left = [&] {
    bool t = false;
    bool c = false;
    for (std::size_t u = 0; u < ds.n_units(); ++u) {
      if (!main[u]) (ds.treatment()[u] ? t : c) = true;
    }
    return t && c;
  };

  match(full);
  while (arms_left()) {
    std::vector<std::uint64_t> active;
    for (std::uint64_t s = 1; s < full; ++s) {
      if (processed.count(s) != 0) continue;
      bool admissible = true;
      if (std::popcount(s) > 1) {
        for (std::size_t j = 0; j < p; ++j) {
          if (((s >> j) & 1U) != 0 && processed.count(s & ~(std::uint64_t{1} << j)) == 0) admissible = false;
        }
      }
      if (admissible) active.push_back(s);
    }
    if (active.empty()) break;
    std::uint64_t best = 0;
    double best_pe = 0.0;
    for (std::uint64_t s : active) {
      const double v = pe.evaluate(CovariateSet(full & ~s)).pe;
      const bool better = best == 0 || v < best_pe ||
                          (v == best_pe && (std::popcount(s) < std::popcount(best) ||
                                            (std::popcount(s) == std::popcount(best) && s < best)));
      if (better) {
        best = s;
        best_pe = v;
      }
    }
    match(full & ~best);
    processed.insert(best);
  }
  return main;
}

/// Dense linear solve by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Ridge coefficients [intercept, slopes] from the normal equations with an
/// unpenalized intercept. When lambda is 0 and there are fewer rows than
/// coefficients, returns the minimum-norm interpolant A^T (A A^T)^-1 y.
inline std::vector<double> ridge_oracle(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                        double lambda) {
  const std::size_t n = x.size();
  const std::size_t d = x.empty() ? 0 : x.front().size();
  const std::size_t k = d + 1;
  auto design = [&](std::size_t r, std::size_t c) { return c == 0 ? 1.0 : x[r][c - 1]; };
  if (lambda == 0.0 && n < k) {
    std::vector<std::vector<double>> aat(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < k; ++c) aat[i][j] += design(i, c) * design(j, c);
      }
    }
    const std::vector<double> w = gauss_solve(aat, y);
    std::vector<double> beta(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) beta[c] += design(i, c) * w[i];
    }
    return beta;
  }
  std::vector<std::vector<double>> g(k, std::vector<double>(k, 0.0));
  std::vector<double> rhs(k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < k; ++i) {
      rhs[i] += design(r, i) * y[r];
      for (std::size_t j = 0; j < k; ++j) g[i][j] += design(r, i) * design(r, j);
    }
  }
  for (std::size_t i = 1; i < k; ++i) g[i][i] += lambda;
  return gauss_solve(g, rhs);
}

/// In-sample MSE of a ridge fit on one-hot codes restricted to `s`, computed
/// with the reference solver. Sentinel codes share one level per column.
inline double oracle_arm_mse(const EncodedDataset& ds, CovariateSet s, bool treated, double lambda) {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (std::size_t u = 0; u < ds.n_units(); ++u) {
    if ((ds.treatment()[u] != 0) != treated) continue;
    std::vector<double> row;
    for (std::size_t j : s.columns()) {
      const std::uint32_t card = ds.cardinality(j);
      const std::uint32_t level = std::min(ds.code(u, j), card);
      for (std::uint32_t l = 0; l <= card; ++l) row.push_back(l == level ? 1.0 : 0.0);
    }
    x.push_back(std::move(row));
    y.push_back(ds.outcome()[u]);
  }
  const std::vector<double> beta = ridge_oracle(x, y, lambda);
  double sse = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    double pred = beta[0];
    for (std::size_t c = 0; c < x[r].size(); ++c) pred += beta[c + 1] * x[r][c];
    sse += (y[r] - pred) * (y[r] - pred);
  }
  return sse / static_cast<double>(x.size());
}

}  // namespace ame::test
