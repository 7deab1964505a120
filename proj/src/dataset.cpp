#include "ame/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "ame/covariate_set.hpp"
#include "ame/error.hpp"
#include "ame/one_hot.hpp"
#include "ame/random.hpp"
#include "ame/ridge.hpp"

namespace ame {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

}  // namespace

EncodedDataset::EncodedDataset(DatasetParts parts)
    : names_(std::move(parts.covariate_names)),
      labels_(std::move(parts.labels)),
      effective_cardinality_(std::move(parts.effective_cardinality)),
      codes_(std::move(parts.codes)),
      treatment_(std::move(parts.treatment)),
      outcome_(std::move(parts.outcome)),
      unit_ids_(std::move(parts.unit_ids)),
      missing_(std::move(parts.missing)),
      treatment_name_(std::move(parts.treatment_name)),
      outcome_name_(std::move(parts.outcome_name)) {
  const std::size_t n = treatment_.size();
  const std::size_t p = names_.size();
  if (n == 0) throw Error(ErrorCode::kEmptyTable, "dataset has no rows");
  if (p == 0) throw Error(ErrorCode::kInvalidArgument, "dataset has no covariates");
  if (p > kMaxCovariates) {
    throw Error(ErrorCode::kInvalidArgument,
                "at most " + std::to_string(kMaxCovariates) + " covariates are supported, got " +
                    std::to_string(p));
  }
  if (outcome_.size() != n || unit_ids_.size() != n || codes_.size() != n * p || labels_.size() != p) {
    throw Error(ErrorCode::kInvalidArgument, "dataset parts have inconsistent sizes");
  }
  if (effective_cardinality_.empty()) {
    for (const auto& l : labels_) effective_cardinality_.push_back(static_cast<std::uint32_t>(l.size()));
  }
  if (effective_cardinality_.size() != p) {
    throw Error(ErrorCode::kInvalidArgument, "effective cardinality list has wrong length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (treatment_[i] > 1) throw Error(ErrorCode::kNonBinaryTreatment, "treatment must be 0 or 1");
    if (!std::isfinite(outcome_[i])) throw Error(ErrorCode::kUnparseableOutcome, "outcome must be finite");
  }
  std::size_t unresolved = 0;
  for (std::size_t j = 0; j < p; ++j) {
    if (effective_cardinality_[j] < labels_[j].size()) {
      throw Error(ErrorCode::kInvalidArgument, "effective cardinality below observed cardinality");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t c = codes_[j * n + i];
      if (c == kUnresolvedCode) {
        ++unresolved;
      } else if (c >= effective_cardinality_[j]) {
        throw Error(ErrorCode::kInvalidArgument, "code out of range in column '" + names_[j] + "'");
      }
    }
  }
  if (unresolved != missing_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "unresolved cells and missing-cell records disagree");
  }
}

std::optional<std::size_t> EncodedDataset::covariate_index(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::string EncodedDataset::decode(std::size_t unit, std::size_t j, std::string_view missing_label) const {
  const std::uint32_t c = code(unit, j);
  if (c < cardinality(j)) return labels_[j][c];
  return std::string(missing_label);
}

std::vector<ColumnSchema> EncodedDataset::schema() const {
  std::vector<ColumnSchema> out;
  for (std::size_t j = 0; j < n_covariates(); ++j) out.push_back({names_[j], cardinality(j), ColumnKind::kCovariate});
  out.push_back({treatment_name_, 2, ColumnKind::kTreatment});
  out.push_back({outcome_name_, 0, ColumnKind::kOutcome});
  return out;
}

std::size_t EncodedDataset::count_treated() const {
  return static_cast<std::size_t>(std::count(treatment_.begin(), treatment_.end(), std::uint8_t{1}));
}

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> rows) const {
  DatasetParts parts;
  parts.covariate_names = names_;
  parts.labels = labels_;
  parts.effective_cardinality = effective_cardinality_;
  parts.treatment_name = treatment_name_;
  parts.outcome_name = outcome_name_;
  const std::size_t n = n_units();
  const std::size_t m = rows.size();
  parts.codes.resize(m * n_covariates());
  for (std::size_t j = 0; j < n_covariates(); ++j) {
    for (std::size_t r = 0; r < m; ++r) parts.codes[j * m + r] = codes_[j * n + rows[r]];
  }
  std::vector<std::size_t> new_row(n, n);
  for (std::size_t r = 0; r < m; ++r) {
    parts.treatment.push_back(treatment_[rows[r]]);
    parts.outcome.push_back(outcome_[rows[r]]);
    parts.unit_ids.push_back(unit_ids_[rows[r]]);
    new_row[rows[r]] = r;
  }
  for (const MissingCell& cell : missing_) {
    if (new_row[cell.row] != n) parts.missing.push_back({new_row[cell.row], cell.column});
  }
  std::sort(parts.missing.begin(), parts.missing.end(),
            [](const MissingCell& a, const MissingCell& b) {
              return std::tie(a.row, a.column) < std::tie(b.row, b.column);
            });
  return EncodedDataset(std::move(parts));
}

DatasetParts EncodedDataset::to_parts() const {
  DatasetParts parts;
  parts.covariate_names = names_;
  parts.labels = labels_;
  parts.effective_cardinality = effective_cardinality_;
  parts.codes = codes_;
  parts.treatment = treatment_;
  parts.outcome = outcome_;
  parts.unit_ids = unit_ids_;
  parts.missing = missing_;
  parts.treatment_name = treatment_name_;
  parts.outcome_name = outcome_name_;
  return parts;
}

EncodedDataset encode_table(const CsvTable& table, const LoadOptions& options, const EncodedDataset* reference) {
  const auto& header = table.header;
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : header) {
      if (!seen.insert(h).second) throw Error(ErrorCode::kMalformedCsv, "duplicate column name '" + h + "'");
    }
  }
  auto find_column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::kMissingColumn, "column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t t_col = find_column(options.treatment_col);
  const std::size_t y_col = find_column(options.outcome_col);
  if (t_col == y_col) throw Error(ErrorCode::kInvalidArgument, "treatment and outcome columns must differ");
  std::optional<std::size_t> id_col;
  if (options.id_col) id_col = find_column(*options.id_col);

  std::vector<std::size_t> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != t_col && c != y_col && c != id_col) cov_cols.push_back(c);
  }
  if (reference != nullptr) {
    const auto& ref_names = reference->covariate_names();
    if (ref_names.size() != cov_cols.size()) {
      throw Error(ErrorCode::kSchemaMismatch, "table has " + std::to_string(cov_cols.size()) +
                                                  " covariates, reference has " + std::to_string(ref_names.size()));
    }
    std::vector<std::size_t> aligned;
    for (const auto& name : ref_names) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw Error(ErrorCode::kSchemaMismatch, "covariate '" + name + "' missing");
      const auto c = static_cast<std::size_t>(it - header.begin());
      if (c == t_col || c == y_col || c == id_col) {
        throw Error(ErrorCode::kSchemaMismatch, "covariate '" + name + "' is used as a non-covariate column");
      }
      aligned.push_back(c);
    }
    cov_cols = std::move(aligned);
  }
  if (cov_cols.empty()) throw Error(ErrorCode::kInvalidArgument, "table has no covariate columns");

  const std::size_t n = table.rows.size();
  const std::size_t p = cov_cols.size();
  if (n == 0) throw Error(ErrorCode::kEmptyTable, "table has no data rows");

  DatasetParts parts;
  parts.treatment_name = options.treatment_col;
  parts.outcome_name = options.outcome_col;
  parts.codes.resize(n * p);
  parts.labels.resize(p);
  for (std::size_t k = 0; k < p; ++k) parts.covariate_names.push_back(header[cov_cols[k]]);

  std::vector<std::unordered_map<std::string, std::uint32_t>> dictionaries(p);
  if (reference != nullptr) {
    for (std::size_t k = 0; k < p; ++k) {
      parts.labels[k] = reference->labels(k);
      for (std::uint32_t c = 0; c < parts.labels[k].size(); ++c) dictionaries[k].emplace(parts.labels[k][c], c);
    }
  }

  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = table.rows[r];
    const std::string_view t = trim(row[t_col]);
    if (t == "0" || t == "1") {
      parts.treatment.push_back(t == "1" ? 1 : 0);
    } else {
      throw Error(ErrorCode::kNonBinaryTreatment, "row " + std::to_string(r + 1) + ", column '" +
                                                      options.treatment_col + "': value '" + row[t_col] +
                                                      "' is not 0 or 1");
    }
    const std::string_view y = trim(row[y_col]);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(y.data(), y.data() + y.size(), value);
    if (y.empty() || ec != std::errc() || ptr != y.data() + y.size() || !std::isfinite(value)) {
      throw Error(ErrorCode::kUnparseableOutcome, "row " + std::to_string(r + 1) + ", column '" +
                                                      options.outcome_col + "': cannot parse '" + row[y_col] +
                                                      "' as a finite number");
    }
    parts.outcome.push_back(value);
    parts.unit_ids.push_back(id_col ? row[*id_col] : std::to_string(r));

    for (std::size_t k = 0; k < p; ++k) {
      const std::string& cell = row[cov_cols[k]];
      std::uint32_t code = kUnresolvedCode;
      if (cell.empty() || cell == options.na_token) {
        parts.missing.push_back({r, k});
      } else {
        auto [it, inserted] = dictionaries[k].try_emplace(cell, static_cast<std::uint32_t>(parts.labels[k].size()));
        if (inserted) parts.labels[k].push_back(cell);
        code = it->second;
      }
      parts.codes[k * n + r] = code;
    }
  }
  for (std::size_t k = 0; k < p; ++k) {
    if (parts.labels[k].empty()) {
      throw Error(ErrorCode::kMalformedCsv, "covariate '" + parts.covariate_names[k] + "' has no observed values");
    }
    parts.effective_cardinality.push_back(static_cast<std::uint32_t>(parts.labels[k].size()));
  }
  return EncodedDataset(std::move(parts));
}

EncodedDataset load_table(const std::filesystem::path& path, const LoadOptions& options,
                          const EncodedDataset* reference) {
  return encode_table(read_csv(path), options, reference);
}

namespace {

EncodedDataset drop_missing(const EncodedDataset& ds) {
  std::vector<std::uint8_t> has_missing(ds.n_units(), 0);
  for (const MissingCell& cell : ds.missing_cells()) has_missing[cell.row] = 1;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.n_units(); ++i) {
    if (!has_missing[i]) keep.push_back(i);
  }
  if (keep.empty()) throw Error(ErrorCode::kAllRowsDropped, "every row has a missing covariate");
  return ds.subset(keep);
}

EncodedDataset sentinel_missing(const EncodedDataset& ds) {
  DatasetParts parts = ds.to_parts();
  const std::size_t n = ds.n_units();
  // Missing cells are recorded in row order, so sentinels ascend with row.
  std::vector<MissingCell> cells = parts.missing;
  std::stable_sort(cells.begin(), cells.end(),
                   [](const MissingCell& a, const MissingCell& b) { return a.column < b.column; });
  for (const MissingCell& cell : cells) {
    parts.codes[cell.column * n + cell.row] = parts.effective_cardinality[cell.column]++;
  }
  parts.missing.clear();
  return EncodedDataset(std::move(parts));
}

struct ScratchCodes {
  std::size_t n;
  const std::vector<std::uint32_t>* codes;
  std::uint32_t code(std::size_t unit, std::size_t j) const { return (*codes)[j * n + unit]; }
};

EncodedDataset impute_missing(const EncodedDataset& ds, const MissingPolicy& policy, std::uint64_t seed,
                              bool draw_noise) {
  DatasetParts parts = ds.to_parts();
  const std::size_t n = ds.n_units();
  const std::size_t p = ds.n_covariates();
  std::vector<std::vector<std::size_t>> missing_rows(p);
  std::vector<std::uint8_t> is_missing(n * p, 0);
  for (const MissingCell& cell : ds.missing_cells()) {
    missing_rows[cell.column].push_back(cell.row);
    is_missing[cell.column * n + cell.row] = 1;
  }

  for (std::size_t j = 0; j < p; ++j) {
    if (missing_rows[j].empty()) continue;
    std::vector<std::size_t> counts(ds.cardinality(j), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_missing[j * n + i]) ++counts[ds.code(i, j)];
    }
    const auto mode = static_cast<std::uint32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    for (std::size_t i : missing_rows[j]) parts.codes[j * n + i] = mode;
  }

  std::mt19937_64 rng(seed);
  const ScratchCodes scratch{n, &parts.codes};
  for (int sweep = 0; sweep < policy.impute_sweeps; ++sweep) {
    for (std::size_t j = 0; j < p; ++j) {
      if (missing_rows[j].empty()) continue;
      std::vector<std::size_t> others;
      for (std::size_t k = 0; k < p; ++k) {
        if (k != j) others.push_back(k);
      }
      const OneHotLayout layout(ds, others);
      std::vector<std::size_t> observed;
      std::vector<double> target;
      for (std::size_t i = 0; i < n; ++i) {
        if (is_missing[j * n + i]) continue;
        observed.push_back(i);
        target.push_back(static_cast<double>(ds.code(i, j)));
      }
      Eigen::MatrixXd gram;
      Eigen::VectorXd rhs;
      layout.accumulate(scratch, observed, target, gram, rhs);
      const Eigen::VectorXd beta = solve_ridge_normal(gram, rhs, policy.ridge_lambda);

      double noise_sd = 0.0;
      if (draw_noise) {
        double sse = 0.0;
        for (std::size_t r = 0; r < observed.size(); ++r) {
          const double e = target[r] - layout.predict(scratch, observed[r], beta);
          sse += e * e;
        }
        noise_sd = std::sqrt(sse / static_cast<double>(observed.size()));
      }
      const double top = static_cast<double>(ds.cardinality(j) - 1);
      for (std::size_t i : missing_rows[j]) {
        double value = layout.predict(scratch, i, beta);
        if (noise_sd > 0.0) value += noise_sd * standard_normal(rng);
        value = std::clamp(std::round(value), 0.0, top);
        parts.codes[j * n + i] = static_cast<std::uint32_t>(value);
      }
    }
  }
  parts.missing.clear();
  return EncodedDataset(std::move(parts));
}

}  // namespace

std::vector<EncodedDataset> apply_missing_policy(const EncodedDataset& ds, const MissingPolicy& policy) {
  if (policy.impute_sweeps < 1 || policy.impute_count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "impute sweeps and count must be positive");
  }
  if (!(policy.ridge_lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "ridge lambda must be non-negative");
  switch (policy.mode) {
    case MissingMode::kDrop:
      return {drop_missing(ds)};
    case MissingMode::kSentinel:
      return {sentinel_missing(ds)};
    case MissingMode::kImpute: {
      std::vector<EncodedDataset> out;
      const bool draw_noise = policy.impute_count > 1;
      for (int r = 0; r < policy.impute_count; ++r) {
        out.push_back(impute_missing(ds, policy, policy.seed + static_cast<std::uint64_t>(r), draw_noise));
      }
      return out;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown missing-data mode");
}

void check_schema_compatible(const EncodedDataset& matching, const EncodedDataset& holdout) {
  if (matching.covariate_names() != holdout.covariate_names()) {
    throw Error(ErrorCode::kSchemaMismatch, "holdout covariates differ from the matching table's covariates");
  }
  for (std::size_t j = 0; j < matching.n_covariates(); ++j) {
    const auto& a = matching.labels(j);
    const auto& b = holdout.labels(j);
    const std::size_t common = std::min(a.size(), b.size());
    if (!std::equal(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(common), b.begin())) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "covariate '" + matching.covariate_names()[j] + "' encodes categories differently in the holdout");
    }
  }
}

HoldoutSplit split_holdout(const EncodedDataset& ds, const HoldoutSpec& spec, const EncodedDataset* external) {
  if (spec.source == HoldoutSource::kExternal) {
    if (external == nullptr) throw Error(ErrorCode::kInvalidArgument, "external holdout source needs a table");
    check_schema_compatible(ds, *external);
    return {ds, *external};
  }
  if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "holdout fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.n_units();
  // The small offset keeps products like 0.7 * 10 from rounding up past 7.
  const auto holdout_size =
      static_cast<std::size_t>(std::ceil(spec.fraction * static_cast<double>(n) - 1e-9));
  if (holdout_size < 2 || holdout_size >= n) {
    throw Error(ErrorCode::kHoldoutTooSmall, "holdout of " + std::to_string(holdout_size) + " rows from " +
                                                 std::to_string(n) + " leaves too few rows for one side");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = 0; i < holdout_size; ++i) {
    const std::size_t pick = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(order[i], order[pick]);
  }
  std::vector<std::size_t> holdout_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout_size));
  std::vector<std::size_t> matching_rows(order.begin() + static_cast<std::ptrdiff_t>(holdout_size), order.end());
  std::sort(holdout_rows.begin(), holdout_rows.end());
  std::sort(matching_rows.begin(), matching_rows.end());
  return {ds.subset(matching_rows), ds.subset(holdout_rows)};
}

}  // namespace ame
