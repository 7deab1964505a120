#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ame/csv.hpp"

namespace ame {

/// Placeholder code for a cell that was missing in the input and has not yet
/// been resolved by a MissingPolicy.
inline constexpr std::uint32_t kUnresolvedCode = std::numeric_limits<std::uint32_t>::max();

enum class ColumnKind { kCovariate, kTreatment, kOutcome };

struct ColumnSchema {
  std::string name;
  std::uint32_t cardinality = 0;  // observed categories (covariates only)
  ColumnKind kind = ColumnKind::kCovariate;
};

struct MissingCell {
  std::size_t row = 0;
  std::size_t column = 0;
  bool operator==(const MissingCell&) const = default;
};

/// Raw material for an EncodedDataset. Codes are stored column-major.
struct DatasetParts {
  std::vector<std::string> covariate_names;
  std::vector<std::vector<std::string>> labels;  // decode table per covariate
  std::vector<std::uint32_t> effective_cardinality;
  std::vector<std::uint32_t> codes;
  std::vector<std::uint8_t> treatment;
  std::vector<double> outcome;
  std::vector<std::string> unit_ids;
  std::vector<MissingCell> missing;
  std::string treatment_name = "treated";
  std::string outcome_name = "outcome";
};

/// Integer-encoded covariate matrix with binary treatment and real outcome.
///
/// A covariate's cardinality is the number of observed category labels; codes
/// 0..cardinality-1 decode through the label table. Codes at or above the
/// cardinality are sentinels standing in for missing values, each unique
/// within its column, and effective_cardinality() bounds them. Cells that
/// were missing and are still unresolved hold kUnresolvedCode.
class EncodedDataset {
 public:
  EncodedDataset() = default;
  explicit EncodedDataset(DatasetParts parts);

  std::size_t n_units() const { return treatment_.size(); }
  std::size_t n_covariates() const { return names_.size(); }

  std::span<const std::uint32_t> column(std::size_t j) const {
    return {codes_.data() + j * n_units(), n_units()};
  }
  std::uint32_t code(std::size_t unit, std::size_t j) const { return codes_[j * n_units() + unit]; }
  std::span<const std::uint8_t> treatment() const { return treatment_; }
  std::span<const double> outcome() const { return outcome_; }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }

  const std::vector<std::string>& covariate_names() const { return names_; }
  const std::string& treatment_name() const { return treatment_name_; }
  const std::string& outcome_name() const { return outcome_name_; }
  std::optional<std::size_t> covariate_index(std::string_view name) const;

  std::uint32_t cardinality(std::size_t j) const {
    return static_cast<std::uint32_t>(labels_[j].size());
  }
  std::uint32_t effective_cardinality(std::size_t j) const { return effective_cardinality_[j]; }
  const std::vector<std::string>& labels(std::size_t j) const { return labels_[j]; }
  bool is_sentinel(std::size_t unit, std::size_t j) const {
    const std::uint32_t c = code(unit, j);
    return c >= cardinality(j) && c != kUnresolvedCode;
  }
  /// Decoded label; sentinel and unresolved cells decode to `missing_label`.
  std::string decode(std::size_t unit, std::size_t j, std::string_view missing_label = "NA") const;

  const std::vector<MissingCell>& missing_cells() const { return missing_; }
  bool has_unresolved_missing() const { return !missing_.empty(); }

  std::vector<ColumnSchema> schema() const;
  std::size_t count_treated() const;
  std::size_t count_control() const { return n_units() - count_treated(); }

  /// Rows in the given order; missing-cell records are carried along.
  EncodedDataset subset(std::span<const std::size_t> rows) const;

  DatasetParts to_parts() const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> labels_;
  std::vector<std::uint32_t> effective_cardinality_;
  std::vector<std::uint32_t> codes_;
  std::vector<std::uint8_t> treatment_;
  std::vector<double> outcome_;
  std::vector<std::string> unit_ids_;
  std::vector<MissingCell> missing_;
  std::string treatment_name_;
  std::string outcome_name_;
};

struct LoadOptions {
  std::string treatment_col;
  std::string outcome_col;
  std::string na_token = "NA";
  std::optional<std::string> id_col;
};

/// Factor-encodes covariates in first-appearance order. With a reference
/// dataset, covariates are aligned to the reference's column order and the
/// reference's label tables are extended, so equal codes mean equal labels
/// across both datasets.
EncodedDataset encode_table(const CsvTable& table, const LoadOptions& options,
                            const EncodedDataset* reference = nullptr);
EncodedDataset load_table(const std::filesystem::path& path, const LoadOptions& options,
                          const EncodedDataset* reference = nullptr);

enum class MissingMode { kDrop, kImpute, kSentinel };

struct MissingPolicy {
  MissingMode mode = MissingMode::kDrop;
  int impute_sweeps = 5;
  int impute_count = 1;
  std::uint64_t seed = 0;
  double ridge_lambda = 0.1;
};

std::vector<EncodedDataset> apply_missing_policy(const EncodedDataset& ds, const MissingPolicy& policy);

enum class HoldoutSource { kFraction, kExternal };

struct HoldoutSpec {
  HoldoutSource source = HoldoutSource::kFraction;
  double fraction = 0.1;
  std::uint64_t seed = 0;
};

struct HoldoutSplit {
  EncodedDataset matching;
  EncodedDataset holdout;
};

/// Fraction mode samples ceil(fraction * n) holdout rows uniformly without
/// replacement; both parts keep the input's row order. External mode
/// validates `external` against ds and returns both unchanged.
HoldoutSplit split_holdout(const EncodedDataset& ds, const HoldoutSpec& spec,
                           const EncodedDataset* external = nullptr);

/// Throws SchemaMismatch unless both datasets have the same covariate names
/// in the same order and compatible label tables.
void check_schema_compatible(const EncodedDataset& matching, const EncodedDataset& holdout);

}  // namespace ame
