#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ame/dataset.hpp"

namespace ame {

/// One-hot layout for a list of covariates: slot 0 is the intercept, then
/// each covariate j gets cardinality(j) + 1 slots, the last one shared by all
/// sentinel codes of that column.
class OneHotLayout {
 public:
  OneHotLayout(const EncodedDataset& ds, std::vector<std::size_t> columns) : columns_(std::move(columns)) {
    offsets_.reserve(columns_.size());
    cards_.reserve(columns_.size());
    std::size_t next = 1;
    for (std::size_t j : columns_) {
      offsets_.push_back(next);
      cards_.push_back(ds.cardinality(j));
      next += ds.cardinality(j) + 1U;
    }
    dim_ = next;
  }

  std::size_t dim() const { return dim_; }
  const std::vector<std::size_t>& columns() const { return columns_; }

  std::size_t slot(std::size_t k, std::uint32_t code) const {
    return offsets_[k] + (code < cards_[k] ? code : cards_[k]);
  }

  /// Active slots (excluding the intercept) of one unit, one per column.
  template <class Codes>
  void slots_of(const Codes& ds, std::size_t unit, std::vector<std::size_t>& out) const {
    out.clear();
    for (std::size_t k = 0; k < columns_.size(); ++k) out.push_back(slot(k, ds.code(unit, columns_[k])));
  }

  // Codes is any type with code(unit, column); EncodedDataset or a scratch
  // matrix being imputed.

  /// Accumulates the Gram matrix and X^T y over the given units.
  template <class Codes>
  void accumulate(const Codes& ds, std::span<const std::size_t> units, std::span<const double> y,
                  Eigen::MatrixXd& gram, Eigen::VectorXd& rhs) const {
    gram.setZero(dim_, dim_);
    rhs.setZero(dim_);
    std::vector<std::size_t> active;
    for (std::size_t r = 0; r < units.size(); ++r) {
      slots_of(ds, units[r], active);
      const double target = y[r];
      gram(0, 0) += 1.0;
      rhs(0) += target;
      for (std::size_t a = 0; a < active.size(); ++a) {
        const std::size_t sa = active[a];
        gram(sa, 0) += 1.0;
        rhs(sa) += target;
        for (std::size_t b = 0; b <= a; ++b) gram(sa, active[b]) += 1.0;
      }
    }
    // Slots grow with column position, so only the lower triangle was filled.
    for (Eigen::Index c = 1; c < gram.cols(); ++c) {
      for (Eigen::Index r = 0; r < c; ++r) gram(r, c) = gram(c, r);
    }
  }

  template <class Codes>
  double predict(const Codes& ds, std::size_t unit, const Eigen::VectorXd& beta) const {
    double value = beta(0);
    for (std::size_t k = 0; k < columns_.size(); ++k) value += beta(slot(k, ds.code(unit, columns_[k])));
    return value;
  }

 private:
  std::vector<std::size_t> columns_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> cards_;
  std::size_t dim_ = 1;
};

}  // namespace ame
