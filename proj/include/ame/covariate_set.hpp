#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ame {

inline constexpr std::size_t kMaxCovariates = 64;

/// Bitmask over covariate column indices 0..p-1.
class CovariateSet {
 public:
  constexpr CovariateSet() = default;
  constexpr explicit CovariateSet(std::uint64_t bits) : bits_(bits) {}

  static constexpr CovariateSet full(std::size_t p) {
    return CovariateSet(p >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << p) - 1);
  }
  static constexpr CovariateSet single(std::size_t j) { return CovariateSet(std::uint64_t{1} << j); }
  static CovariateSet of(const std::vector<std::size_t>& columns) {
    CovariateSet s;
    for (std::size_t j : columns) s = s.with(j);
    return s;
  }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr bool contains(std::size_t j) const { return (bits_ >> j) & 1U; }
  constexpr bool is_subset_of(CovariateSet other) const { return (bits_ & ~other.bits_) == 0; }

  constexpr CovariateSet with(std::size_t j) const { return CovariateSet(bits_ | (std::uint64_t{1} << j)); }
  constexpr CovariateSet without(std::size_t j) const { return CovariateSet(bits_ & ~(std::uint64_t{1} << j)); }
  constexpr CovariateSet operator|(CovariateSet o) const { return CovariateSet(bits_ | o.bits_); }
  constexpr CovariateSet operator&(CovariateSet o) const { return CovariateSet(bits_ & o.bits_); }
  constexpr CovariateSet minus(CovariateSet o) const { return CovariateSet(bits_ & ~o.bits_); }

  /// Column indices in ascending order.
  std::vector<std::size_t> columns() const {
    std::vector<std::size_t> out;
    out.reserve(size());
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
      out.push_back(static_cast<std::size_t>(std::countr_zero(b)));
    }
    return out;
  }

  constexpr bool operator==(const CovariateSet&) const = default;
  constexpr auto operator<=>(const CovariateSet&) const = default;

 private:
  std::uint64_t bits_ = 0;
};

struct CovariateSetHash {
  std::size_t operator()(CovariateSet s) const noexcept {
    std::uint64_t x = s.bits() + 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(x ^ (x >> 31));
  }
};

}  // namespace ame
