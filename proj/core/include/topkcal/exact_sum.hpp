#pragma once

#include <array>
#include <cstdint>

namespace topkcal {

/// Exact accumulator for non-negative finite doubles below 2^64.
///
/// The running total is held as a fixed-point integer spanning every bit a
/// double can carry, so the result does not depend on the order of `add`
/// calls or on how partial sums are merged. `value()` rounds the exact total
/// to the nearest double (ties to even). This is what lets sharded metric
/// accumulators reproduce a sequential pass bit for bit.
class ExactSum {
 public:
  /// Adds x. Negative, non-finite, or >= 2^64 inputs are a precondition
  /// violation and are rejected with std::invalid_argument.
  void add(double x);
  void merge(const ExactSum& other);
  double value() const;

  ExactSum& operator+=(double x) {
    add(x);
    return *this;
  }

 private:
  static constexpr int kLimbs = 40;
  static constexpr int kFractionBits = 1088;  // bit 0 of limb 0 has weight 2^-1088

  void normalize();

  std::array<std::uint64_t, kLimbs> limbs_{};
  std::uint32_t pending_ = 0;  // adds since last carry propagation
};

}  // namespace topkcal
