#include "topkcal/exact_sum.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace topkcal {

namespace {

__extension__ typedef unsigned __int128 u128;

constexpr std::uint64_t kDigitMask = 0xffffffffULL;
// Each limb stores a 32-bit digit plus headroom; every add puts < 2^32 into a
// limb, so 2^31 adds can pass between carry propagations.
constexpr std::uint32_t kMaxPending = 1U << 30;

}  // namespace

void ExactSum::add(double x) {
  if (x == 0.0) return;
  if (!(x > 0.0) || !(x < 18446744073709551616.0)) {
    throw std::invalid_argument("ExactSum::add requires a finite value in [0, 2^64)");
  }
  const auto bits = std::bit_cast<std::uint64_t>(x);
  const auto biased = static_cast<int>((bits >> 52) & 0x7ff);
  std::uint64_t mantissa = bits & ((1ULL << 52) - 1);
  int exponent = -1074;
  if (biased != 0) {
    mantissa |= 1ULL << 52;
    exponent = biased - 1075;
  }
  const int position = exponent + kFractionBits;
  const int index = position / 32;
  const int shift = position % 32;
  const u128 wide = static_cast<u128>(mantissa) << shift;
  limbs_[index] += static_cast<std::uint64_t>(wide) & kDigitMask;
  limbs_[index + 1] += static_cast<std::uint64_t>(wide >> 32) & kDigitMask;
  limbs_[index + 2] += static_cast<std::uint64_t>(wide >> 64);
  if (++pending_ >= kMaxPending) normalize();
}

void ExactSum::merge(const ExactSum& other) {
  ExactSum rhs = other;
  rhs.normalize();
  normalize();
  for (int i = 0; i < kLimbs; ++i) limbs_[i] += rhs.limbs_[i];
  normalize();
}

void ExactSum::normalize() {
  std::uint64_t carry = 0;
  for (auto& limb : limbs_) {
    const std::uint64_t v = limb + carry;
    limb = v & kDigitMask;
    carry = v >> 32;
  }
  if (carry != 0) throw std::overflow_error("ExactSum overflow");
  pending_ = 0;
}

double ExactSum::value() const {
  ExactSum canonical = *this;
  canonical.normalize();
  const auto& d = canonical.limbs_;

  int top = kLimbs - 1;
  while (top >= 0 && d[top] == 0) --top;
  if (top < 0) return 0.0;

  auto digit = [&](int i) -> u128 { return i >= 0 ? d[i] : 0; };
  // Top four digits hold at least 97 significant bits.
  u128 window = (digit(top) << 96) | (digit(top - 1) << 64) |
                             (digit(top - 2) << 32) | digit(top - 3);
  bool sticky = false;
  for (int i = top - 4; i >= 0; --i) {
    if (d[i] != 0) {
      sticky = true;
      break;
    }
  }

  const auto high = static_cast<std::uint64_t>(window >> 64);
  const int leading = std::countl_zero(high);
  const int drop = 128 - leading - 53;  // low bits of `window` below the mantissa
  std::uint64_t kept = static_cast<std::uint64_t>(window >> drop);
  const u128 remainder = window & ((static_cast<u128>(1) << drop) - 1);
  const u128 half = static_cast<u128>(1) << (drop - 1);
  if (remainder > half || (remainder == half && (sticky || (kept & 1U)))) ++kept;

  const int scale = drop + 32 * (top - 3) - kFractionBits;
  return std::ldexp(static_cast<double>(kept), scale);
}

}  // namespace topkcal
