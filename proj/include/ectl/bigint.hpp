// Minimal arbitrary-precision signed integer (sign + 64-bit limb magnitude).
//
// This backs the exact reference evaluations that must stay correct at any
// horizon: the unbounded-integer controller oracle, the divergence demo and
// exact characteristic-polynomial accounting.  Only the operations those
// paths need are provided: add/sub, multiply by machine integer, bit shifts
// with away-from-zero rounding, and power-of-two modular reduction.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ectl/common.hpp"

namespace ectl {

class BigInt {
 public:
  BigInt() = default;
  BigInt(std::int64_t v) {  // NOLINT: implicit by design
    if (v == 0) return;
    sign_ = v < 0 ? -1 : 1;
    std::uint64_t a = v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1
                            : static_cast<std::uint64_t>(v);
    mag_.push_back(a);
  }

  bool is_zero() const { return sign_ == 0; }
  int sign() const { return sign_; }

  friend BigInt operator-(const BigInt& a) {
    BigInt r = a;
    r.sign_ = -r.sign_;
    return r;
  }

  friend BigInt operator+(const BigInt& a, const BigInt& b) {
    if (a.sign_ == 0) return b;
    if (b.sign_ == 0) return a;
    BigInt r;
    if (a.sign_ == b.sign_) {
      r.mag_ = add_mag(a.mag_, b.mag_);
      r.sign_ = a.sign_;
    } else {
      int c = cmp_mag(a.mag_, b.mag_);
      if (c == 0) return BigInt{};
      const BigInt& big = c > 0 ? a : b;
      const BigInt& small = c > 0 ? b : a;
      r.mag_ = sub_mag(big.mag_, small.mag_);
      r.sign_ = big.sign_;
    }
    return r;
  }

  friend BigInt operator-(const BigInt& a, const BigInt& b) { return a + (-b); }

  BigInt& operator+=(const BigInt& b) { return *this = *this + b; }
  BigInt& operator-=(const BigInt& b) { return *this = *this - b; }

  friend BigInt operator*(const BigInt& a, std::int64_t k) {
    if (a.sign_ == 0 || k == 0) return BigInt{};
    BigInt r;
    r.sign_ = (k < 0) ? -a.sign_ : a.sign_;
    std::uint64_t ku = k < 0 ? static_cast<std::uint64_t>(-(k + 1)) + 1
                             : static_cast<std::uint64_t>(k);
    unsigned __int128 carry = 0;
    r.mag_.reserve(a.mag_.size() + 1);
    for (std::uint64_t limb : a.mag_) {
      unsigned __int128 p = static_cast<unsigned __int128>(limb) * ku + carry;
      r.mag_.push_back(static_cast<std::uint64_t>(p));
      carry = p >> 64;
    }
    if (carry) r.mag_.push_back(static_cast<std::uint64_t>(carry));
    r.trim();
    return r;
  }

  // Value shifted left by k bits.
  BigInt shl(int k) const {
    if (k < 0) throw ValidationError("BigInt::shl: negative shift");
    if (sign_ == 0 || k == 0) return *this;
    BigInt r;
    r.sign_ = sign_;
    const int limbs = k / 64, bits = k % 64;
    r.mag_.assign(limbs, 0);
    std::uint64_t carry = 0;
    for (std::uint64_t limb : mag_) {
      r.mag_.push_back(bits ? (limb << bits) | carry : limb);
      carry = bits ? limb >> (64 - bits) : 0;
    }
    if (carry) r.mag_.push_back(carry);
    r.trim();
    return r;
  }

  // round_away(value / 2^k): magnitude gets +2^(k-1) then a floor shift, so
  // ties move away from zero for either sign.
  BigInt round_shr(int k) const {
    if (k < 0) throw ValidationError("BigInt::round_shr: negative shift");
    if (sign_ == 0 || k == 0) return *this;
    BigInt half = BigInt(1).shl(k - 1);
    BigInt biased;
    biased.mag_ = add_mag(mag_, half.mag_);
    biased.sign_ = 1;
    biased.shr_floor_mag(k);
    biased.sign_ = biased.mag_.empty() ? 0 : sign_;
    return biased;
  }

  // value mod 2^k, result in [0, 2^k).
  BigInt mod_pow2(int k) const {
    if (k <= 0) throw ValidationError("BigInt::mod_pow2: k must be positive");
    BigInt low;
    const int limbs = (k + 63) / 64;
    low.mag_.assign(mag_.begin(),
                    mag_.begin() + std::min<std::size_t>(limbs, mag_.size()));
    if (static_cast<int>(low.mag_.size()) == limbs && (k % 64) != 0)
      low.mag_.back() &= (std::uint64_t{1} << (k % 64)) - 1;
    low.trim();
    low.sign_ = low.mag_.empty() ? 0 : 1;
    if (sign_ < 0 && !low.is_zero()) {
      BigInt q = BigInt(1).shl(k);
      return q - low;
    }
    return low;
  }

  friend bool operator==(const BigInt& a, const BigInt& b) {
    return a.sign_ == b.sign_ && a.mag_ == b.mag_;
  }
  friend bool operator!=(const BigInt& a, const BigInt& b) { return !(a == b); }
  friend bool operator<(const BigInt& a, const BigInt& b) {
    if (a.sign_ != b.sign_) return a.sign_ < b.sign_;
    int c = cmp_mag(a.mag_, b.mag_);
    return a.sign_ >= 0 ? c < 0 : c > 0;
  }
  friend bool operator<=(const BigInt& a, const BigInt& b) {
    return a == b || a < b;
  }

  bool fits_int64() const {
    if (mag_.size() > 1) return false;
    if (mag_.empty()) return true;
    if (sign_ > 0) return mag_[0] <= static_cast<std::uint64_t>(INT64_MAX);
    return mag_[0] <= static_cast<std::uint64_t>(INT64_MAX) + 1;
  }

  std::int64_t to_int64() const {
    if (!fits_int64()) throw ValidationError("BigInt: value exceeds int64");
    if (mag_.empty()) return 0;
    if (sign_ > 0) return static_cast<std::int64_t>(mag_[0]);
    return static_cast<std::int64_t>(~mag_[0] + 1);
  }

  double to_double() const {
    double v = 0;
    for (auto it = mag_.rbegin(); it != mag_.rend(); ++it)
      v = v * 18446744073709551616.0 + static_cast<double>(*it);
    return sign_ < 0 ? -v : v;
  }

  int bit_length() const {
    if (mag_.empty()) return 0;
    std::uint64_t top = mag_.back();
    int b = 0;
    while (top) {
      ++b;
      top >>= 1;
    }
    return static_cast<int>((mag_.size() - 1) * 64) + b;
  }

 private:
  int sign_ = 0;
  std::vector<std::uint64_t> mag_;  // little-endian limbs

  void trim() {
    while (!mag_.empty() && mag_.back() == 0) mag_.pop_back();
    if (mag_.empty()) sign_ = 0;
  }

  void shr_floor_mag(int k) {
    const int limbs = k / 64, bits = k % 64;
    if (limbs >= static_cast<int>(mag_.size())) {
      mag_.clear();
      return;
    }
    mag_.erase(mag_.begin(), mag_.begin() + limbs);
    if (bits) {
      for (std::size_t i = 0; i < mag_.size(); ++i) {
        mag_[i] >>= bits;
        if (i + 1 < mag_.size()) mag_[i] |= mag_[i + 1] << (64 - bits);
      }
    }
    trim();
  }

  static int cmp_mag(const std::vector<std::uint64_t>& a,
                     const std::vector<std::uint64_t>& b) {
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
    for (std::size_t i = a.size(); i-- > 0;)
      if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
    return 0;
  }

  static std::vector<std::uint64_t> add_mag(
      const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    std::vector<std::uint64_t> r;
    r.reserve(std::max(a.size(), b.size()) + 1);
    unsigned __int128 carry = 0;
    for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
      unsigned __int128 s = carry;
      if (i < a.size()) s += a[i];
      if (i < b.size()) s += b[i];
      r.push_back(static_cast<std::uint64_t>(s));
      carry = s >> 64;
    }
    if (carry) r.push_back(static_cast<std::uint64_t>(carry));
    return r;
  }

  // requires |a| >= |b|
  static std::vector<std::uint64_t> sub_mag(
      const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    std::vector<std::uint64_t> r;
    r.reserve(a.size());
    std::int64_t borrow = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      unsigned __int128 av = a[i];
      unsigned __int128 bv = (i < b.size() ? b[i] : 0) + (borrow ? 1u : 0u);
      if (av >= bv) {
        r.push_back(static_cast<std::uint64_t>(av - bv));
        borrow = 0;
      } else {
        r.push_back(static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(1) << 64) + av - bv));
        borrow = 1;
      }
    }
    while (!r.empty() && r.back() == 0) r.pop_back();
    return r;
  }
};

}  // namespace ectl
