// Shared error types, rounding primitives and small formatting helpers.
//
// Rounding convention used everywhere in this library: "nearest integer,
// ties away from zero".  Every quantizer, every significand shift and every
// actuator-side requantization goes through the helpers below so that the
// plaintext, modular and encrypted evaluation paths stay bit-identical.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace ectl {

// Exit-code mapping for the CLI: 2 / 3 / 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int log_level() {
  static const int level = [] {
    const char* v = std::getenv("ECTL_LOG");
    return v ? std::atoi(v) : 0;
  }();
  return level;
}

// Nearest integer, ties away from zero (the only rounding rule in use).
inline std::int64_t round_away(double x) {
  if (!std::isfinite(x) || std::abs(x) > 9.0e18)
    throw ValidationError("round_away: value out of int64 range");
  return std::llround(x);
}

// round_away(v / 2^k) for k >= 0, computed exactly on integers.
inline std::int64_t round_shift(std::int64_t v, int k) {
  if (k < 0) throw ValidationError("round_shift: negative shift");
  if (k == 0) return v;
  if (k >= 63) return 0;  // |v| < 2^62 always; v/2^63 rounds to 0
  const bool neg = v < 0;
  const std::uint64_t a = neg ? static_cast<std::uint64_t>(-(v + 1)) + 1
                              : static_cast<std::uint64_t>(v);
  const std::uint64_t r = (a + (std::uint64_t{1} << (k - 1))) >> k;
  return neg ? -static_cast<std::int64_t>(r) : static_cast<std::int64_t>(r);
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Smallest e with 2^e >= x (x > 0).
inline int ceil_log2(double x) {
  if (!(x > 0)) throw ValidationError("ceil_log2: non-positive argument");
  int e = 0;
  while (std::ldexp(1.0, e) < x) ++e;
  while (e > 0 && std::ldexp(1.0, e - 1) >= x) --e;
  while (std::ldexp(1.0, e) < x) ++e;
  return e;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  __int128 p = static_cast<__int128>(a) * b;
  if (p > INT64_MAX || p < INT64_MIN)
    throw ValidationError("integer overflow in controller arithmetic");
  return static_cast<std::int64_t>(p);
}

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  __int128 s = static_cast<__int128>(a) + b;
  if (s > INT64_MAX || s < INT64_MIN)
    throw ValidationError("integer overflow in controller arithmetic");
  return static_cast<std::int64_t>(s);
}

// Shortest round-trip decimal form; used for all JSON/CSV numeric output so
// that reruns are byte-identical.
inline std::string dbl_str(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace ectl
