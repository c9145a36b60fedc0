// Fixed-point maps between the real-valued controller world and the integer
// / modular world: input quantization, matrix significand scaling, actuator
// recovery, the biased modulo onto a shifted output window, and modulus
// sizing from output range bounds.
//
// Every scale factor is a power of two (stored as its exponent), so all of
// the maps below reduce to exact integer shifts; see common.hpp for the tie
// rule.

#pragma once

#include <cstdint>
#include <vector>

#include "ectl/bigint.hpp"
#include "ectl/common.hpp"
#include "ectl/linalg.hpp"

namespace ectl {

// r1: sensor step, r2: actuator step, s1/s2: matrix significand scales,
// L: error-headroom scale.  1/s1, 1/s2, 1/L must be positive integers, i.e.
// their exponents are <= 0.
struct ScaleSet {
  int r1_exp = 0;
  int r2_exp = 0;
  int s1_exp = 0;
  int s2_exp = 0;
  int L_exp = 0;

  void validate() const {
    if (s1_exp > 0 || s2_exp > 0 || L_exp > 0)
      throw ValidationError("ScaleSet: 1/s1, 1/s2, 1/L must be positive integers");
    if (s1_exp < -62 || s2_exp < -62 || L_exp < -62 || r1_exp < -62 ||
        r2_exp < -62 || r1_exp > 62 || r2_exp > 62)
      throw ValidationError("ScaleSet: exponent out of range");
  }

  double r1() const { return std::ldexp(1.0, r1_exp); }
  double r2() const { return std::ldexp(1.0, r2_exp); }
  double s1() const { return std::ldexp(1.0, s1_exp); }
  double s2() const { return std::ldexp(1.0, s2_exp); }
  double L() const { return std::ldexp(1.0, L_exp); }
  std::int64_t inv_L() const { return std::int64_t{1} << (-L_exp); }
  std::int64_t inv_s1() const { return std::int64_t{1} << (-s1_exp); }
};

struct OutputWindow {
  std::vector<std::int64_t> u_min;
  std::vector<std::int64_t> u_max;
  std::uint64_t q = 0;  // ring modulus, power of two

  void validate() const {
    if (q == 0 || (q & (q - 1)) != 0)
      throw ValidationError("OutputWindow: modulus must be a power of two");
    if (u_min.size() != u_max.size())
      throw ValidationError("OutputWindow: bound size mismatch");
    for (std::size_t i = 0; i < u_min.size(); ++i) {
      if (u_max[i] < u_min[i])
        throw ValidationError("OutputWindow: empty range");
      const __int128 width =
          static_cast<__int128>(u_max[i]) - u_min[i] + 1;
      if (width > static_cast<__int128>(q))
        throw ValidationError("OutputWindow: modulus below output range");
    }
  }
};

// Component-wise nearest integer of v/step.
inline std::vector<std::int64_t> quantize_signal(const VectorXd& v,
                                                 double step) {
  if (!(step > 0)) throw ValidationError("quantize_signal: step must be positive");
  std::vector<std::int64_t> out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = round_away(v(i) / step);
  return out;
}

// Component-wise nearest integer of M/scale; 1/scale must be integral.
inline IntMat scale_matrix(const MatrixXd& m, double scale) {
  if (!(scale > 0) || scale > 1.0)
    throw ValidationError("scale_matrix: 1/scale must be a positive integer");
  IntMat out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(i, j) = round_away(m(i, j) / scale);
  return out;
}

// Actuator recovery u = r2 * round(r1*s1*s2*u_bar / r2), evaluated as an
// exact integer shift before the single scale by r2.
inline VectorXd recover_u(const std::vector<std::int64_t>& u_bar,
                          const ScaleSet& sc) {
  const int e = sc.r1_exp + sc.s1_exp + sc.s2_exp - sc.r2_exp;
  VectorXd out(static_cast<Eigen::Index>(u_bar.size()));
  for (std::size_t i = 0; i < u_bar.size(); ++i) {
    std::int64_t grid;
    if (e >= 0) {
      grid = checked_mul(u_bar[i], std::int64_t{1} << e);
    } else {
      grid = round_shift(u_bar[i], -e);
    }
    out(static_cast<Eigen::Index>(i)) = sc.r2() * static_cast<double>(grid);
  }
  return out;
}

// Biased modulo: v - floor((v - u_min)/q)*q, component i landing in
// [u_min_i, u_min_i + q).  Idempotent and congruent to v mod q.
inline std::int64_t biased_mod_scalar(std::int64_t v, std::int64_t u_min,
                                      std::uint64_t q) {
  const __int128 shifted = static_cast<__int128>(v) - u_min;
  const __int128 qq = static_cast<__int128>(q);
  __int128 f = shifted / qq;
  if (shifted % qq != 0 && shifted < 0) --f;
  const __int128 r = static_cast<__int128>(v) - f * qq;
  return static_cast<std::int64_t>(r);
}

inline std::vector<std::int64_t> biased_mod(const std::vector<std::int64_t>& v,
                                            const OutputWindow& w) {
  if (v.size() != w.u_min.size())
    throw ValidationError("biased_mod: dimension mismatch");
  std::vector<std::int64_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = biased_mod_scalar(v[i], w.u_min[i], w.q);
  return out;
}

// BigInt variant for the unbounded-integer oracle.
inline BigInt biased_mod_big(const BigInt& v, std::int64_t u_min, int q_exp) {
  BigInt shifted = v - BigInt(u_min);
  BigInt rem = shifted.mod_pow2(q_exp);  // in [0, q)
  return rem + BigInt(u_min);
}

// Integer output range from real bounds on the ideal output:
//   u_min_i := floor((u_min - eps - r2/2) / (L r1 s1 s2))
//   u_max_i := ceil ((u_max + eps + r2/2) / (L r1 s1 s2))
// and q = smallest power of two covering max(u_max_i - u_min_i + 1).
inline OutputWindow size_window_raw(const VectorXd& u_min_real,
                                    const VectorXd& u_max_real, double eps,
                                    double r2, double denom) {
  if (u_min_real.size() != u_max_real.size())
    throw ValidationError("size_window: bound size mismatch");
  if (eps < 0) throw ValidationError("size_window: eps must be >= 0");
  OutputWindow w;
  std::uint64_t need = 1;
  for (Eigen::Index i = 0; i < u_min_real.size(); ++i) {
    if (u_min_real(i) > u_max_real(i))
      throw ValidationError("size_window: u_min above u_max");
    const double lo = (u_min_real(i) - eps - r2 / 2) / denom;
    const double hi = (u_max_real(i) + eps + r2 / 2) / denom;
    if (std::abs(lo) > 4.5e18 || std::abs(hi) > 4.5e18)
      throw ValidationError("size_window: window exceeds representable modulus");
    w.u_min.push_back(static_cast<std::int64_t>(std::floor(lo)));
    w.u_max.push_back(static_cast<std::int64_t>(std::ceil(hi)));
    const std::uint64_t width =
        static_cast<std::uint64_t>(w.u_max.back() - w.u_min.back()) + 1;
    need = std::max(need, width);
  }
  std::uint64_t q = 1;
  int q_exp = 0;
  while (q < need) {
    if (q_exp >= 62)
      throw ValidationError("size_window: required modulus exceeds 2^62");
    q <<= 1;
    ++q_exp;
  }
  w.q = q;
  w.validate();
  return w;
}

inline OutputWindow size_window(const VectorXd& u_min_real,
                                const VectorXd& u_max_real, double eps,
                                const ScaleSet& sc) {
  return size_window_raw(u_min_real, u_max_real, eps, sc.r2(),
                         sc.L() * sc.r1() * sc.s1() * sc.s2());
}

}  // namespace ectl
