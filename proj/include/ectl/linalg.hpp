// Dense linear-algebra helpers on top of Eigen: the induced infinity norm
// used by every bound in this library, characteristic polynomials, spectral
// radius, rank-revealing SVD wrappers and integer matrix views.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <complex>
#include <cstdint>
#include <vector>

#include "ectl/bigint.hpp"
#include "ectl/common.hpp"

namespace ectl {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using IntMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IntVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

// Induced infinity norm (max absolute row sum); for vectors the max entry.
template <typename Derived>
double inf_norm(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline MatrixXd hcat(const MatrixXd& a, const MatrixXd& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  MatrixXd r(a.rows(), a.cols() + b.cols());
  r << a, b;
  return r;
}

inline double spectral_radius(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

inline std::vector<std::complex<double>> eigenvalues(const MatrixXd& a) {
  Eigen::EigenSolver<MatrixXd> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw ValidationError("eigenvalue iteration failed to converge");
  std::vector<std::complex<double>> out(a.rows());
  for (int i = 0; i < a.rows(); ++i) out[i] = es.eigenvalues()(i);
  return out;
}

// Monic characteristic polynomial coefficients c, det(zI - A) =
// z^n + c[n-1] z^{n-1} + ... + c[0], built from the eigenvalues.
inline std::vector<double> char_poly(const MatrixXd& a) {
  const auto eig = eigenvalues(a);
  std::vector<std::complex<double>> poly{1.0};
  for (const auto& lambda : eig) {
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= lambda * poly[i];
    }
    poly = std::move(next);
  }
  std::vector<double> out(a.rows());
  for (int i = 0; i < a.rows(); ++i) out[i] = poly[i].real();
  return out;
}

// Exact coefficients of prod (z - t_i) for a conjugate-closed Gaussian
// integer multiset, as BigInt (t = re + im*i with integer parts).
struct GaussInt {
  std::int64_t re = 0;
  std::int64_t im = 0;
  friend bool operator==(const GaussInt&, const GaussInt&) = default;
};

inline std::vector<BigInt> char_poly_from_targets(
    const std::vector<GaussInt>& targets) {
  // multiply out real factors (z - re) and pair factors
  // (z^2 - 2*re*z + re^2 + im^2).
  std::vector<std::int64_t> reals;
  std::vector<GaussInt> pending = targets;
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (pending[i].im == 0) {
      reals.push_back(pending[i].re);
      continue;
    }
    bool matched = false;
    for (std::size_t j = i + 1; j < pending.size(); ++j) {
      if (pending[j].re == pending[i].re && pending[j].im == -pending[i].im) {
        pairs.emplace_back(pending[i].re, std::abs(pending[i].im));
        pending.erase(pending.begin() + j);
        matched = true;
        break;
      }
    }
    if (!matched)
      throw ValidationError("pole targets are not closed under conjugation");
  }
  std::vector<BigInt> poly{BigInt(1)};
  auto mul_linear = [&](std::int64_t r) {
    std::vector<BigInt> next(poly.size() + 1);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= poly[i] * r;
    }
    poly = std::move(next);
  };
  auto mul_quadratic = [&](std::int64_t re, std::int64_t im) {
    const std::int64_t b = checked_mul(-2, re);
    const std::int64_t c =
        checked_add(checked_mul(re, re), checked_mul(im, im));
    std::vector<BigInt> next(poly.size() + 2);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 2] += poly[i];
      next[i + 1] += poly[i] * b;
      next[i] += poly[i] * c;
    }
    poly = std::move(next);
  };
  for (std::int64_t r : reals) mul_linear(r);
  for (auto [re, im] : pairs) mul_quadratic(re, im);
  return poly;  // degree = targets.size(), leading coefficient 1
}

// Dense solve with two rounds of extended-precision iterative refinement;
// recovers forward accuracy on moderately conditioned systems.
inline VectorXd solve_refined(const MatrixXd& a, const VectorXd& b) {
  Eigen::PartialPivLU<MatrixXd> lu(a);
  VectorXd x = lu.solve(b);
  for (int pass = 0; pass < 2; ++pass) {
    VectorXd resid(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      long double acc = static_cast<long double>(b(i));
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        acc -= static_cast<long double>(a(i, j)) * static_cast<long double>(x(j));
      resid(i) = static_cast<double>(acc);
    }
    x += lu.solve(resid);
  }
  return x;
}

// Minimum-norm right inverse of a full-row-rank matrix.
inline MatrixXd right_inverse(const MatrixXd& t) {
  return t.transpose() * (t * t.transpose()).ldlt().solve(
                             MatrixXd::Identity(t.rows(), t.rows()));
}

inline IntMat round_to_int(const MatrixXd& m) {
  IntMat r(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r(i, j) = round_away(m(i, j));
  return r;
}

inline MatrixXd to_real(const IntMat& m) {
  MatrixXd r(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r(i, j) = static_cast<double>(m(i, j));
  return r;
}

// y = M*x with overflow checking; the explicit error path here is what makes
// the unbounded-integer reference mode trustworthy.
inline std::vector<std::int64_t> matvec_checked(
    const IntMat& m, const std::vector<std::int64_t>& x) {
  if (m.cols() != static_cast<Eigen::Index>(x.size()))
    throw ValidationError("matvec: shape mismatch");
  std::vector<std::int64_t> y(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    __int128 acc = 0;
    for (int j = 0; j < m.cols(); ++j)
      acc += static_cast<__int128>(m(i, j)) * x[j];
    if (acc > INT64_MAX || acc < INT64_MIN)
      throw ValidationError("integer controller overflow (working width exceeded)");
    y[i] = static_cast<std::int64_t>(acc);
  }
  return y;
}

}  // namespace ectl
