// State-matrix integerization.
//
// Given a linear controller
//   x(t+1) = F x + G y + P r,   u = H x + J y + Q r,
// the pipeline produces F' (exactly integer), H', T, R with
//   (F' + R H') T = T F,   H' T = H,   rank(T) = n_obs,
// by (1) Kalman observable decomposition, (2) output-feedback pole relocation
// of F11 - R1 H1 and (3) a similarity transform that exposes the integer
// structure.  Single-output controllers go through the observable canonical
// form, where the relocated state matrix is a companion matrix of freely
// chosen integer characteristic coefficients and the output row is exactly
// [0 ... 0 1].  Multi-output controllers place Gaussian-integer eigenvalues
// and transform to the real modal form.
//
// Also here: the ready-made FIR/PID integer realizations and the divergence
// demonstration for the scaled recursion that motivates the conversion.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <optional>
#include <vector>

#include "ectl/bigint.hpp"
#include "ectl/common.hpp"
#include "ectl/linalg.hpp"
#include "ectl/quantize.hpp"
#include "ectl/rng.hpp"

namespace ectl {

struct GivenController {
  MatrixXd F, G, P, H, J, Q;
  VectorXd x0;

  int n() const { return static_cast<int>(F.rows()); }
  int p() const { return static_cast<int>(G.cols()); }
  int nr() const { return static_cast<int>(P.cols()); }
  int m() const { return static_cast<int>(H.rows()); }

  void validate() const {
    if (F.rows() != F.cols()) throw ValidationError("controller: F not square");
    if (G.rows() != F.rows() || P.rows() != F.rows())
      throw ValidationError("controller: input matrix row mismatch");
    if (H.cols() != F.cols())
      throw ValidationError("controller: output matrix column mismatch");
    if (J.rows() != H.rows() || J.cols() != G.cols())
      throw ValidationError("controller: J shape mismatch");
    if (Q.rows() != H.rows() || Q.cols() != P.cols())
      throw ValidationError("controller: Q shape mismatch");
    if (x0.size() != F.rows())
      throw ValidationError("controller: initial state size mismatch");
  }
};

inline MatrixXd observability_matrix(const MatrixXd& f, const MatrixXd& h) {
  const int n = static_cast<int>(f.rows());
  const int m = static_cast<int>(h.rows());
  MatrixXd obs(static_cast<Eigen::Index>(n) * m, n);
  MatrixXd block = h;
  for (int i = 0; i < n; ++i) {
    obs.middleRows(static_cast<Eigen::Index>(i) * m, m) = block;
    block = block * f;
  }
  return obs;
}

struct DecompositionResult {
  MatrixXd W1, W2;            // observable / removable coordinate rows
  MatrixXd F11, F21, F22, H1;
  int n_obs = 0;
};

// Kalman observable decomposition via SVD of the observability matrix.  The
// observable coordinates satisfy F11*W1 = W1*F and H1*W1 = H; the removable
// block never reaches the output and is dropped by the conversion.
inline DecompositionResult observable_decomposition(const MatrixXd& f,
                                                    const MatrixXd& h,
                                                    double tol = 1e-9) {
  if (f.rows() != f.cols()) throw ValidationError("decomposition: F not square");
  if (h.cols() != f.cols())
    throw ValidationError("decomposition: H column mismatch");
  const int n = static_cast<int>(f.rows());
  const MatrixXd obs = observability_matrix(f, h);
  Eigen::JacobiSVD<MatrixXd> svd(obs, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;

  DecompositionResult r;
  if (smax == 0.0) {
    r.n_obs = 0;
  } else {
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      const double rel = sv(i) / smax;
      if (rel > tol * 1e2) {
        ++rank;
      } else if (rel > tol * 1e-2) {
        throw ValidationError(
            "observable decomposition: numerically ambiguous rank (singular "
            "value " + dbl_str(rel) + " straddles tolerance)");
      }
    }
    r.n_obs = rank;
  }

  if (r.n_obs == n) {
    r.W1 = MatrixXd::Identity(n, n);  // full-rank shortcut keeps coordinates
    r.W2 = MatrixXd(0, n);
    r.F11 = f;
    r.F21 = MatrixXd(0, n);
    r.F22 = MatrixXd(0, 0);
    r.H1 = h;
    return r;
  }
  const MatrixXd v = svd.matrixV();
  r.W1 = v.leftCols(r.n_obs).transpose();
  r.W2 = v.rightCols(n - r.n_obs).transpose();
  r.F11 = r.W1 * f * r.W1.transpose();
  r.F21 = r.W2 * f * r.W1.transpose();
  r.F22 = r.W2 * f * r.W2.transpose();
  r.H1 = h * r.W1.transpose();
  return r;
}

namespace detail {

inline bool is_observable(const MatrixXd& f, const MatrixXd& h, double tol) {
  const MatrixXd obs = observability_matrix(f, h);
  Eigen::JacobiSVD<MatrixXd> svd(obs);
  const auto& sv = svd.singularValues();
  return sv.size() && sv(sv.size() - 1) > tol * sv(0);
}

inline std::vector<GaussInt> round_to_gauss(
    const std::vector<std::complex<double>>& eig) {
  std::vector<GaussInt> out;
  out.reserve(eig.size());
  for (const auto& l : eig)
    out.push_back({round_away(l.real()), round_away(l.imag())});
  return out;
}

// Multiset equality of rounded eigenvalues vs targets.
inline bool targets_match_spectrum(const std::vector<std::complex<double>>& eig,
                                   const std::vector<GaussInt>& targets,
                                   double tol) {
  if (eig.size() != targets.size()) return false;
  std::vector<bool> used(targets.size(), false);
  for (const auto& l : eig) {
    bool hit = false;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (used[i]) continue;
      if (std::abs(l.real() - targets[i].re) <= tol &&
          std::abs(l.imag() - targets[i].im) <= tol) {
        used[i] = true;
        hit = true;
        break;
      }
    }
    if (!hit) return false;
  }
  return true;
}

// Evaluate the monic polynomial with ascending coefficients c (degree =
// c.size(), leading 1) at the matrix A.
inline MatrixXd poly_at_matrix(const std::vector<double>& c, const MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  MatrixXd acc = MatrixXd::Identity(n, n);
  MatrixXd result = MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < c.size(); ++i) {
    result += c[i] * acc;
    acc = acc * a;
  }
  result += acc;  // leading term
  return result;
}

}  // namespace detail

// Observer-gain pole placement: returns R1 with eig(F11 - R1*H1) equal to the
// requested Gaussian-integer targets.  Single-output uses Ackermann's formula;
// multi-output solves a Sylvester equation against the integer real modal
// form of the targets.
inline MatrixXd integer_pole_placement(const MatrixXd& f11, const MatrixXd& h1,
                                       const std::vector<GaussInt>& targets,
                                       double tol = 1e-9) {
  const int n = static_cast<int>(f11.rows());
  const int m = static_cast<int>(h1.rows());
  if (static_cast<int>(targets.size()) != n)
    throw ValidationError("pole placement: need exactly n targets");
  if (!detail::is_observable(f11, h1, tol))
    throw ValidationError("pole placement: pair (F11, H1) not observable");
  const std::vector<BigInt> coeff_big = char_poly_from_targets(targets);

  const auto spectrum = eigenvalues(f11);
  if (detail::targets_match_spectrum(spectrum, targets, 1e-7))
    return MatrixXd::Zero(n, m);  // nothing to move

  if (m == 1) {
    std::vector<double> coeffs(n);
    for (int i = 0; i < n; ++i) coeffs[i] = coeff_big[i].to_double();
    const MatrixXd pf = detail::poly_at_matrix(coeffs, f11);
    const MatrixXd obs = observability_matrix(f11, h1);
    VectorXd e_last = VectorXd::Zero(n);
    e_last(n - 1) = 1.0;
    return pf * obs.partialPivLu().solve(e_last);
  }

  // Targets overlapping part of the existing spectrum make the Sylvester
  // operator singular; require a disjoint choice.
  for (const auto& l : spectrum)
    for (const auto& t : targets)
      if (std::abs(l.real() - t.re) <= 1e-9 && std::abs(l.imag() - t.im) <= 1e-9)
        throw ValidationError(
            "pole placement: target coincides with an existing eigenvalue; "
            "choose disjoint targets");

  // Integer real modal form of the targets.
  MatrixXd lam = MatrixXd::Zero(n, n);
  {
    std::vector<GaussInt> pend = targets;
    int idx = 0;
    std::vector<std::int64_t> reals;
    std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
    for (std::size_t i = 0; i < pend.size(); ++i) {
      if (pend[i].im == 0) {
        reals.push_back(pend[i].re);
        continue;
      }
      for (std::size_t j = i + 1; j < pend.size(); ++j) {
        if (pend[j].re == pend[i].re && pend[j].im == -pend[i].im) {
          pairs.emplace_back(pend[i].re, std::abs(pend[i].im));
          pend.erase(pend.begin() + j);
          break;
        }
      }
    }
    std::sort(reals.begin(), reals.end());
    std::sort(pairs.begin(), pairs.end());
    for (std::int64_t re : reals) lam(idx, idx) = static_cast<double>(re), ++idx;
    for (auto [re, im] : pairs) {
      lam(idx, idx) = static_cast<double>(re);
      lam(idx, idx + 1) = static_cast<double>(im);
      lam(idx + 1, idx) = -static_cast<double>(im);
      lam(idx + 1, idx + 1) = static_cast<double>(re);
      idx += 2;
    }
  }

  // Dual form: M = F11^T, B = H1^T; solve M*X - X*Lam = B*Ktilde, then
  // R1 = X^{-T} * Ktilde^T gives F11 - R1 H1 similar to Lam.
  const MatrixXd M = f11.transpose();
  const MatrixXd B = h1.transpose();
  for (int attempt = 0; attempt < 8; ++attempt) {
    CounterRng rng(0xEC71u + attempt);
    MatrixXd ktilde(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        ktilde(i, j) = 0.25 + rng.next_unit() * (rng.next_u64() & 1 ? 1.0 : -1.0);
    const MatrixXd rhs = B * ktilde;
    MatrixXd big = MatrixXd::Zero(n * n, n * n);
    VectorXd vec_rhs(n * n);
    // vec(M X) - vec(X Lam) = (I (x) M - Lam^T (x) I) vec(X)
    for (int col = 0; col < n; ++col)
      for (int row = 0; row < n; ++row) {
        const int ridx = col * n + row;
        vec_rhs(ridx) = rhs(row, col);
        for (int k = 0; k < n; ++k) {
          big(ridx, col * n + k) += M(row, k);
          big(ridx, k * n + row) -= lam(k, col);
        }
      }
    const VectorXd vec_x = solve_refined(big, vec_rhs);
    MatrixXd x(n, n);
    for (int col = 0; col < n; ++col)
      for (int row = 0; row < n; ++row) x(row, col) = vec_x(col * n + row);
    Eigen::JacobiSVD<MatrixXd> svd(x);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-7 * sv(0)) continue;  // bad draw, retry
    const MatrixXd r1 = x.transpose().partialPivLu().solve(ktilde.transpose());
    const auto placed = eigenvalues(f11 - r1 * h1);
    if (detail::targets_match_spectrum(placed, targets, 1e-6)) return r1;
  }
  throw ValidationError("pole placement: Sylvester construction failed");
}

struct ModalResult {
  MatrixXd T;     // T * A * T^{-1} is the integer real modal form
  IntMat modal;
};

namespace detail {

// Minimum-norm correction of (T, R) against the linear identity
// F' T - T F + R H = 0 with the integer F' held fixed.  Substituting
// H' T = H turns the package identity (F' + R H') T = T F into exactly this
// linear constraint, so polishing here removes the eigenvalue-placement
// error floor from the final residuals.
inline void polish_similarity_package(MatrixXd& t, MatrixXd& r,
                                      const MatrixXd& fp, const MatrixXd& f,
                                      const MatrixXd& h) {
  const int n_obs = static_cast<int>(t.rows());
  const int n = static_cast<int>(t.cols());
  const int m = static_cast<int>(r.cols());
  const int nT = n_obs * n;
  const int nR = n_obs * m;
  for (int pass = 0; pass < 2; ++pass) {
    const MatrixXd resid = fp * t - t * f + r * h;
    if (inf_norm(resid) < 1e-13 * std::max(1.0, inf_norm(t))) break;
    MatrixXd op = MatrixXd::Zero(nT, nT + nR);
    VectorXd rhs(nT);
    for (int col = 0; col < n; ++col)
      for (int row = 0; row < n_obs; ++row) {
        const int idx = col * n_obs + row;
        rhs(idx) = -resid(row, col);
        for (int k = 0; k < n_obs; ++k)
          op(idx, col * n_obs + k) += fp(row, k);
        for (int k = 0; k < n; ++k) op(idx, k * n_obs + row) -= f(k, col);
        for (int k = 0; k < m; ++k)
          op(idx, nT + k * n_obs + row) += h(k, col);
      }
    Eigen::JacobiSVD<MatrixXd> svd(op,
                                   Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-10);
    const VectorXd d = svd.solve(rhs);
    for (int col = 0; col < n; ++col)
      for (int row = 0; row < n_obs; ++row)
        t(row, col) += d(col * n_obs + row);
    for (int col = 0; col < m; ++col)
      for (int row = 0; row < n_obs; ++row)
        r(row, col) += d(nT + col * n_obs + row);
  }
}

// Least-squares polish of A*X = X*M for the eigenvector basis X against the
// exact integer modal form M.  The Sylvester operator is singular here
// (shared spectrum), so corrections are taken in the minimum-norm sense; the
// kernel directions are similarity freedom and leave the identity intact.
inline void refine_similarity(MatrixXd& x, const MatrixXd& a,
                              const MatrixXd& m) {
  const int n = static_cast<int>(a.rows());
  for (int pass = 0; pass < 3; ++pass) {
    const MatrixXd resid = a * x - x * m;
    if (inf_norm(resid) < 1e-13 * std::max(1.0, inf_norm(x))) break;
    MatrixXd kron = MatrixXd::Zero(n * n, n * n);
    VectorXd rhs(n * n);
    for (int col = 0; col < n; ++col)
      for (int row = 0; row < n; ++row) {
        const int idx = col * n + row;
        rhs(idx) = -resid(row, col);
        for (int k = 0; k < n; ++k) {
          kron(idx, col * n + k) += a(row, k);
          kron(idx, k * n + row) -= m(k, col);
        }
      }
    Eigen::JacobiSVD<MatrixXd> svd(kron,
                                   Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-9);
    const VectorXd dx = svd.solve(rhs);
    for (int col = 0; col < n; ++col)
      for (int row = 0; row < n; ++row) x(row, col) += dx(col * n + row);
  }
}

}  // namespace detail

// Transform a matrix whose eigenvalues are Gaussian integers to the real
// modal form: integer diagonal entries and 2x2 blocks [sigma omega; -omega
// sigma].  Requires a full eigenvector basis; defective inputs are rejected
// (the conversion never produces them for the routes implemented here).
inline ModalResult modal_integerize(const MatrixXd& a, double tol = 1e-9) {
  const int n = static_cast<int>(a.rows());
  if (a.rows() != a.cols()) throw ValidationError("modal: matrix not square");
  const auto eig = eigenvalues(a);
  for (const auto& l : eig) {
    if (std::abs(l.real() - std::round(l.real())) > tol * std::max(1.0, std::abs(l.real())) ||
        std::abs(l.imag() - std::round(l.imag())) > tol * std::max(1.0, std::abs(l.imag())))
      throw ValidationError("modal: eigenvalue " + dbl_str(l.real()) + (l.imag() < 0 ? "" : "+") +
                            dbl_str(l.imag()) + "i is not a Gaussian integer");
  }
  auto units = detail::round_to_gauss(eig);
  // distinct units: reals, and one representative per conjugate pair
  std::vector<std::pair<GaussInt, int>> groups;  // value (im >= 0), multiplicity
  for (const auto& g : units) {
    GaussInt key{g.re, std::abs(g.im)};
    bool found = false;
    for (auto& [v, c] : groups)
      if (v == key) {
        ++c;
        found = true;
        break;
      }
    if (!found) groups.emplace_back(key, 1);
  }
  std::sort(groups.begin(), groups.end(), [](const auto& a_, const auto& b_) {
    if (a_.first.re != b_.first.re) return a_.first.re < b_.first.re;
    return a_.first.im < b_.first.im;
  });

  MatrixXd t_inv(n, n);
  std::vector<int> block_sizes;
  int col = 0;
  for (const auto& [val, count] : groups) {
    if (val.im == 0) {
      // real eigenvalue: null space of (A - lambda I)
      MatrixXd shifted = a - static_cast<double>(val.re) * MatrixXd::Identity(n, n);
      Eigen::JacobiSVD<MatrixXd> svd(shifted, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      int nullity = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) <= 1e-7 * std::max(1.0, sv(0))) ++nullity;
      if (nullity < count)
        throw ValidationError("modal: defective eigenvalue structure at " +
                              dbl_str(static_cast<double>(val.re)));
      t_inv.middleCols(col, count) = svd.matrixV().rightCols(count);
      for (int k = 0; k < count; ++k) block_sizes.push_back(1);
      col += count;
    } else {
      // conjugate pair: complex null space, pair count = multiplicity of
      // sigma + i*omega; each basis vector yields columns [Re v, Im v]
      const int mult = count / 2;
      Eigen::MatrixXcd shifted = a.cast<std::complex<double>>();
      const std::complex<double> lambda(static_cast<double>(val.re),
                                        static_cast<double>(val.im));
      for (int i = 0; i < n; ++i) shifted(i, i) -= lambda;
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      int nullity = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) <= 1e-7 * std::max(1.0, sv(0))) ++nullity;
      if (nullity < mult)
        throw ValidationError("modal: defective complex eigenvalue structure");
      for (int k = 0; k < mult; ++k) {
        Eigen::VectorXcd v = svd.matrixV().col(n - 1 - k);
        // normalize phase for determinism: largest entry real positive
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        v /= v(imax) / std::abs(v(imax));
        t_inv.col(col) = v.real();
        t_inv.col(col + 1) = v.imag();
        block_sizes.push_back(2);
        col += 2;
      }
    }
  }
  ModalResult r;
  {
    const MatrixXd t0 = t_inv.partialPivLu().solve(MatrixXd::Identity(n, n));
    r.modal = round_to_int(t0 * a * t_inv);
    // balance: scale each block so the transform rows have unit-ish norm.
    // Power-of-two factors are exact and commute with the integer modal
    // blocks, so the modal form is untouched while ||T|| and the package
    // norms downstream stay moderate.
    int row0 = 0;
    for (int sz : block_sizes) {
      double norm_b = 0;
      for (int i = row0; i < row0 + sz; ++i)
        norm_b = std::max(norm_b, t0.row(i).cwiseAbs().sum());
      if (norm_b > 0) {
        const double d = std::exp2(std::round(std::log2(norm_b)));
        t_inv.middleCols(row0, sz) *= d;
      }
      row0 += sz;
    }
  }
  detail::refine_similarity(t_inv, a, to_real(r.modal));
  const MatrixXd t = t_inv.partialPivLu().solve(MatrixXd::Identity(n, n));
  const MatrixXd modal_real = t * a * t_inv;
  if (inf_norm(modal_real - to_real(r.modal)) > 1e-8)
    throw ValidationError("modal: transform residual exceeds tolerance");
  r.T = t;
  return r;
}

struct ConvertOptions {
  // m = 1: direct choice of the companion column (characteristic coefficients
  // z^n - k_{n-1} z^{n-1} - ... - k_0); default is the nearest-integer
  // characteristic polynomial of the observable part.
  std::optional<std::vector<std::int64_t>> kvec;
  // m >= 2: Gaussian-integer eigenvalue targets; default is the spectrum of
  // the observable part rounded to nearest Gaussian integers.
  std::optional<std::vector<GaussInt>> targets;
  // Drop feedback columns for outputs that are not needed for observability
  // (greedy elimination); fewer columns in R means fewer re-encrypted values
  // per step.
  bool prune_outputs = false;
  double tol = 1e-9;
};

struct ConversionResult {
  IntMat Fp;               // integer state matrix, n_obs x n_obs
  MatrixXd Hp;             // output matrix in new coordinates
  MatrixXd T;              // n_obs x n,  z = T x
  MatrixXd R;              // n_obs x m output-feedback gain
  MatrixXd T_right_inv;    // T * T_right_inv = I
  std::vector<std::int64_t> target_charpoly;  // ascending, leading 1 implicit
  std::vector<std::int64_t> kvec;             // single-output route
  std::vector<GaussInt> targets;              // modal route
  int n_obs = 0;
  bool single_output_route = false;
  double residual_dynamics = 0;  // ||(F' + R H') T - T F||
  double residual_output = 0;    // ||H' T - H||
};

namespace detail {

inline std::vector<GaussInt> default_targets(const MatrixXd& f11, int m) {
  auto eig = eigenvalues(f11);
  // round pairwise so conjugate closure survives rounding noise
  std::vector<GaussInt> out;
  std::vector<bool> used(eig.size(), false);
  for (std::size_t i = 0; i < eig.size(); ++i) {
    if (used[i]) continue;
    if (std::abs(eig[i].imag()) < 1e-9) {
      out.push_back({round_away(eig[i].real()), 0});
      used[i] = true;
      continue;
    }
    std::size_t match = i;
    double best = 1e300;
    for (std::size_t j = i + 1; j < eig.size(); ++j) {
      if (used[j]) continue;
      const double dist = std::abs(eig[j] - std::conj(eig[i]));
      if (dist < best) {
        best = dist;
        match = j;
      }
    }
    if (match == i) throw ValidationError("spectrum not conjugate closed");
    used[i] = used[match] = true;
    const std::int64_t re = round_away(eig[i].real());
    const std::int64_t im = round_away(std::abs(eig[i].imag()));
    if (im == 0) {
      out.push_back({re, 0});
      out.push_back({re, 0});
    } else {
      out.push_back({re, im});
      out.push_back({re, -im});
    }
  }
  // Cap multiplicities at m (a diagonalizable placement needs geometric
  // multiplicity <= m); bump extras to nearby unused Gaussian integers.
  auto mult_of = [&](const GaussInt& g) {
    int c = 0;
    for (const auto& o : out)
      if (o.re == g.re && std::abs(o.im) == std::abs(g.im)) ++c;
    return g.im == 0 ? c : c / 2;
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mult_of(out[i]) <= m) continue;
    if (out[i].im != 0) continue;  // complex bumps handled via real offsets below
    for (std::int64_t off = 1; off < 64; ++off) {
      for (std::int64_t sgn : {-1, 1}) {
        GaussInt cand{out[i].re + sgn * off, 0};
        if (mult_of(cand) < m) {
          out[i] = cand;
          off = 64;
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace detail

inline ConversionResult convert_controller(const GivenController& ctl,
                                           const ConvertOptions& opt = {}) {
  ctl.validate();
  const int m = ctl.m();
  const auto dec = observable_decomposition(ctl.F, ctl.H, opt.tol);
  if (dec.n_obs == 0)
    throw ValidationError("conversion rejected: no observable part (H = 0)");
  const int n_obs = dec.n_obs;

  ConversionResult res;
  res.n_obs = n_obs;

  if (m == 1) {
    // Observable canonical route: rows of the transform are combinations of
    // H F^i with characteristic coefficients, the relocated state matrix is
    // the companion matrix of the chosen integer column, and the output row
    // is integer, so the s2 scale can stay 1.
    res.single_output_route = true;
    // characteristic coefficients via the Krylov closure H F^n = sum a_i H F^i,
    // solved against the actually computed powers so the transform recurrence
    // closes to machine precision
    MatrixXd krylov(n_obs, n_obs);
    MatrixXd row = dec.H1;
    for (int i = 0; i < n_obs; ++i) {
      krylov.row(i) = row;
      row = row * dec.F11;
    }
    const VectorXd a_vec =
        solve_refined(krylov.transpose(), row.transpose().col(0));
    std::vector<double> a(n_obs);
    for (int i = 0; i < n_obs; ++i) a[i] = a_vec(i);
    std::vector<std::int64_t> k(n_obs);
    if (opt.kvec) {
      if (static_cast<int>(opt.kvec->size()) != n_obs)
        throw ValidationError("conversion: k vector length mismatch");
      k = *opt.kvec;
    } else {
      for (int i = 0; i < n_obs; ++i) k[i] = round_away(a[i]);
    }
    MatrixXd t1(n_obs, n_obs);
    t1.row(n_obs - 1) = dec.H1;
    for (int i = n_obs - 1; i >= 1; --i)
      t1.row(i - 1) = t1.row(i) * dec.F11 - a[i] * dec.H1;
    IntMat fp = IntMat::Zero(n_obs, n_obs);
    for (int i = 0; i < n_obs; ++i) {
      if (i >= 1) fp(i, i - 1) = 1;
      fp(i, n_obs - 1) = k[i];
    }
    MatrixXd r1(n_obs, 1);
    for (int i = 0; i < n_obs; ++i) r1(i, 0) = a[i] - static_cast<double>(k[i]);
    res.Fp = fp;
    res.Hp = MatrixXd::Zero(1, n_obs);
    res.Hp(0, n_obs - 1) = 1.0;
    res.T = t1 * dec.W1;
    res.R = r1;
    res.kvec = k;
    res.target_charpoly.resize(n_obs);
    for (int i = 0; i < n_obs; ++i) res.target_charpoly[i] = -k[i];
  } else {
    // optionally feed back only a subset of outputs that keeps the pair
    // observable; the pruned columns of R stay zero
    std::vector<int> kept(m);
    for (int i = 0; i < m; ++i) kept[i] = i;
    if (opt.prune_outputs) {
      for (int drop = m - 1; drop >= 0 && kept.size() > 1; --drop) {
        std::vector<int> trial;
        for (int i : kept)
          if (i != drop) trial.push_back(i);
        MatrixXd h_trial(trial.size(), n_obs);
        for (std::size_t r = 0; r < trial.size(); ++r)
          h_trial.row(r) = dec.H1.row(trial[r]);
        if (detail::is_observable(dec.F11, h_trial, opt.tol)) kept = trial;
      }
    }
    res.targets = opt.targets
                      ? *opt.targets
                      : detail::default_targets(dec.F11,
                                                static_cast<int>(kept.size()));
    if (static_cast<int>(res.targets.size()) != n_obs)
      throw ValidationError("conversion: target count must equal n_obs");
    MatrixXd h_kept(kept.size(), n_obs);
    for (std::size_t r = 0; r < kept.size(); ++r)
      h_kept.row(r) = dec.H1.row(kept[r]);
    const MatrixXd r1_kept =
        integer_pole_placement(dec.F11, h_kept, res.targets, opt.tol);
    MatrixXd r1 = MatrixXd::Zero(n_obs, m);
    for (std::size_t c = 0; c < kept.size(); ++c)
      r1.col(kept[c]) = r1_kept.col(c);
    const ModalResult modal = modal_integerize(dec.F11 - r1 * dec.H1, 1e-6);
    res.Fp = modal.modal;
    res.T = modal.T * dec.W1;
    res.R = modal.T * r1;
    detail::polish_similarity_package(res.T, res.R, to_real(res.Fp), ctl.F,
                                      ctl.H);
    res.Hp = (n_obs == ctl.n())
                 ? MatrixXd(ctl.H * res.T.partialPivLu().solve(
                                        MatrixXd::Identity(n_obs, n_obs)))
                 : MatrixXd(ctl.H * right_inverse(res.T));
    const auto poly = char_poly_from_targets(res.targets);
    res.target_charpoly.resize(n_obs);
    for (int i = 0; i < n_obs; ++i)
      res.target_charpoly[i] = poly[i].to_int64();
  }

  res.T_right_inv = (n_obs == ctl.n())
                        ? res.T.partialPivLu()
                              .solve(MatrixXd::Identity(n_obs, n_obs))
                              .eval()
                        : right_inverse(res.T);
  if (!res.single_output_route) {
    // drive ||H' T - H|| to rounding level; the dynamics identity carries
    // R * (H' T - H), and R can be large for badly scaled modal bases
    for (int pass = 0; pass < 3; ++pass) {
      MatrixXd resid(m, ctl.n());
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < ctl.n(); ++j) {
          long double acc = static_cast<long double>(ctl.H(i, j));
          for (int k = 0; k < n_obs; ++k)
            acc -= static_cast<long double>(res.Hp(i, k)) *
                   static_cast<long double>(res.T(k, j));
          resid(i, j) = static_cast<double>(acc);
        }
      if (inf_norm(resid) < 1e-15 * std::max(1.0, inf_norm(ctl.H))) break;
      res.Hp += resid * res.T_right_inv;
    }
  }
  res.residual_dynamics =
      inf_norm((to_real(res.Fp) + res.R * res.Hp) * res.T - res.T * ctl.F);
  res.residual_output = inf_norm(res.Hp * res.T - ctl.H);
  return res;
}

// Exact integer characteristic polynomial of the converted state matrix,
// ascending with implicit leading 1.  Both routes yield matrices whose
// polynomial is available structurally: companion column, or the product of
// the modal diagonal blocks (the modal form is block upper triangular).
inline std::vector<std::int64_t> charpoly_int(const IntMat& fp) {
  const int n = static_cast<int>(fp.rows());
  // companion structure?
  bool companion = true;
  for (int i = 0; i < n && companion; ++i)
    for (int j = 0; j < n - 1 && companion; ++j)
      if (fp(i, j) != ((i == j + 1) ? 1 : 0)) companion = false;
  std::vector<BigInt> poly;
  if (companion) {
    std::vector<BigInt> c(n + 1);
    for (int i = 0; i < n; ++i) c[i] = BigInt(-fp(i, n - 1));
    c[n] = BigInt(1);
    poly = c;
  } else {
    // block-diagonal modal structure: scan 1x1 and 2x2 diagonal blocks
    std::vector<GaussInt> roots;
    int i = 0;
    while (i < n) {
      if (i + 1 < n && fp(i + 1, i) != 0) {
        roots.push_back({fp(i, i), fp(i, i + 1)});
        roots.push_back({fp(i, i), -fp(i, i + 1)});
        i += 2;
      } else {
        roots.push_back({fp(i, i), 0});
        i += 1;
      }
    }
    poly = char_poly_from_targets(roots);
  }
  std::vector<std::int64_t> out(n);
  for (int i = 0; i < n; ++i) out[i] = poly[i].to_int64();
  return out;
}

// Remark-8 FIR realization: shift-register state matrix (already integer).
// b holds (b_0, ..., b_n) of C(z) = sum_i b_{n-i} z^{-i}.
inline GivenController build_fir(const std::vector<double>& b) {
  if (b.empty()) throw ValidationError("fir: need at least one coefficient");
  const int n = static_cast<int>(b.size()) - 1;
  GivenController c;
  c.F = MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) c.F(i, i - 1) = 1.0;
  c.G = MatrixXd::Zero(n, 1);
  if (n > 0) c.G(0, 0) = 1.0;
  c.P = MatrixXd::Zero(n, 0);
  c.H = MatrixXd::Zero(1, n);
  for (int j = 0; j < n; ++j) c.H(0, j) = b[n - 1 - j];
  c.J = MatrixXd::Constant(1, 1, b[n]);
  c.Q = MatrixXd::Zero(1, 0);
  c.x0 = VectorXd::Zero(n);
  return c;
}

// Remark-8 PID realization with derivative filter divisor Nd.
inline GivenController build_pid(double kp, double ki, double kd, double ts,
                                 int nd) {
  if (nd < 1) throw ValidationError("pid: Nd must be a positive integer");
  if (!(ts > 0)) throw ValidationError("pid: Ts must be positive");
  const double b1 = ki * ts - kd * nd * nd / ts;
  const double b0 = ki * ts * nd - ki * ts + kd * nd * nd / ts;
  const double b2 = kp + kd * nd / ts;
  GivenController c;
  c.F = MatrixXd(2, 2);
  c.F << 2.0 - nd, nd - 1.0, 1.0, 0.0;
  c.G = MatrixXd(2, 1);
  c.G << 1.0, 0.0;
  c.P = MatrixXd::Zero(2, 0);
  c.H = MatrixXd(1, 2);
  c.H << b1, b0;
  c.J = MatrixXd::Constant(1, 1, b2);
  c.Q = MatrixXd::Zero(1, 0);
  c.x0 = VectorXd::Zero(2);
  return c;
}

// Frequency response H (zI - F)^{-1} G + J of a realization.
inline Eigen::MatrixXcd freq_response(const GivenController& c,
                                      std::complex<double> z) {
  const int n = c.n();
  Eigen::MatrixXcd zi = Eigen::MatrixXcd::Identity(n, n) * z - c.F.cast<std::complex<double>>();
  if (n == 0) return c.J.cast<std::complex<double>>();
  return c.H.cast<std::complex<double>>() * zi.partialPivLu().solve(c.G.cast<std::complex<double>>()) +
         c.J.cast<std::complex<double>>();
}

// The scaled recursion without the significand truncation: the input term is
// multiplied by (1/s1)^{t+1}, so the exact state blows up for 1/s1 > 1.
// Returns the infinity-norm trajectory of the exact integer state.
inline std::vector<double> divergent_demo(const GivenController& ctl,
                                          const ScaleSet& sc, int steps,
                                          const VectorXd& y_const,
                                          const VectorXd& r_const) {
  ctl.validate();
  const int shift = -sc.s1_exp;  // 1/s1 = 2^shift
  const IntMat fb = scale_matrix(ctl.F, sc.s1());
  const IntMat gb = scale_matrix(ctl.G, sc.s1());
  const IntMat pb = scale_matrix(ctl.P, sc.s1());
  const auto yb = quantize_signal(y_const, sc.r1());
  const auto rb = quantize_signal(r_const, sc.r1());
  std::vector<std::int64_t> drive(ctl.n(), 0);
  {
    const auto gy = matvec_checked(gb, yb);
    const auto pr = matvec_checked(pb, rb);
    for (int i = 0; i < ctl.n(); ++i) drive[i] = checked_add(gy[i], pr[i]);
  }
  std::vector<BigInt> state(ctl.n());
  {
    const auto x0 = quantize_signal(ctl.x0, sc.r1() * sc.s1());
    for (int i = 0; i < ctl.n(); ++i) state[i] = BigInt(x0[i]);
  }
  std::vector<double> norms;
  norms.reserve(steps + 1);
  auto record = [&] {
    double nrm = 0;
    for (const auto& v : state) nrm = std::max(nrm, std::abs(v.to_double()));
    norms.push_back(nrm);
  };
  record();
  for (int t = 0; t < steps; ++t) {
    std::vector<BigInt> next(ctl.n());
    for (int i = 0; i < ctl.n(); ++i) {
      BigInt acc;
      for (int j = 0; j < ctl.n(); ++j) acc += state[j] * fb(i, j);
      acc += BigInt(drive[i]).shl(shift * (t + 1));
      next[i] = acc;
    }
    state = std::move(next);
    record();
  }
  return norms;
}

}  // namespace ectl
