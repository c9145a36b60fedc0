// LWE/GSW symmetric cryptosystem over Z_q with q and nu powers of two, plus
// a zero-error debug backend.
//
// Ciphertexts are vectors [b; a] in Z_q^{n+1}; multiplier encryptions are
// (n+1) x n' matrices with n' = d(n+1).  Decryption of any ciphertext is the
// affine map [1, sk]*c mod q.  The homomorphic contract:
//   H1  Dec(Enc(m))            = m + e,        |e| <= delta_enc = k0*sigma
//   H2  Dec(c1 + c2)           = Dec(c1) + Dec(c2)               (exact)
//   H3  Dec(k * c)             = k * Dec(c)                      (exact)
//   H4  Dec(Mult(EncMult(k),c))= k * Dec(c) + e, |e| <= delta_mult
// with delta_mult = d(n+1)*k0*sigma*nu.  All equalities are mod q.
//
// The debug backend runs the same algorithms with the random mask and noise
// forced to zero, so it stores plaintexts verbatim and satisfies H1-H4 with
// both delta bounds equal to zero (the stand-in for schemes without error
// injection).

#pragma once

#include <cstdint>
#include <vector>

#include "ectl/common.hpp"
#include "ectl/rng.hpp"

namespace ectl {

using Residue = std::uint64_t;

struct LweParams {
  int q0 = 0;            // q = 2^q0
  std::uint64_t q = 0;
  int nu0 = 0;           // nu = 2^nu0
  std::uint64_t nu = 0;
  int d = 0;             // gadget length, nu^(d-1) < q <= nu^d
  int n = 0;             // LWE dimension
  int n_prime = 0;       // d*(n+1)
  double sigma = 0;
  int k0 = 0;
  double delta_enc = 0;  // k0*sigma
  double delta_mult = 0; // d(n+1)*k0*sigma*nu

  std::uint64_t mask() const { return q - 1; }
};

inline LweParams setup(int q0, int nu0, int n, double sigma, int k0) {
  if (q0 < 16) throw ValidationError("setup: q0 must be >= 16");
  if (q0 > 62) throw ValidationError("setup: q0 must be <= 62");
  if (nu0 < 1 || nu0 > q0)
    throw ValidationError("setup: need 1 <= nu0 <= q0 (gadget base exceeds modulus)");
  if (n < 1) throw ValidationError("setup: n must be >= 1");
  if (!(sigma > 0)) throw ValidationError("setup: sigma must be positive");
  if (k0 < 1) throw ValidationError("setup: k0 must be >= 1");

  LweParams p;
  p.q0 = q0;
  p.q = std::uint64_t{1} << q0;
  p.nu0 = nu0;
  p.nu = std::uint64_t{1} << nu0;
  p.d = (q0 + nu0 - 1) / nu0;  // smallest d with nu^d >= q
  p.n = n;
  p.n_prime = p.d * (n + 1);
  p.sigma = sigma;
  p.k0 = k0;
  p.delta_enc = k0 * sigma;
  p.delta_mult = static_cast<double>(p.n_prime) * k0 * sigma *
                 static_cast<double>(p.nu);
  return p;
}

// Desk-scale parameters for fast functional tests and the larger profile
// used for timing runs.  Neither size is claimed to be secure.
inline LweParams desk_params() { return setup(24, 24, 32, 1.0, 6); }
inline LweParams paper_params() { return setup(48, 16, 249, 1.0, 6); }

enum class BackendKind { lwe, debug };

struct Backend {
  BackendKind kind = BackendKind::lwe;
  LweParams params;

  double delta_enc() const {
    return kind == BackendKind::debug ? 0.0 : params.delta_enc;
  }
  double delta_mult() const {
    return kind == BackendKind::debug ? 0.0 : params.delta_mult;
  }
};

struct SecretKey {
  std::vector<std::int64_t> sk;  // row vector, n components, |sk_i| <= k0*sigma
};

struct Ciphertext {
  std::vector<Residue> coeffs;  // [b; a], n+1 residues
};

struct GswCiphertext {
  int rows = 0;                // n+1
  int cols = 0;                // n_prime
  std::vector<Residue> mat;    // row-major
  Residue& at(int r, int c) { return mat[static_cast<std::size_t>(r) * cols + c]; }
  Residue at(int r, int c) const {
    return mat[static_cast<std::size_t>(r) * cols + c];
  }
};

inline std::int64_t centered(Residue v, const LweParams& p) {
  return v >= p.q / 2 ? static_cast<std::int64_t>(v) - static_cast<std::int64_t>(p.q)
                      : static_cast<std::int64_t>(v);
}

inline Residue to_residue(std::int64_t v, const LweParams& p) {
  return static_cast<Residue>(v) & p.mask();
}

inline SecretKey keygen(const LweParams& p, std::uint64_t seed) {
  CounterRng rng(seed);
  DiscreteGaussian g(p.sigma, p.k0);
  SecretKey key;
  key.sk.resize(p.n);
  for (auto& s : key.sk) s = g.sample(rng);
  return key;
}

inline Ciphertext encrypt(Residue m, const SecretKey& key, const Backend& be,
                          CounterRng& rng) {
  const LweParams& p = be.params;
  if (m >= p.q) throw ValidationError("encrypt: message outside Z_q");
  Ciphertext c;
  c.coeffs.assign(p.n + 1, 0);
  std::int64_t e = 0;
  if (be.kind == BackendKind::lwe) {
    for (int i = 0; i < p.n; ++i) c.coeffs[1 + i] = rng.next_residue(p.mask());
    DiscreteGaussian g(p.sigma, p.k0);
    e = g.sample(rng);
  }
  // b = -sk*a + m + e mod q
  std::uint64_t b = m + static_cast<std::uint64_t>(e);
  for (int i = 0; i < p.n; ++i)
    b -= static_cast<std::uint64_t>(key.sk[i]) * c.coeffs[1 + i];
  c.coeffs[0] = b & p.mask();
  return c;
}

inline Residue decrypt(const Ciphertext& c, const SecretKey& key,
                       const LweParams& p) {
  if (c.coeffs.size() != static_cast<std::size_t>(p.n + 1))
    throw ValidationError("decrypt: ciphertext dimension mismatch");
  std::uint64_t acc = c.coeffs[0];
  for (int i = 0; i < p.n; ++i)
    acc += static_cast<std::uint64_t>(key.sk[i]) * c.coeffs[1 + i];
  return acc & p.mask();
}

inline Ciphertext add(const Ciphertext& c1, const Ciphertext& c2,
                      const LweParams& p) {
  if (c1.coeffs.size() != c2.coeffs.size())
    throw ValidationError("add: ciphertext dimension mismatch");
  Ciphertext r;
  r.coeffs.resize(c1.coeffs.size());
  for (std::size_t i = 0; i < r.coeffs.size(); ++i)
    r.coeffs[i] = (c1.coeffs[i] + c2.coeffs[i]) & p.mask();
  return r;
}

inline Ciphertext int_mult(std::int64_t k, const Ciphertext& c,
                           const LweParams& p) {
  Ciphertext r;
  r.coeffs.resize(c.coeffs.size());
  const std::uint64_t ku = static_cast<std::uint64_t>(k);
  for (std::size_t i = 0; i < r.coeffs.size(); ++i)
    r.coeffs[i] = (ku * c.coeffs[i]) & p.mask();
  return r;
}

// Base-nu digits of every coefficient: c_i = floor(c/nu^i) - floor(c/nu^{i+1})*nu,
// stacked as col{c_0, ..., c_{d-1}} of length n_prime.
inline std::vector<Residue> gadget_decompose(const Ciphertext& c,
                                             const LweParams& p) {
  std::vector<Residue> out(static_cast<std::size_t>(p.n_prime));
  const std::uint64_t digit_mask = p.nu - 1;
  for (int i = 0; i < p.d; ++i)
    for (int r = 0; r <= p.n; ++r)
      out[static_cast<std::size_t>(i) * (p.n + 1) + r] =
          (c.coeffs[r] >> (i * p.nu0)) & digit_mask;
  return out;
}

inline GswCiphertext encrypt_mult(Residue k, const SecretKey& key,
                                  const Backend& be, CounterRng& rng) {
  const LweParams& p = be.params;
  if (k >= p.q) throw ValidationError("encrypt_mult: multiplier outside Z_q");
  GswCiphertext g;
  g.rows = p.n + 1;
  g.cols = p.n_prime;
  g.mat.assign(static_cast<std::size_t>(g.rows) * g.cols, 0);

  if (be.kind == BackendKind::lwe) {
    DiscreteGaussian gauss(p.sigma, p.k0);
    // A random, E gaussian, B = -sk*A + E; stored as [B; A].
    for (int j = 0; j < p.n_prime; ++j) {
      std::uint64_t b = static_cast<std::uint64_t>(gauss.sample(rng));
      for (int i = 0; i < p.n; ++i) {
        const Residue a = rng.next_residue(p.mask());
        g.at(1 + i, j) = a;
        b -= static_cast<std::uint64_t>(key.sk[i]) * a;
      }
      g.at(0, j) = b & p.mask();
    }
  }
  // + k * [I, nu*I, ..., nu^{d-1}*I]
  for (int i = 0; i < p.d; ++i) {
    const std::uint64_t kp = (k * (std::uint64_t{1} << (i * p.nu0))) & p.mask();
    for (int r = 0; r <= p.n; ++r) {
      const int col = i * (p.n + 1) + r;
      g.at(r, col) = (g.at(r, col) + kp) & p.mask();
    }
  }
  return g;
}

inline Ciphertext mult_decomposed(const GswCiphertext& g,
                                  const std::vector<Residue>& col,
                                  const LweParams& p) {
  if (g.cols != p.n_prime || col.size() != static_cast<std::size_t>(p.n_prime))
    throw ValidationError("mult: gadget dimension mismatch");
  Ciphertext r;
  r.coeffs.assign(p.n + 1, 0);
  for (int row = 0; row < g.rows; ++row) {
    const Residue* m = &g.mat[static_cast<std::size_t>(row) * g.cols];
    std::uint64_t acc = 0;
    for (int j = 0; j < g.cols; ++j) acc += m[j] * col[j];
    r.coeffs[row] = acc & p.mask();
  }
  return r;
}

inline Ciphertext mult(const GswCiphertext& g, const Ciphertext& c,
                       const LweParams& p) {
  if (c.coeffs.size() != static_cast<std::size_t>(p.n + 1) ||
      g.rows != p.n + 1)
    throw ValidationError("mult: ciphertext dimension mismatch");
  return mult_decomposed(g, gadget_decompose(c, p), p);
}

// Dec(Cmat * cvec) = K * Dec(cvec) + e mod q with ||e|| <= cols * delta_mult.
inline std::vector<Ciphertext> enc_matvec(
    const std::vector<std::vector<GswCiphertext>>& Cmat,
    const std::vector<Ciphertext>& cvec, const LweParams& p) {
  const std::size_t rows = Cmat.size();
  const std::size_t cols = rows ? Cmat[0].size() : 0;
  if (cols != cvec.size())
    throw ValidationError("enc_matvec: shape mismatch");
  std::vector<std::vector<Residue>> decomposed(cols);
  for (std::size_t j = 0; j < cols; ++j)
    decomposed[j] = gadget_decompose(cvec[j], p);
  std::vector<Ciphertext> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (Cmat[i].size() != cols)
      throw ValidationError("enc_matvec: ragged matrix");
    Ciphertext acc;
    acc.coeffs.assign(p.n + 1, 0);
    for (std::size_t j = 0; j < cols; ++j)
      acc = add(acc, mult_decomposed(Cmat[i][j], decomposed[j], p), p);
    out[i] = std::move(acc);
  }
  return out;
}

// Plaintext integer matrix times ciphertext vector, built from H2/H3 only;
// introduces no error at all.
inline std::vector<Ciphertext> plain_matvec(
    const std::vector<std::vector<std::int64_t>>& K,
    const std::vector<Ciphertext>& cvec, const LweParams& p) {
  const std::size_t rows = K.size();
  const std::size_t cols = rows ? K[0].size() : 0;
  if (cols != cvec.size())
    throw ValidationError("plain_matvec: shape mismatch");
  std::vector<Ciphertext> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (K[i].size() != cols) throw ValidationError("plain_matvec: ragged matrix");
    Ciphertext acc;
    acc.coeffs.assign(p.n + 1, 0);
    for (std::size_t j = 0; j < cols; ++j)
      acc = add(acc, int_mult(K[i][j], cvec[j], p), p);
    out[i] = std::move(acc);
  }
  return out;
}

}  // namespace ectl
