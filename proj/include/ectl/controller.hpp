// The controller realizations along the conversion pipeline and the
// actuator-side codec.
//
//   QuantizedController  integer recursion with the s1-truncation of the
//                        state product (reference implementation of the
//                        scheme the conversion replaces)
//   IntegerController    converted realization over unbounded integers
//   RingController       the same matrices reduced mod q; state residues
//                        stay in [0, q) forever
//   EncryptedController  GSW-encrypted matrices (or plaintext matrices in
//                        the additive variant) operating on ciphertexts
//
// Within a sampling instant the order is: compute output from the current
// state, send it, receive the requantized output back, then update the
// state.  output()/update() expose exactly that split; update() takes the
// same sensor inputs that produced the output.

#pragma once

#include <cstdint>
#include <vector>

#include "ectl/common.hpp"
#include "ectl/convert.hpp"
#include "ectl/linalg.hpp"
#include "ectl/quantize.hpp"
#include "ectl/zq_lwe.hpp"

namespace ectl {

using IVec = std::vector<std::int64_t>;
using RVec = std::vector<Residue>;

// ---------------------------------------------------------------------------
// quantized realization (pre-conversion)

struct QuantizedController {
  IntMat Fb, Gb, Pb, Hb, Jb, Qb;
  IVec x;
  ScaleSet sc;

  static QuantizedController make(const GivenController& c, const ScaleSet& sc) {
    c.validate();
    sc.validate();
    QuantizedController q;
    q.sc = sc;
    q.Fb = scale_matrix(c.F, sc.s1());
    q.Gb = scale_matrix(c.G, sc.s1());
    q.Pb = scale_matrix(c.P, sc.s1());
    q.Hb = scale_matrix(c.H, sc.s2());
    q.Jb = scale_matrix(c.J, sc.s1() * sc.s2());
    q.Qb = scale_matrix(c.Q, sc.s1() * sc.s2());
    q.x = quantize_signal(c.x0, sc.r1() * sc.s1());
    return q;
  }

  // u(t) from x(t), then x(t+1) = round(s1 * Fb x) + Gb y + Pb r.
  IVec step(const IVec& yb, const IVec& rb) {
    IVec ub = matvec_checked(Hb, x);
    add_in(ub, matvec_checked(Jb, yb));
    add_in(ub, matvec_checked(Qb, rb));
    IVec fx = matvec_checked(Fb, x);
    for (auto& v : fx) v = round_shift(v, -sc.s1_exp);
    add_in(fx, matvec_checked(Gb, yb));
    add_in(fx, matvec_checked(Pb, rb));
    x = std::move(fx);
    return ub;
  }

  static void add_in(IVec& a, const IVec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = checked_add(a[i], b[i]);
  }
};

// ---------------------------------------------------------------------------
// converted integer realization

struct IntegerController {
  IntMat Fp, Gp, Pp, Rb, Hb, Jb, Qb;
  IVec z;
  ScaleSet sc;

  static IntegerController make(const GivenController& c,
                                const ConversionResult& conv,
                                const ScaleSet& sc) {
    sc.validate();
    IntegerController ic;
    ic.sc = sc;
    ic.Fp = conv.Fp;
    ic.Gp = scale_matrix(conv.T * c.G - conv.R * c.J, sc.s1());
    ic.Pp = scale_matrix(conv.T * c.P - conv.R * c.Q, sc.s1());
    ic.Rb = scale_matrix(conv.R, sc.s1());
    ic.Hb = scale_matrix(conv.Hp, sc.s2());
    ic.Jb = scale_matrix(c.J, sc.s1() * sc.s2());
    ic.Qb = scale_matrix(c.Q, sc.s1() * sc.s2());
    ic.z = quantize_signal(conv.T * c.x0, sc.r1() * sc.s1());
    return ic;
  }

  IVec output(const IVec& yb, const IVec& rb) const {
    IVec ub = matvec_checked(Hb, z);
    QuantizedController::add_in(ub, matvec_checked(Jb, yb));
    QuantizedController::add_in(ub, matvec_checked(Qb, rb));
    return ub;
  }

  void update(const IVec& yb, const IVec& rb, const IVec& ub_prime) {
    IVec nz = matvec_checked(Fp, z);
    QuantizedController::add_in(nz, matvec_checked(Gp, yb));
    QuantizedController::add_in(nz, matvec_checked(Pp, rb));
    QuantizedController::add_in(nz, matvec_checked(Rb, ub_prime));
    z = std::move(nz);
  }
};

// Requantized output fed back into the state update: u' = round(s1*s2*u).
inline IVec requantize_output(const IVec& ub, const ScaleSet& sc) {
  IVec out(ub.size());
  for (std::size_t i = 0; i < ub.size(); ++i)
    out[i] = round_shift(ub[i], -(sc.s1_exp + sc.s2_exp));
  return out;
}

// ---------------------------------------------------------------------------
// mod-q realization

struct RingController {
  IntMat Fp, Gp, Pp, Rb, Hb, Jb, Qb;  // interpreted mod q
  RVec z;                             // residues in [0, q)
  OutputWindow win;
  ScaleSet sc;
  std::uint64_t q = 0;

  std::uint64_t mask() const { return q - 1; }

  static RingController make(const IntegerController& ic,
                             const OutputWindow& win) {
    win.validate();
    RingController rc;
    rc.Fp = ic.Fp;
    rc.Gp = ic.Gp;
    rc.Pp = ic.Pp;
    rc.Rb = ic.Rb;
    rc.Hb = ic.Hb;
    rc.Jb = ic.Jb;
    rc.Qb = ic.Qb;
    rc.win = win;
    rc.sc = ic.sc;
    rc.q = win.q;
    rc.z.resize(ic.z.size());
    for (std::size_t i = 0; i < ic.z.size(); ++i) {
      const std::int64_t scaled = checked_mul(ic.z[i], ic.sc.inv_L());
      rc.z[i] = static_cast<Residue>(scaled) & rc.mask();
    }
    return rc;
  }

  RVec matvec_mod(const IntMat& m, const RVec& v) const {
    if (m.cols() != static_cast<Eigen::Index>(v.size()))
      throw ValidationError("ring matvec: shape mismatch");
    RVec out(m.rows());
    for (int i = 0; i < m.rows(); ++i) {
      std::uint64_t acc = 0;
      for (int j = 0; j < m.cols(); ++j)
        acc += static_cast<std::uint64_t>(m(i, j)) * v[j];
      out[i] = acc & mask();
    }
    return out;
  }

  RVec output(const RVec& y_res, const RVec& r_res) const {
    RVec u = matvec_mod(Hb, z);
    add_mod(u, matvec_mod(Jb, y_res));
    add_mod(u, matvec_mod(Qb, r_res));
    return u;
  }

  void update(const RVec& y_res, const RVec& r_res, const RVec& u_res) {
    RVec nz = matvec_mod(Fp, z);
    add_mod(nz, matvec_mod(Gp, y_res));
    add_mod(nz, matvec_mod(Pp, r_res));
    add_mod(nz, matvec_mod(Rb, u_res));
    z = std::move(nz);
  }

  void add_mod(RVec& a, const RVec& b) const {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] + b[i]) & mask();
  }
};

// Input scaling for the mod-q and encrypted paths: v * (1/L) mod q.
inline RVec scale_inputs_mod(const IVec& v, const ScaleSet& sc,
                             std::uint64_t q) {
  RVec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<Residue>(checked_mul(v[i], sc.inv_L())) & (q - 1);
  return out;
}

// ---------------------------------------------------------------------------
// encrypted realization

enum class ParamMode { encrypted_params, plain_params };

struct EncryptedController {
  ParamMode mode = ParamMode::encrypted_params;
  // one GSW matrix per controller matrix (encrypted_params)
  std::vector<std::vector<GswCiphertext>> FpE, GpE, PpE, RbE, HbE, JbE, QbE;
  // plaintext matrices (plain_params, additive variant)
  IntMat Fp, Gp, Pp, Rb, Hb, Jb, Qb;
  std::vector<Ciphertext> z;
  OutputWindow win;
  ScaleSet sc;
  LweParams params;

  std::vector<Ciphertext> output(const std::vector<Ciphertext>& yE,
                                 const std::vector<Ciphertext>& rE) const {
    if (mode == ParamMode::encrypted_params) {
      auto u = enc_matvec(HbE, z, params);
      acc(u, enc_matvec(JbE, yE, params));
      acc(u, enc_matvec(QbE, rE, params));
      return u;
    }
    auto u = plain_matvec(to_rows(Hb), z, params);
    acc(u, plain_matvec(to_rows(Jb), yE, params));
    acc(u, plain_matvec(to_rows(Qb), rE, params));
    return u;
  }

  void update(const std::vector<Ciphertext>& yE,
              const std::vector<Ciphertext>& rE,
              const std::vector<Ciphertext>& uE_prime) {
    if (mode == ParamMode::encrypted_params) {
      auto nz = enc_matvec(FpE, z, params);
      acc(nz, enc_matvec(GpE, yE, params));
      acc(nz, enc_matvec(PpE, rE, params));
      acc(nz, enc_matvec(RbE, uE_prime, params));
      z = std::move(nz);
      return;
    }
    auto nz = plain_matvec(to_rows(Fp), z, params);
    acc(nz, plain_matvec(to_rows(Gp), yE, params));
    acc(nz, plain_matvec(to_rows(Pp), rE, params));
    acc(nz, plain_matvec(to_rows(Rb), uE_prime, params));
    z = std::move(nz);
  }

  void acc(std::vector<Ciphertext>& a, const std::vector<Ciphertext>& b) const {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = add(a[i], b[i], params);
  }

  static std::vector<std::vector<std::int64_t>> to_rows(const IntMat& m) {
    std::vector<std::vector<std::int64_t>> rows(m.rows());
    for (int i = 0; i < m.rows(); ++i) {
      rows[i].resize(m.cols());
      for (int j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
    }
    return rows;
  }
};

inline std::vector<std::vector<GswCiphertext>> encrypt_matrix(
    const IntMat& m, const SecretKey& key, const Backend& be, CounterRng& rng) {
  std::vector<std::vector<GswCiphertext>> out(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    out[i].reserve(m.cols());
    for (int j = 0; j < m.cols(); ++j)
      out[i].push_back(
          encrypt_mult(to_residue(m(i, j), be.params), key, be, rng));
  }
  return out;
}

inline std::vector<Ciphertext> encrypt_residues(const RVec& v,
                                                const SecretKey& key,
                                                const Backend& be,
                                                CounterRng& rng) {
  std::vector<Ciphertext> out;
  out.reserve(v.size());
  for (Residue r : v) out.push_back(encrypt(r, key, be, rng));
  return out;
}

inline EncryptedController encrypt_controller(const RingController& rc,
                                              const SecretKey& key,
                                              const Backend& be,
                                              CounterRng& rng,
                                              ParamMode mode =
                                                  ParamMode::encrypted_params) {
  if (rc.q != be.params.q)
    throw ValidationError(
        "encrypt_controller: window modulus does not match crypto modulus");
  EncryptedController ec;
  ec.mode = mode;
  ec.win = rc.win;
  ec.sc = rc.sc;
  ec.params = be.params;
  if (mode == ParamMode::encrypted_params) {
    ec.FpE = encrypt_matrix(rc.Fp, key, be, rng);
    ec.GpE = encrypt_matrix(rc.Gp, key, be, rng);
    ec.PpE = encrypt_matrix(rc.Pp, key, be, rng);
    ec.RbE = encrypt_matrix(rc.Rb, key, be, rng);
    ec.HbE = encrypt_matrix(rc.Hb, key, be, rng);
    ec.JbE = encrypt_matrix(rc.Jb, key, be, rng);
    ec.QbE = encrypt_matrix(rc.Qb, key, be, rng);
  } else {
    ec.Fp = rc.Fp;
    ec.Gp = rc.Gp;
    ec.Pp = rc.Pp;
    ec.Rb = rc.Rb;
    ec.Hb = rc.Hb;
    ec.Jb = rc.Jb;
    ec.Qb = rc.Qb;
  }
  ec.z = encrypt_residues(rc.z, key, be, rng);
  return ec;
}

// ---------------------------------------------------------------------------
// actuator-side codec (the only component holding the secret key)

enum class ReencRule { paper, footnote };

// u = r2 * round(r1*s1*s2 * (L*u_window) / r2), the actuator recovery for the
// mod-q and encrypted paths (u_window already carries the 1/L scale).
inline VectorXd recover_windowed(const IVec& u_window, const ScaleSet& sc) {
  const int e = sc.r1_exp + sc.s1_exp + sc.s2_exp + sc.L_exp - sc.r2_exp;
  VectorXd out(static_cast<Eigen::Index>(u_window.size()));
  for (std::size_t i = 0; i < u_window.size(); ++i) {
    std::int64_t grid;
    if (e >= 0)
      grid = checked_mul(u_window[i], std::int64_t{1} << e);
    else
      grid = round_shift(u_window[i], -e);
    out(static_cast<Eigen::Index>(i)) = sc.r2() * static_cast<double>(grid);
  }
  return out;
}

struct ActuatorDecode {
  VectorXd u_real;
  IVec u_window;                    // biased-mod projection of Dec(u)
  IVec reenc_value;                 // plaintext of the re-encrypted output
  std::vector<Ciphertext> reenc;    // Enc of reenc_value
};

struct ActuatorCodec {
  const SecretKey* sk = nullptr;
  Backend backend;
  OutputWindow win;
  ScaleSet sc;
  ReencRule rule = ReencRule::paper;

  // plant output / reference into ciphertexts of v*(1/L) mod q
  std::vector<Ciphertext> encrypt_inputs(const IVec& v, CounterRng& rng) const {
    const RVec res = scale_inputs_mod(v, sc, backend.params.q);
    return encrypt_residues(res, *sk, backend, rng);
  }

  ActuatorDecode decode(const std::vector<Ciphertext>& uE,
                        CounterRng& rng) const {
    ActuatorDecode out;
    IVec dec(uE.size());
    for (std::size_t i = 0; i < uE.size(); ++i)
      dec[i] =
          static_cast<std::int64_t>(decrypt(uE[i], *sk, backend.params));
    out.u_window = biased_mod(dec, win);
    out.u_real = recover_windowed(out.u_window, sc);
    out.reenc_value.resize(dec.size());
    RVec res(dec.size());
    for (std::size_t i = 0; i < dec.size(); ++i) {
      std::int64_t v;
      if (rule == ReencRule::paper) {
        // Enc(round(L*s1*s2*u)/L mod q)
        v = checked_mul(
            round_shift(out.u_window[i], -(sc.s1_exp + sc.s2_exp + sc.L_exp)),
            sc.inv_L());
      } else {
        // footnote variant: Enc(round(s1*s2*u) mod q), keeps more low bits
        v = round_shift(out.u_window[i], -(sc.s1_exp + sc.s2_exp));
      }
      out.reenc_value[i] = v;
      res[i] = to_residue(v, backend.params);
    }
    out.reenc = encrypt_residues(res, *sk, backend, rng);
    return out;
  }
};

// Ring-path actuator: window the output, recover the real input and produce
// the feedback residues u'(t)/L mod q.
struct RingDecode {
  VectorXd u_real;
  IVec u_window;
  IVec u_prime;    // round(s1*s2*L*u_window)
  RVec feedback;   // u_prime * (1/L) mod q
};

inline RingDecode ring_actuator(const RVec& u_res, const OutputWindow& win,
                                const ScaleSet& sc) {
  RingDecode d;
  IVec raw(u_res.size());
  for (std::size_t i = 0; i < u_res.size(); ++i)
    raw[i] = static_cast<std::int64_t>(u_res[i]);
  d.u_window = biased_mod(raw, win);
  d.u_real = recover_windowed(d.u_window, sc);
  d.u_prime.resize(d.u_window.size());
  d.feedback.resize(d.u_window.size());
  for (std::size_t i = 0; i < d.u_window.size(); ++i) {
    d.u_prime[i] =
        round_shift(d.u_window[i], -(sc.s1_exp + sc.s2_exp + sc.L_exp));
    d.feedback[i] = static_cast<Residue>(
                        checked_mul(d.u_prime[i], sc.inv_L())) &
                    (win.q - 1);
  }
  return d;
}

}  // namespace ectl
