// Closed-loop simulation across all controller modes, the unbounded-integer
// reference oracle, the bench preset, and the parallel comparison harness.
//
// Run loop per sampling instant: sample y, quantize (and encrypt when the
// mode calls for it), compute the controller output, decode at the actuator,
// send the requantized output back into the state update, hold u over the
// period and integrate the plant.  The ideal mode runs the given controller
// in real arithmetic with zero perturbations and serves as the reference
// signal y', u' for every error metric.
//
// Modular and encrypted runs co-execute an exact arbitrary-precision replica
// of the scaled integer controller.  For encrypted runs the replica absorbs
// the measured per-step injected errors, so it remains the exact unbounded
// shadow of the decrypted state: Dec(z) == shadow mod q at every step.  That
// is what makes window violations detectable at the exact step they occur
// and gives the comparison point for the cut-off high bits of the ring
// state.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ectl/bigint.hpp"
#include "ectl/bounds.hpp"
#include "ectl/controller.hpp"
#include "ectl/convert.hpp"
#include "ectl/plant.hpp"
#include "ectl/quantize.hpp"
#include "ectl/zq_lwe.hpp"

namespace ectl {

enum class Mode { ideal, quantized, integer_mode, ring, encrypted, additive };

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::ideal: return "ideal";
    case Mode::quantized: return "quantized";
    case Mode::integer_mode: return "integer";
    case Mode::ring: return "ring";
    case Mode::encrypted: return "encrypted";
    case Mode::additive: return "additive";
  }
  return "?";
}

inline Mode mode_from_name(const std::string& s) {
  if (s == "ideal") return Mode::ideal;
  if (s == "quantized") return Mode::quantized;
  if (s == "integer") return Mode::integer_mode;
  if (s == "ring") return Mode::ring;
  if (s == "encrypted") return Mode::encrypted;
  if (s == "additive") return Mode::additive;
  throw ConfigError("unknown mode: " + s);
}

// Piecewise-constant reference schedule.
struct Reference {
  std::vector<std::pair<double, VectorXd>> pieces;  // (time_from, value)

  VectorXd at(double t) const {
    if (pieces.empty()) return VectorXd(0);
    VectorXd v = pieces.front().second;
    for (const auto& [from, val] : pieces)
      if (t >= from) v = val;
    return v;
  }

  static Reference constant(const VectorXd& v) { return Reference{{{0.0, v}}}; }
};

struct Trace {
  Mode mode = Mode::ideal;
  double Ts = 0;
  std::vector<VectorXd> y, u, r;
  std::vector<IVec> u_window;   // windowed integer outputs (ring/encrypted)
  std::vector<IVec> u_prime;    // requantized outputs fed back
  std::vector<double> ez_norm, eu_norm;          // perturbation diagnostics
  std::vector<double> delta1_norm, delta2_norm;  // injected-error diagnostics
  std::vector<double> window_margin;
  std::vector<std::uint8_t> state_cut;  // state differs from exact oracle
  std::vector<double> err_y, err_u;     // filled against the ideal run

  int steps() const { return static_cast<int>(y.size()); }
};

inline std::int64_t centered_ring(Residue v, std::uint64_t q) {
  return v >= q / 2 ? static_cast<std::int64_t>(v) - static_cast<std::int64_t>(q)
                    : static_cast<std::int64_t>(v);
}

inline IVec decrypt_vec(const std::vector<Ciphertext>& v, const SecretKey& key,
                        const LweParams& p) {
  IVec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<std::int64_t>(decrypt(v[i], key, p));
  return out;
}

// Exact replica of the scaled integer controller (state z~ = zbar / L) in
// arbitrary precision; immune to overflow at any horizon.  Sensor inputs are
// lifted by 1/L; the feedback term takes the raw plaintext value that enters
// the Rb product.  The dz hooks absorb measured injected errors so the
// replica shadows an encrypted run exactly.
struct ScaledOracle {
  IntMat Fp, Gp, Pp, Rb, Hb, Jb, Qb;
  std::vector<BigInt> z;
  ScaleSet sc;

  static ScaledOracle make(const IntegerController& ic) {
    ScaledOracle o;
    o.Fp = ic.Fp;
    o.Gp = ic.Gp;
    o.Pp = ic.Pp;
    o.Rb = ic.Rb;
    o.Hb = ic.Hb;
    o.Jb = ic.Jb;
    o.Qb = ic.Qb;
    o.sc = ic.sc;
    o.z.resize(ic.z.size());
    for (std::size_t i = 0; i < ic.z.size(); ++i)
      o.z[i] = BigInt(ic.z[i]) * ic.sc.inv_L();
    return o;
  }

  std::vector<BigInt> matvec(const IntMat& m,
                             const std::vector<BigInt>& v) const {
    std::vector<BigInt> out(m.rows());
    for (int i = 0; i < m.rows(); ++i) {
      BigInt acc;
      for (int j = 0; j < m.cols(); ++j) acc += v[j] * m(i, j);
      out[i] = acc;
    }
    return out;
  }

  std::vector<BigInt> lift(const IVec& v) const {
    std::vector<BigInt> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      out[i] = BigInt(v[i]) * sc.inv_L();
    return out;
  }

  std::vector<BigInt> output(const IVec& yb, const IVec& rb,
                             const IVec* dz = nullptr) const {
    auto u = matvec(Hb, z);
    add(u, matvec(Jb, lift(yb)));
    add(u, matvec(Qb, lift(rb)));
    if (dz)
      for (std::size_t i = 0; i < u.size(); ++i) u[i] += BigInt((*dz)[i]);
    return u;
  }

  void update(const IVec& yb, const IVec& rb, const IVec& feedback_raw,
              const IVec* dz = nullptr) {
    auto nz = matvec(Fp, z);
    add(nz, matvec(Gp, lift(yb)));
    add(nz, matvec(Pp, lift(rb)));
    std::vector<BigInt> fb(feedback_raw.size());
    for (std::size_t i = 0; i < feedback_raw.size(); ++i)
      fb[i] = BigInt(feedback_raw[i]);
    add(nz, matvec(Rb, fb));
    if (dz)
      for (std::size_t i = 0; i < nz.size(); ++i) nz[i] += BigInt((*dz)[i]);
    z = std::move(nz);
  }

  static void add(std::vector<BigInt>& a, const std::vector<BigInt>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  }
};

// Measured injected errors of one encrypted step relative to the exact
// mod-q recursion evaluated on the decrypted values:
//   state:  Dec(z+) - (Fp Dec(z) + Gp y/L + Pp r/L + Rb u')   (mod q)
//   output: Dec(u)  - (Hb Dec(z) + Jb y/L + Qb r/L)           (mod q)
inline IVec injected_state_error(const RingController& rc, const ScaleSet& sc,
                                 const IVec& z_before, const IVec& z_after,
                                 const IVec& yb, const IVec& rb,
                                 const IVec& reenc_value) {
  const std::uint64_t q = rc.q;
  RVec zres(z_before.size());
  for (std::size_t i = 0; i < z_before.size(); ++i)
    zres[i] = static_cast<Residue>(z_before[i]);
  RVec exact = rc.matvec_mod(rc.Fp, zres);
  rc.add_mod(exact, rc.matvec_mod(rc.Gp, scale_inputs_mod(yb, sc, q)));
  rc.add_mod(exact, rc.matvec_mod(rc.Pp, scale_inputs_mod(rb, sc, q)));
  RVec ures(reenc_value.size());
  for (std::size_t i = 0; i < reenc_value.size(); ++i)
    ures[i] = static_cast<Residue>(reenc_value[i]) & (q - 1);
  rc.add_mod(exact, rc.matvec_mod(rc.Rb, ures));
  IVec out(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i)
    out[i] = centered_ring((static_cast<Residue>(z_after[i]) - exact[i]) & (q - 1), q);
  return out;
}

inline IVec injected_output_error(const RingController& rc, const ScaleSet& sc,
                                  const IVec& z_before, const IVec& yb,
                                  const IVec& rb, const IVec& u_dec) {
  const std::uint64_t q = rc.q;
  RVec zres(z_before.size());
  for (std::size_t i = 0; i < z_before.size(); ++i)
    zres[i] = static_cast<Residue>(z_before[i]);
  RVec exact = rc.matvec_mod(rc.Hb, zres);
  rc.add_mod(exact, rc.matvec_mod(rc.Jb, scale_inputs_mod(yb, sc, q)));
  rc.add_mod(exact, rc.matvec_mod(rc.Qb, scale_inputs_mod(rb, sc, q)));
  IVec out(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i)
    out[i] = centered_ring((static_cast<Residue>(u_dec[i]) - exact[i]) & (q - 1), q);
  return out;
}

inline std::pair<double, double> injected_error_norms(
    const RingController& rc, const ScaleSet& sc, const IVec& z_before,
    const IVec& z_after, const IVec& yb, const IVec& rb,
    const IVec& reenc_value, const IVec& u_dec) {
  const IVec d1 =
      injected_state_error(rc, sc, z_before, z_after, yb, rb, reenc_value);
  const IVec d2 = injected_output_error(rc, sc, z_before, yb, rb, u_dec);
  auto max_abs = [](const IVec& v) {
    double m = 0;
    for (auto x : v) m = std::max(m, std::abs(static_cast<double>(x)));
    return m;
  };
  return {max_abs(d1), max_abs(d2)};
}

struct SimJob {
  PlantLti plant;
  GivenController given;
  std::optional<ConversionResult> conv;  // integer/ring/encrypted/additive
  ScaleSet sc;
  std::optional<OutputWindow> window;    // ring/encrypted/additive
  Mode mode = Mode::ideal;
  int horizon = 0;
  Reference ref;
  BackendKind backend_kind = BackendKind::lwe;
  LweParams params;                      // encrypted/additive
  std::uint64_t key_seed = 1;
  std::uint64_t rng_seed = 2;            // plant-side encryption stream
  std::uint64_t op_seed = 3;             // operator-side controller encryption
  ReencRule rule = ReencRule::paper;
  bool diagnostics = true;
};

namespace detail {

inline double window_margin_of(const IVec& uw, const OutputWindow& w) {
  double margin = 1e300;
  for (std::size_t i = 0; i < uw.size(); ++i) {
    margin = std::min(margin, static_cast<double>(uw[i] - w.u_min[i]));
    margin = std::min(margin, static_cast<double>(w.u_max[i] - uw[i]));
  }
  return margin;
}

// Centered residue difference a - b mod q.
inline IVec residue_diff(const RVec& a, const RVec& b, std::uint64_t q) {
  IVec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] = centered_ring((a[i] - b[i]) & (q - 1), q);
  return out;
}

inline RVec to_residues(const IVec& v, std::uint64_t q) {
  RVec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<Residue>(v[i]) & (q - 1);
  return out;
}

inline double max_abs(const IVec& v) {
  double m = 0;
  for (auto x : v) m = std::max(m, std::abs(static_cast<double>(x)));
  return m;
}

inline void check_window(const std::vector<BigInt>& u, const OutputWindow& w,
                         int t) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    const BigInt lo(w.u_min[i]), hi(w.u_max[i]);
    if (u[i] < lo || hi < u[i])
      throw ValidationError("window overflow at step " + std::to_string(t) +
                            ", component " + std::to_string(i));
  }
}

inline bool state_differs(const RVec& zres, const std::vector<BigInt>& oz,
                          std::uint64_t q) {
  for (std::size_t i = 0; i < zres.size(); ++i)
    if (BigInt(centered_ring(zres[i], q)) != oz[i]) return true;
  return false;
}

}  // namespace detail

inline Trace run_closed_loop(const SimJob& job) {
  job.plant.validate();
  job.given.validate();
  if (job.horizon <= 0) throw ValidationError("run: horizon must be positive");
  const bool converted_mode =
      job.mode == Mode::integer_mode || job.mode == Mode::ring ||
      job.mode == Mode::encrypted || job.mode == Mode::additive;
  if (converted_mode && !job.conv)
    throw ValidationError("run: mode requires a conversion result");
  const bool ring_like = job.mode == Mode::ring || job.mode == Mode::encrypted ||
                         job.mode == Mode::additive;
  if (ring_like && !job.window)
    throw ValidationError("run: mode requires an output window");

  Trace tr;
  tr.mode = job.mode;
  tr.Ts = job.plant.Ts;

  VectorXd xp = job.plant.xp0;

  VectorXd x_ideal;
  std::optional<QuantizedController> qc;
  std::optional<IntegerController> ic;
  std::optional<RingController> rc;
  std::optional<EncryptedController> ec;
  std::optional<ScaledOracle> oracle;
  SecretKey key;
  Backend be{job.backend_kind, job.params};
  CounterRng enc_rng(job.rng_seed);
  ActuatorCodec codec;

  switch (job.mode) {
    case Mode::ideal:
      x_ideal = job.given.x0;
      break;
    case Mode::quantized:
      qc = QuantizedController::make(job.given, job.sc);
      break;
    case Mode::integer_mode:
      ic = IntegerController::make(job.given, *job.conv, job.sc);
      break;
    case Mode::ring:
      ic = IntegerController::make(job.given, *job.conv, job.sc);
      rc = RingController::make(*ic, *job.window);
      oracle = ScaledOracle::make(*ic);
      break;
    case Mode::encrypted:
    case Mode::additive: {
      ic = IntegerController::make(job.given, *job.conv, job.sc);
      rc = RingController::make(*ic, *job.window);
      oracle = ScaledOracle::make(*ic);
      key = keygen(job.params, job.key_seed);
      CounterRng op_rng(job.op_seed);
      ec = encrypt_controller(*rc, key, be, op_rng,
                              job.mode == Mode::encrypted
                                  ? ParamMode::encrypted_params
                                  : ParamMode::plain_params);
      codec = ActuatorCodec{&key, be, *job.window, job.sc, job.rule};
      // absorb the measured initial-state encryption noise so the exact
      // replica shadows the decrypted state from step 0 on; without it the
      // small initial offset gets amplified by the (generally unstable)
      // integer state matrix
      {
        const IVec dec0 = decrypt_vec(ec->z, key, job.params);
        for (std::size_t i = 0; i < dec0.size(); ++i) {
          const Residue shadow_res = static_cast<Residue>(
              oracle->z[i].mod_pow2(job.params.q0).to_int64());
          const std::int64_t delta0 = centered_ring(
              (static_cast<Residue>(dec0[i]) - shadow_res) & job.params.mask(),
              job.params.q);
          oracle->z[i] += BigInt(delta0);
        }
      }
      break;
    }
  }

  for (int t = 0; t < job.horizon; ++t) {
    const double now = t * job.plant.Ts;
    const VectorXd y = job.plant.Cp * xp;
    const VectorXd r = job.ref.at(now);
    if (r.size() != job.given.nr())
      throw ConfigError("reference dimension mismatch");
    VectorXd u;

    switch (job.mode) {
      case Mode::ideal: {
        u = job.given.H * x_ideal + job.given.J * y + job.given.Q * r;
        x_ideal = job.given.F * x_ideal + job.given.G * y + job.given.P * r;
        break;
      }
      case Mode::quantized: {
        const IVec yb = quantize_signal(y, job.sc.r1());
        const IVec rb = quantize_signal(r, job.sc.r1());
        const IVec x_before = qc->x;
        const IVec ub = qc->step(yb, rb);
        u = recover_u(ub, job.sc);
        if (job.diagnostics) {
          const double r1s1 = job.sc.r1() * job.sc.s1();
          VectorXd xr(x_before.size()), xnext(qc->x.size());
          for (std::size_t i = 0; i < x_before.size(); ++i) {
            xr(i) = r1s1 * static_cast<double>(x_before[i]);
            xnext(i) = r1s1 * static_cast<double>(qc->x[i]);
          }
          const VectorXd ex =
              xnext - (job.given.F * xr + job.given.G * y + job.given.P * r);
          const VectorXd eu =
              u - (job.given.H * xr + job.given.J * y + job.given.Q * r);
          tr.ez_norm.push_back(inf_norm(ex));
          tr.eu_norm.push_back(inf_norm(eu));
        }
        break;
      }
      case Mode::integer_mode: {
        const IVec yb = quantize_signal(y, job.sc.r1());
        const IVec rb = quantize_signal(r, job.sc.r1());
        const IVec ub = ic->output(yb, rb);
        u = recover_u(ub, job.sc);
        const IVec ubp = requantize_output(ub, job.sc);
        if (job.diagnostics) {
          const auto& c = job.given;
          const auto& v = *job.conv;
          const double r1s1 = job.sc.r1() * job.sc.s1();
          const double r1s1s2 = r1s1 * job.sc.s2();
          VectorXd zr(ic->z.size());
          for (std::size_t i = 0; i < ic->z.size(); ++i)
            zr(i) = r1s1 * static_cast<double>(ic->z[i]);
          const IVec gy = matvec_checked(ic->Gp, yb);
          const IVec pr = matvec_checked(ic->Pp, rb);
          const IVec ru = matvec_checked(ic->Rb, ubp);
          VectorXd quant_drive(zr.size());
          for (Eigen::Index i = 0; i < quant_drive.size(); ++i)
            quant_drive(i) = r1s1 * static_cast<double>(gy[i] + pr[i] + ru[i]);
          VectorXd ub_real(ub.size());
          for (std::size_t i = 0; i < ub.size(); ++i)
            ub_real(i) = static_cast<double>(ub[i]);
          const VectorXd ez =
              quant_drive -
              ((v.T * c.G - v.R * c.J) * y + (v.T * c.P - v.R * c.Q) * r +
               v.R * (r1s1s2 * ub_real));
          const IVec hzv = matvec_checked(ic->Hb, ic->z);
          const IVec jyv = matvec_checked(ic->Jb, yb);
          const IVec qrv = matvec_checked(ic->Qb, rb);
          VectorXd hz(ub.size()), jy(ub.size()), qr(ub.size());
          for (std::size_t i = 0; i < ub.size(); ++i) {
            hz(i) = job.sc.s2() * r1s1 * static_cast<double>(hzv[i]);
            jy(i) = r1s1s2 * static_cast<double>(jyv[i]);
            qr(i) = r1s1s2 * static_cast<double>(qrv[i]);
          }
          const VectorXd eu = (u - r1s1s2 * ub_real) + (hz - v.Hp * zr) +
                              (jy - c.J * y) + (qr - c.Q * r);
          tr.ez_norm.push_back(inf_norm(ez));
          tr.eu_norm.push_back(inf_norm(eu));
        }
        ic->update(yb, rb, ubp);
        tr.u_prime.push_back(ubp);
        break;
      }
      case Mode::ring: {
        const IVec yb = quantize_signal(y, job.sc.r1());
        const IVec rb = quantize_signal(r, job.sc.r1());
        const RVec yres = scale_inputs_mod(yb, job.sc, rc->q);
        const RVec rres = scale_inputs_mod(rb, job.sc, rc->q);
        const RVec ures = rc->output(yres, rres);
        const RingDecode dec = ring_actuator(ures, rc->win, job.sc);
        u = dec.u_real;
        const auto ou = oracle->output(yb, rb);
        detail::check_window(ou, rc->win, t);
        tr.state_cut.push_back(
            detail::state_differs(rc->z, oracle->z, rc->q) ? 1 : 0);
        tr.window_margin.push_back(
            detail::window_margin_of(dec.u_window, rc->win));
        IVec feedback_raw(dec.u_prime.size());
        for (std::size_t i = 0; i < dec.u_prime.size(); ++i)
          feedback_raw[i] = checked_mul(dec.u_prime[i], job.sc.inv_L());
        oracle->update(yb, rb, feedback_raw);
        rc->update(yres, rres, dec.feedback);
        tr.u_window.push_back(dec.u_window);
        tr.u_prime.push_back(dec.u_prime);
        break;
      }
      case Mode::encrypted:
      case Mode::additive: {
        const IVec yb = quantize_signal(y, job.sc.r1());
        const IVec rb = quantize_signal(r, job.sc.r1());
        const auto yE = codec.encrypt_inputs(yb, enc_rng);
        const auto rE = codec.encrypt_inputs(rb, enc_rng);
        const IVec z_before = decrypt_vec(ec->z, key, job.params);
        const auto uE = ec->output(yE, rE);
        const IVec u_dec = decrypt_vec(uE, key, job.params);
        const ActuatorDecode dec = codec.decode(uE, enc_rng);
        u = dec.u_real;

        // measured injected error of the output stage
        const IVec delta2 =
            injected_output_error(*rc, job.sc, z_before, yb, rb, u_dec);

        // shadow system absorbing the measured errors
        const auto ou = oracle->output(yb, rb, &delta2);
        detail::check_window(ou, ec->win, t);
        tr.state_cut.push_back(
            detail::state_differs(detail::to_residues(z_before, rc->q),
                                  oracle->z, rc->q)
                ? 1
                : 0);
        tr.window_margin.push_back(
            detail::window_margin_of(dec.u_window, ec->win));

        ec->update(yE, rE, dec.reenc);
        const IVec z_after = decrypt_vec(ec->z, key, job.params);
        const IVec delta1 = injected_state_error(*rc, job.sc, z_before,
                                                 z_after, yb, rb,
                                                 dec.reenc_value);
        oracle->update(yb, rb, dec.reenc_value, &delta1);

        if (job.diagnostics) {
          tr.delta1_norm.push_back(detail::max_abs(delta1));
          tr.delta2_norm.push_back(detail::max_abs(delta2));
        }
        tr.u_window.push_back(dec.u_window);
        tr.u_prime.push_back(dec.reenc_value);
        break;
      }
    }

    tr.y.push_back(y);
    tr.u.push_back(u);
    tr.r.push_back(r);
    xp = integrate_zoh_rk4(job.plant, xp, u);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// bench preset: three-inertia plant with an observer + integrator controller

struct ThreeInertiaPreset {
  PlantLti plant;
  GivenController controller;
  std::vector<std::int64_t> kvec;  // pinned companion column for conversion
};

inline ThreeInertiaPreset three_inertia_preset() {
  const double Jm = 0.01, bf = 0.007, ks = 1.37;
  ThreeInertiaPreset p;
  MatrixXd Ap = MatrixXd::Zero(6, 6);
  Ap(0, 1) = 1;
  Ap(1, 0) = -ks / Jm;
  Ap(1, 1) = -bf / Jm;
  Ap(1, 2) = ks / Jm;
  Ap(2, 3) = 1;
  Ap(3, 0) = ks / Jm;
  Ap(3, 2) = -2 * ks / Jm;
  Ap(3, 3) = -bf / Jm;
  Ap(3, 4) = ks / Jm;
  Ap(4, 5) = 1;
  Ap(5, 2) = ks / Jm;
  Ap(5, 4) = -ks / Jm;
  Ap(5, 5) = -bf / Jm;
  MatrixXd Bp = MatrixXd::Zero(6, 1);
  Bp(1, 0) = 1.0 / Jm;
  MatrixXd Cp = MatrixXd::Zero(1, 6);
  Cp(0, 4) = 1;
  // the spring modes are fast against Ts; 100 substeps keep the intersample
  // integration three orders below the quantization floor
  p.plant = PlantLti{Ap, Bp, Cp, VectorXd::Zero(6), 0.05, 100};

  const auto [Ad, Bd] = discretize_zoh(p.plant);
  MatrixXd K(1, 6);
  K << -2.32, -0.25, 2.47, -0.04, -1.70, -0.12;
  const double Ki = 0.1;
  MatrixXd Lo(6, 1);
  Lo << 0.47, 4.07, -0.03, -6.80, 1.39, 6.21;

  GivenController& c = p.controller;
  c.F = MatrixXd::Zero(7, 7);
  c.F.topLeftCorner(6, 6) = Ad + Bd * K - Lo * Cp;
  c.F.topRightCorner(6, 1) = Bd * Ki;
  c.F.bottomLeftCorner(1, 6) = -Cp;
  c.F(6, 6) = 1;
  c.G = MatrixXd::Zero(7, 1);
  c.G.topRows(6) = Lo;
  c.P = MatrixXd::Zero(7, 1);
  c.P(6, 0) = 1;
  c.H = MatrixXd::Zero(1, 7);
  c.H.leftCols(6) = K;
  c.H(0, 6) = Ki;
  c.J = MatrixXd::Zero(1, 1);
  c.Q = MatrixXd::Zero(1, 1);
  c.x0 = VectorXd::Zero(7);

  p.kvec = {1, 0, 0, -1, 3, -3, 3};
  return p;
}

// Output range of the ideal run, for window sizing when no bounds are given
// in the configuration.  Flagged as an estimate by callers.
inline std::pair<VectorXd, VectorXd> estimate_output_range(const SimJob& base) {
  SimJob job = base;
  job.mode = Mode::ideal;
  const Trace tr = run_closed_loop(job);
  VectorXd lo = tr.u.front(), hi = tr.u.front();
  for (const auto& u : tr.u) {
    lo = lo.cwiseMin(u);
    hi = hi.cwiseMax(u);
  }
  return {lo, hi};
}

inline void fill_errors_vs_ideal(Trace& tr, const Trace& ideal) {
  const int n = std::min(tr.steps(), ideal.steps());
  tr.err_y.resize(n);
  tr.err_u.resize(n);
  for (int t = 0; t < n; ++t) {
    tr.err_y[t] = inf_norm(VectorXd(tr.y[t] - ideal.y[t]));
    tr.err_u[t] = inf_norm(VectorXd(tr.u[t] - ideal.u[t]));
  }
}

inline double max_err_y(const Trace& tr) {
  double m = 0;
  for (double e : tr.err_y) m = std::max(m, e);
  return m;
}

inline double max_err_u(const Trace& tr) {
  double m = 0;
  for (double e : tr.err_u) m = std::max(m, e);
  return m;
}

// Fan the requested modes out to parallel workers and join their traces with
// the error series computed against the ideal run.
inline std::vector<Trace> compare_modes(const SimJob& base,
                                        const std::vector<Mode>& modes) {
  std::vector<Trace> traces(modes.size());
  std::vector<std::string> errors(modes.size());
  std::vector<std::thread> workers;
  workers.reserve(modes.size());
  for (std::size_t i = 0; i < modes.size(); ++i) {
    workers.emplace_back([&, i] {
      try {
        SimJob job = base;
        job.mode = modes[i];
        traces[i] = run_closed_loop(job);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (std::size_t i = 0; i < modes.size(); ++i)
    if (!errors[i].empty())
      throw ValidationError(mode_name(modes[i]) + " run failed: " + errors[i]);
  SimJob ideal_job = base;
  ideal_job.mode = Mode::ideal;
  const Trace ideal = run_closed_loop(ideal_job);
  for (auto& tr : traces) fill_errors_vs_ideal(tr, ideal);
  return traces;
}

}  // namespace ectl
