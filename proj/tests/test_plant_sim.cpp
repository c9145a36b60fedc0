#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ectl/bounds.hpp"
#include "ectl/sim.hpp"
#include "test_util.hpp"

using namespace ectl;

namespace {

SimJob preset_job(Mode mode, int horizon) {
  const auto preset = three_inertia_preset();
  SimJob job;
  job.plant = preset.plant;
  job.given = preset.controller;
  ConvertOptions opt;
  opt.kvec = preset.kvec;
  job.conv = convert_controller(preset.controller, opt);
  job.mode = mode;
  job.horizon = horizon;
  VectorXd one(1);
  one << 1.0;
  job.ref = Reference::constant(one);
  job.sc.r1_exp = -15;
  job.sc.r2_exp = -15;
  job.sc.s1_exp = -19;
  job.sc.s2_exp = 0;
  job.sc.L_exp = -11;
  return job;
}

}  // namespace

TEST_CASE("zero-order-hold discretization") {
  // Ap = 0: Ad = I, Bd = Ts * Bp
  PlantLti still{MatrixXd::Zero(2, 2), MatrixXd::Ones(2, 1),
                 MatrixXd::Ones(1, 2), VectorXd::Zero(2), 0.25, 4};
  const auto [ad0, bd0] = discretize_zoh(still);
  CHECK(inf_norm(ad0 - MatrixXd::Identity(2, 2)) < 1e-14);
  CHECK(inf_norm(bd0 - 0.25 * MatrixXd::Ones(2, 1)) < 1e-14);

  // scalar: Ad = e^{a Ts}
  PlantLti scalar{MatrixXd::Constant(1, 1, -1.7), MatrixXd::Ones(1, 1),
                  MatrixXd::Ones(1, 1), VectorXd::Zero(1), 0.3, 4};
  const auto [ad1, bd1] = discretize_zoh(scalar);
  CHECK(ad1(0, 0) == doctest::Approx(std::exp(-1.7 * 0.3)).epsilon(1e-12));

  // bench plant against a long-double truncated series oracle
  const auto preset = three_inertia_preset();
  const auto [ad, bd] = discretize_zoh(preset.plant);
  const int n = 6;
  std::vector<long double> term(n * n, 0.0L), sum(n * n, 0.0L);
  for (int i = 0; i < n; ++i) term[i * n + i] = 1.0L;
  for (int i = 0; i < n * n; ++i) sum[i] = term[i];
  std::vector<long double> apl(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      apl[i * n + j] =
          static_cast<long double>(preset.plant.Ap(i, j)) * 0.05L;
  for (int k = 1; k <= 60; ++k) {
    std::vector<long double> next(n * n, 0.0L);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j)
          next[i * n + j] += term[i * n + l] * apl[l * n + j];
    for (int i = 0; i < n * n; ++i) term[i] = next[i] / k;
    for (int i = 0; i < n * n; ++i) sum[i] += term[i];
  }
  double worst = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      worst = std::max(worst,
                       std::abs(ad(i, j) - static_cast<double>(sum[i * n + j])));
  CHECK(worst < 1e-10);
}

TEST_CASE("RK4 intersample integration converges") {
  // halving the substep size on the bench plant moves the output by < 1e-8
  const auto preset = three_inertia_preset();
  PlantLti coarse = preset.plant;
  PlantLti fine = preset.plant;
  fine.substeps = 2 * coarse.substeps;
  VectorXd x = VectorXd::Zero(6);
  x(0) = 0.3;
  VectorXd u(1);
  u << 0.7;
  VectorXd xc = x, xf = x;
  double worst_y = 0;
  for (int t = 0; t < 40; ++t) {
    xc = integrate_zoh_rk4(coarse, xc, u);
    xf = integrate_zoh_rk4(fine, xf, u);
    worst_y = std::max(
        worst_y, inf_norm(VectorXd(preset.plant.Cp * (xc - xf))));
  }
  CHECK(worst_y < 1e-8);
}

TEST_CASE("zero plant, zero reference, zero state stays identically zero") {
  SimJob job;
  job.plant = PlantLti{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1),
                       MatrixXd::Zero(1, 2), VectorXd::Zero(2), 0.1, 4};
  job.given = build_pid(1.0, 0.2, 0.0, 0.1, 2);
  // PID has no reference port; give the run an empty reference
  job.ref = Reference::constant(VectorXd(0));
  job.mode = Mode::ideal;
  job.horizon = 50;
  const Trace tr = run_closed_loop(job);
  for (const auto& y : tr.y) CHECK(inf_norm(y) == 0.0);
  for (const auto& u : tr.u) CHECK(inf_norm(u) == 0.0);
}

TEST_CASE("ideal bench run tracks the reference") {
  SimJob job = preset_job(Mode::ideal, 400);
  const Trace tr = run_closed_loop(job);
  // design goal: output settles onto r = 1; threshold well before 15 s
  for (int t = 300; t < tr.steps(); ++t)
    CHECK(std::abs(tr.y[t](0) - 1.0) <= 0.01);
  // and the ideal run is independent of the scale configuration
  SimJob other = preset_job(Mode::ideal, 400);
  other.sc.r1_exp = -9;
  other.sc.s1_exp = -7;
  const Trace tr2 = run_closed_loop(other);
  for (int t = 0; t < tr.steps(); ++t) {
    CHECK(inf_norm(VectorXd(tr.y[t] - tr2.y[t])) == 0.0);
    CHECK(inf_norm(VectorXd(tr.u[t] - tr2.u[t])) == 0.0);
  }
}

TEST_CASE("bound evaluators match hand evaluations") {
  NormsCache n;
  n.GP_norm = 2.0;
  n.JQ_norm = 1.0;
  n.S_norm = 1.0;
  n.T_norm = 1.0;
  n.Tp_norm = 2.0;
  n.R_norm = 1.0;
  n.p = 1;
  n.nr = 1;
  n.m = 1;
  n.n_prime = 2;

  // alpha'(1,1,1) with ||[G,P]|| = 2, ||[J,Q]|| = 1: max(1.5, 1.0)
  CHECK(eval_alpha_prime(1, 1, 1, n) == doctest::Approx(1.5));
  CHECK(eval_alpha_prime(0, 0, 1, n) == 0.0);
  // monotone in each argument
  CHECK(eval_alpha_prime(2, 1, 1, n) >= eval_alpha_prime(1, 1, 1, n));
  CHECK(eval_alpha_prime(1, 2, 1, n) >= eval_alpha_prime(1, 1, 1, n));
  CHECK(eval_alpha_prime(1, 1, 2, n) >= eval_alpha_prime(1, 1, 1, n));

  // theta = eta / max(1, ||T'||(1 + ||R||)) = eta / 4
  CHECK(eval_theta(1.0, n) == doctest::Approx(0.25));
  NormsCache tiny = n;
  tiny.Tp_norm = 0.0;
  CHECK(eval_theta(0.7, tiny) == doctest::Approx(0.7));
  CHECK(eval_theta(0.7, n) <= 0.7);

  // beta_z hand case: l2 = 3, M + eps = 1, r1 = r2 = s1 = 1
  NormsCache bn = n;
  bn.p = 1;
  bn.nr = 1;
  bn.m = 1;
  CHECK(eval_beta_z(1.0, 1, 1, 1, bn) == doctest::Approx(3.5));
  // full display at unit arguments: max(beta_z, beta_u, r1 s1 / 2)
  const double bz = eval_beta_z(1.0, 1, 1, 1, bn);
  const double bu = eval_beta_u(1.0, 1, 1, 1, bn);
  CHECK(eval_beta(1, 1, 1, 1, 0.5, 0.5, bn) ==
        doctest::Approx(std::max({bz, bu, 0.5})));
}

TEST_CASE("gamma collapses to beta without the headroom scale") {
  NormsCache n;
  n.S_norm = 3.0;
  n.GP_norm = 1.0;
  n.JQ_norm = 0.5;
  n.T_norm = 2.0;
  n.Tp_norm = 1.0;
  n.R_norm = 1.0;
  n.p = 2;
  n.nr = 1;
  n.m = 1;
  n.n_prime = 4;
  Backend be{BackendKind::lwe, desk_params()};
  CounterRng rng(41);
  for (int i = 0; i < 200; ++i) {
    const double r1 = std::ldexp(1.0, -static_cast<int>(rng.next_u64() % 16));
    const double r2 = std::ldexp(1.0, -static_cast<int>(rng.next_u64() % 16));
    const double s1 = std::ldexp(1.0, -static_cast<int>(rng.next_u64() % 16));
    const double s2 = std::ldexp(1.0, -static_cast<int>(rng.next_u64() % 16));
    const double M = 1.0 + rng.next_unit() * 10;
    CHECK(eval_gamma(0.0, r1, r2, s1, s2, be, M, 0.1, n) ==
          eval_beta(r1, r2, s1, s2, M, 0.1, n));
    // gamma exceeds beta once noise is in play (lwe backend)
    CHECK(eval_gamma(0.5, r1, r2, s1, s2, be, M, 0.1, n) >=
          eval_beta(r1, r2, s1, s2, M, 0.1, n));
  }
  // vanishing at the origin
  CHECK(eval_gamma(0, 0, 0, 0, 0, be, 1.0, 0.1, n) == 0.0);
  // monotone nondecreasing in each scale argument
  for (int i = 0; i < 200; ++i) {
    const double base[5] = {std::ldexp(1.0, -static_cast<int>(rng.next_u64() % 12)),
                            std::ldexp(1.0, -static_cast<int>(rng.next_u64() % 12)),
                            std::ldexp(1.0, -static_cast<int>(rng.next_u64() % 12)),
                            std::ldexp(1.0, -static_cast<int>(rng.next_u64() % 12)),
                            std::ldexp(1.0, -static_cast<int>(rng.next_u64() % 12))};
    const double g0 = eval_gamma(base[0], base[1], base[2], base[3], base[4],
                                 be, 2.0, 0.1, n);
    for (int arg = 0; arg < 5; ++arg) {
      double bumped[5];
      std::copy(base, base + 5, bumped);
      bumped[arg] *= 2;
      CHECK(eval_gamma(bumped[0], bumped[1], bumped[2], bumped[3], bumped[4],
                       be, 2.0, 0.1, n) >= g0);
    }
  }
  // the crypto term is linear in L: halving L halves the noise part
  const double g1 = eval_gamma(0.5, 0.25, 0.25, 0.125, 1, be, 1, 0.1, n) -
                    eval_beta(0.25, 0.25, 0.125, 1, 1, 0.1, n);
  const double g2 = eval_gamma(0.25, 0.25, 0.25, 0.125, 1, be, 1, 0.1, n) -
                    eval_beta(0.25, 0.25, 0.125, 1, 1, 0.1, n);
  CHECK(g2 == doctest::Approx(g1 / 2));
}

TEST_CASE("parameter designer finds a feasible headroom scale") {
  // small well-scaled controller: the full design pipeline succeeds
  CounterRng rng(40);
  const auto loop = testutil::random_closed_loop(rng, {2, 1, 1, 1}, 2);
  const auto conv = convert_controller(loop.ctl);

  BoundInputs bi;
  bi.norms = NormsCache::make(loop.ctl, conv);
  bi.M = 2.0;
  bi.eps = 0.1;
  bi.eta = 0.05;

  DesignTarget tgt;
  tgt.r1p_exp = -6;
  tgt.r2p_exp = -6;
  tgt.s1p_exp = -6;
  REQUIRE(eval_alpha_prime(std::ldexp(1.0, tgt.r1p_exp),
                           std::ldexp(1.0, tgt.r2p_exp),
                           std::ldexp(1.0, tgt.s1p_exp), bi.norms) <= bi.eta);

  VectorXd lo(1), hi(1);
  lo << -1.0;
  hi << 1.0;

  // zero-error backend: the search terminates (beta vanishes at the origin)
  Backend debug{BackendKind::debug, paper_params()};
  const ScaleSet sc_dbg = design_parameters(tgt, bi, debug, lo, hi);
  CHECK(eval_gamma(sc_dbg.L(), sc_dbg.r1(), sc_dbg.r2(), sc_dbg.s1(),
                   sc_dbg.s2(), debug, bi.M, bi.eps, bi.norms) <=
        eval_theta(bi.eta, bi.norms));

  // lwe backend with a fine gadget base, so the multiplication-noise bound
  // leaves designable headroom under the 2^48 modulus
  Backend lwe{BackendKind::lwe, setup(48, 4, 64, 1.0, 6)};
  const ScaleSet sc = design_parameters(tgt, bi, lwe, lo, hi);
  CHECK(eval_gamma(sc.L(), sc.r1(), sc.r2(), sc.s1(), sc.s2(), lwe, bi.M,
                   bi.eps, bi.norms) <= eval_theta(bi.eta, bi.norms));
  const OutputWindow w = size_window(lo, hi, bi.eps, sc);
  CHECK(w.q <= lwe.params.q);

  // infeasible reference set is rejected up front
  BoundInputs bad = bi;
  bad.eta = 1e-12;
  CHECK_THROWS_AS(design_parameters(tgt, bad, lwe, lo, hi), ValidationError);

  // the bench controller with honest worst-case margins needs more modulus
  // than the profile offers; the search reports that instead of looping
  const auto preset = three_inertia_preset();
  ConvertOptions opt;
  opt.kvec = preset.kvec;
  const auto pconv = convert_controller(preset.controller, opt);
  BoundInputs pbi;
  pbi.norms = NormsCache::make(preset.controller, pconv);
  pbi.M = 12.0;
  pbi.eps = 0.05;
  pbi.eta = 0.02;
  DesignTarget ptgt;
  ptgt.r1p_exp = -12;
  ptgt.r2p_exp = -12;
  ptgt.s1p_exp = -12;
  VectorXd plo(1), phi(1);
  plo << -0.1;
  phi << 0.2;
  CHECK_THROWS_WITH_AS(design_parameters(ptgt, pbi, lwe, plo, phi),
                       doctest::Contains("crypto modulus"), ValidationError);
}

TEST_CASE("logged perturbations stay under the evaluated bounds") {
  // integer mode on the bench preset: ||e_z||, ||e_u|| vs beta components
  SimJob job = preset_job(Mode::integer_mode, 300);
  const Trace tr = run_closed_loop(job);
  const NormsCache norms = NormsCache::make(job.given, *job.conv);

  // estimate M from the ideal sweep (y, r, controller state, u)
  SimJob ideal = preset_job(Mode::ideal, 300);
  const Trace tri = run_closed_loop(ideal);
  double m_est = 0;
  for (int t = 0; t < tri.steps(); ++t) {
    m_est = std::max(m_est, inf_norm(tri.y[t]));
    m_est = std::max(m_est, inf_norm(tri.u[t]));
    m_est = std::max(m_est, inf_norm(tri.r[t]));
  }
  m_est = std::max(m_est, 10.0);  // controller state headroom
  const double eps = 0.05;

  const double bz = eval_beta_z(m_est + eps, job.sc.r1(), job.sc.r2(),
                                job.sc.s1(), norms);
  const double bu = eval_beta_u(norms.T_norm * (m_est + eps), job.sc.r1(),
                                job.sc.r2(), job.sc.s2(), norms);
  REQUIRE(static_cast<int>(tr.ez_norm.size()) == tr.steps());
  for (int t = 0; t < tr.steps(); ++t) {
    CHECK(tr.ez_norm[t] <= bz);
    CHECK(tr.eu_norm[t] <= bu);
  }
}

TEST_CASE("injected-error diagnostics stay under gamma1/gamma2") {
  // desk-scale encrypted run with a finer gadget so the bound is meaningful
  CounterRng rng(42);
  const auto loop = testutil::random_closed_loop(rng, {3, 1, 1, 1});
  const auto conv = convert_controller(loop.ctl);
  ScaleSet sc;
  sc.r1_exp = -8;
  sc.r2_exp = -8;
  sc.s1_exp = -5;
  sc.s2_exp = -5;
  sc.L_exp = -2;
  const LweParams params = setup(24, 8, 32, 1.0, 6);
  OutputWindow win = testutil::window_from_dry_run(loop, conv, sc, 200);
  win.q = params.q;

  SimJob job;
  // wrap the discrete loop in a continuous stand-in: x+ = Ap x + Bp u is
  // emulated by a fast-sampling integrator only for this diagnostic check,
  // so run the discrete loop directly against the controller pieces instead
  IntegerController ic = IntegerController::make(loop.ctl, conv, sc);
  RingController rc = RingController::make(ic, win);
  const SecretKey key = keygen(params, 5);
  const Backend be{BackendKind::lwe, params};
  CounterRng op_rng(6);
  EncryptedController ec = encrypt_controller(rc, key, be, op_rng);
  ActuatorCodec codec{&key, be, win, sc, ReencRule::paper};
  CounterRng enc_rng(7);

  const NormsCache norms = NormsCache::make(loop.ctl, conv);
  const double g1 = eval_gamma1(sc.s1(), params, norms, params.delta_enc,
                                params.delta_mult);
  const double g2 = eval_gamma2(sc.s1(), sc.s2(), norms, params.delta_enc,
                                params.delta_mult);

  VectorXd xp = loop.xp0;
  const IVec rb = quantize_signal(loop.r_const, sc.r1());
  for (int t = 0; t < 200; ++t) {
    const IVec yb = quantize_signal(loop.Cp * xp, sc.r1());
    const auto yE = codec.encrypt_inputs(yb, enc_rng);
    const auto rE = codec.encrypt_inputs(rb, enc_rng);
    const IVec z_before = decrypt_vec(ec.z, key, params);
    const auto uE = ec.output(yE, rE);
    const IVec u_dec = decrypt_vec(uE, key, params);
    const ActuatorDecode dec = codec.decode(uE, enc_rng);
    ec.update(yE, rE, dec.reenc);
    const IVec z_after = decrypt_vec(ec.z, key, params);
    const auto [d1, d2] = injected_error_norms(rc, sc, z_before, z_after, yb,
                                               rb, dec.reenc_value, u_dec);
    CHECK(d1 <= g1);
    CHECK(d2 <= g2);
    xp = loop.Ap * xp + loop.Bp * dec.u_real;
  }
}

TEST_CASE("comparison harness joins error series against the ideal run") {
  SimJob job = preset_job(Mode::ideal, 120);
  // common scales both recursions hold in working width (the pre-conversion
  // path needs a fine s2; the converted path tolerates it)
  job.sc.r1_exp = -15;
  job.sc.r2_exp = -15;
  job.sc.s1_exp = -19;
  job.sc.s2_exp = -12;
  job.sc.L_exp = -11;
  const auto traces = compare_modes(job, {Mode::quantized, Mode::integer_mode});
  REQUIRE(traces.size() == 2);
  for (const auto& tr : traces) {
    REQUIRE(static_cast<int>(tr.err_y.size()) == 120);
    CHECK(max_err_y(tr) < 0.01);
    CHECK(max_err_u(tr) < 0.01);
  }
}
