#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "ectl/convert.hpp"
#include "ectl/sim.hpp"
#include "test_util.hpp"

using namespace ectl;
using testutil::ControllerDims;

TEST_CASE("observable decomposition splits off the unreachable part") {
  CounterRng rng(21);

  // fully observable pair: identity coordinates are kept
  const auto ctl = testutil::random_controller(rng, {4, 1, 1, 1});
  const auto dec = observable_decomposition(ctl.F, ctl.H);
  CHECK(dec.n_obs == 4);
  CHECK(inf_norm(dec.F11 * dec.W1 - dec.W1 * ctl.F) < 1e-12);
  CHECK(inf_norm(dec.H1 * dec.W1 - ctl.H) < 1e-12);

  // block construction with a 2x2 part invisible from the output
  const MatrixXd fo = testutil::random_stable_matrix(rng, 2, 0.7);
  const MatrixXd fu = testutil::random_stable_matrix(rng, 2, 0.7);
  MatrixXd f = MatrixXd::Zero(4, 4);
  f.topLeftCorner(2, 2) = fo;
  f.bottomLeftCorner(2, 2) = testutil::random_matrix(rng, 2, 2, 0.5);
  f.bottomRightCorner(2, 2) = fu;
  MatrixXd h = MatrixXd::Zero(1, 4);
  h(0, 0) = 1.0;
  h(0, 1) = -0.5;
  const auto dec2 = observable_decomposition(f, h);
  CHECK(dec2.n_obs == 2);
  CHECK(inf_norm(dec2.F11 * dec2.W1 - dec2.W1 * f) < 1e-10);
  CHECK(inf_norm(dec2.H1 * dec2.W1 - h) < 1e-10);

  // nothing observable
  const auto dec3 = observable_decomposition(f, MatrixXd::Zero(1, 4));
  CHECK(dec3.n_obs == 0);
  GivenController hopeless = testutil::random_controller(rng, {3, 1, 1, 1});
  hopeless.H = MatrixXd::Zero(1, 3);
  CHECK_THROWS_WITH_AS(convert_controller(hopeless),
                       doctest::Contains("no observable part"),
                       ValidationError);

  // singular values straddling the cutoff are refused, not silently ranked
  MatrixXd f4 = MatrixXd::Zero(2, 2);
  f4(0, 0) = 0.5;
  f4(1, 1) = 0.6;  // distinct modes, one barely visible
  MatrixXd h4(1, 2);
  h4 << 1.0, 2e-8;  // observability matrix singular value lands near tol
  CHECK_THROWS_WITH_AS(observable_decomposition(f4, h4),
                       doctest::Contains("ambiguous"), ValidationError);
}

TEST_CASE("integer pole placement, single output (Ackermann route)") {
  // hand case: F = [[0, 1], [-0.5, 1.2]], H = [1, 0], deadbeat targets
  MatrixXd f(2, 2);
  f << 0, 1, -0.5, 1.2;
  MatrixXd h(1, 2);
  h << 1, 0;
  const std::vector<GaussInt> deadbeat{{0, 0}, {0, 0}};
  const MatrixXd r = integer_pole_placement(f, h, deadbeat);
  const MatrixXd placed = f - r * h;
  const auto cp = char_poly(placed);  // want z^2 exactly
  CHECK(std::abs(cp[0]) < 1e-12);
  CHECK(std::abs(cp[1]) < 1e-12);

  // already-integer spectrum with matching targets needs no feedback
  MatrixXd fi(2, 2);
  fi << 1, 1, 0, -2;
  const MatrixXd r0 = integer_pole_placement(fi, h, {{1, 0}, {-2, 0}});
  CHECK(inf_norm(r0) == 0.0);

  // violated preconditions
  CHECK_THROWS_AS(integer_pole_placement(f, MatrixXd::Zero(1, 2), deadbeat),
                  ValidationError);
  CHECK_THROWS_AS(integer_pole_placement(f, h, {{0, 1}, {0, 1}}),
                  ValidationError);  // not conjugate closed
}

TEST_CASE("integer pole placement, multi output (Sylvester route)") {
  CounterRng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ctl = testutil::random_controller(rng, {4, 2, 1, 2});
    const std::vector<GaussInt> targets{{0, 0}, {1, 0}, {0, 1}, {0, -1}};
    const MatrixXd r1 = integer_pole_placement(ctl.F, ctl.H, targets);
    const auto eig = eigenvalues(ctl.F - r1 * ctl.H);
    int hits = 0;
    for (const auto& t : targets) {
      for (const auto& l : eig) {
        if (std::abs(l.real() - t.re) < 1e-6 &&
            std::abs(l.imag() - t.im) < 1e-6) {
          ++hits;
          break;
        }
      }
    }
    CHECK(hits == 4);
  }
}

TEST_CASE("modal integerization recovers integer block structure") {
  CounterRng rng(23);

  // eigenvalues 1 +- 2i hidden behind a random similarity
  for (int trial = 0; trial < 25; ++trial) {
    MatrixXd block(2, 2);
    block << 1, 2, -2, 1;
    const MatrixXd s = testutil::random_stable_matrix(rng, 2, 0.9) +
                       2.0 * MatrixXd::Identity(2, 2);
    const MatrixXd a =
        s * block * s.partialPivLu().solve(MatrixXd::Identity(2, 2));
    const ModalResult m = modal_integerize(a, 1e-8);
    CHECK(m.modal(0, 0) == 1);
    CHECK(m.modal(0, 1) == 2);
    CHECK(m.modal(1, 0) == -2);
    CHECK(m.modal(1, 1) == 1);
    const MatrixXd tinv = m.T.partialPivLu().solve(MatrixXd::Identity(2, 2));
    CHECK(inf_norm(m.T * a * tinv - to_real(m.modal)) < 1e-8);
  }

  // integer diagonal input is already modal
  MatrixXd d = MatrixXd::Zero(3, 3);
  d(0, 0) = 2;
  d(1, 1) = -1;
  d(2, 2) = 2;
  const ModalResult md = modal_integerize(d, 1e-9);
  CHECK(charpoly_int(md.modal) == charpoly_int(round_to_int(d)));

  // non-integer eigenvalue rejected with the offender named
  MatrixXd bad = MatrixXd::Identity(2, 2) * 0.5;
  CHECK_THROWS_WITH_AS(modal_integerize(bad, 1e-9),
                       doctest::Contains("not a Gaussian integer"),
                       ValidationError);
}

TEST_CASE("conversion satisfies the exact-similarity identities") {
  CounterRng rng(24);
  for (int trial = 0; trial < 60; ++trial) {
    ControllerDims dims;
    dims.n = 2 + static_cast<int>(rng.next_u64() % 7);  // 2..8
    dims.p = 1 + static_cast<int>(rng.next_u64() % 2);
    dims.nr = 1;
    dims.m = 1 + static_cast<int>(rng.next_u64() % 2);
    const auto ctl = testutil::random_controller(rng, dims);
    const auto conv = convert_controller(ctl);
    CHECK(conv.residual_dynamics <= 1e-9);
    CHECK(conv.residual_output <= 1e-9);
    CHECK(conv.n_obs == dims.n);
    // characteristic polynomial of F' matches the target exactly
    CHECK(charpoly_int(conv.Fp) == conv.target_charpoly);
    // rank(T) = n_obs
    Eigen::JacobiSVD<MatrixXd> svd(conv.T);
    CHECK(svd.singularValues()(conv.n_obs - 1) >
          1e-9 * svd.singularValues()(0));
    // right inverse
    CHECK(inf_norm(conv.T * conv.T_right_inv -
                   MatrixXd::Identity(conv.n_obs, conv.n_obs)) < 1e-9);
    if (dims.m == 1) {
      // canonical route: integer output row, so s2 = 1 is admissible
      CHECK(conv.Hp(0, conv.n_obs - 1) == 1.0);
      if (conv.n_obs > 1)
        CHECK(inf_norm(conv.Hp.leftCols(conv.n_obs - 1)) == 0.0);
    }
  }
}

TEST_CASE("already-integer state matrices convert trivially") {
  const GivenController fir = build_fir({0.5, 0.25, 1.0});
  const auto conv = convert_controller(fir);
  CHECK(conv.residual_dynamics < 1e-12);
  CHECK(inf_norm(conv.R) < 1e-9);  // R = 0 admissible, nothing to move
}

TEST_CASE("input-output equivalence of the converted controller") {
  // driving the converted realization with its own output fed back
  // reproduces the given controller's output in real arithmetic
  CounterRng rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    ControllerDims dims;
    dims.n = 2 + static_cast<int>(rng.next_u64() % 5);
    const auto ctl = testutil::random_controller(rng, dims);
    const auto conv = convert_controller(ctl);

    VectorXd x = ctl.x0;
    VectorXd z = conv.T * ctl.x0;
    double worst = 0;
    for (int t = 0; t < 500; ++t) {
      const VectorXd y = testutil::random_matrix(rng, ctl.p(), 1, 0.5).col(0);
      const VectorXd r = testutil::random_matrix(rng, ctl.nr(), 1, 0.5).col(0);
      const VectorXd u_given = ctl.H * x + ctl.J * y + ctl.Q * r;
      const VectorXd u_conv = conv.Hp * z + ctl.J * y + ctl.Q * r;
      worst = std::max(worst, inf_norm(VectorXd(u_given - u_conv)));
      x = ctl.F * x + ctl.G * y + ctl.P * r;
      z = to_real(conv.Fp) * z + (conv.T * ctl.G - conv.R * ctl.J) * y +
          (conv.T * ctl.P - conv.R * ctl.Q) * r + conv.R * u_conv;
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("bench preset conversion reproduces the pinned companion column") {
  const auto preset = three_inertia_preset();
  ConvertOptions opt;
  opt.kvec = preset.kvec;
  const auto conv = convert_controller(preset.controller, opt);
  CHECK(conv.n_obs == 7);
  CHECK(conv.kvec == std::vector<std::int64_t>{1, 0, 0, -1, 3, -3, 3});
  // det(zI - F') = z^7 - 3 z^6 + 3 z^5 - 3 z^4 + z^3 - 1
  CHECK(charpoly_int(conv.Fp) ==
        std::vector<std::int64_t>{-1, 0, 0, 1, -3, 3, -3});
  CHECK(conv.residual_dynamics < 1e-9);
  CHECK(conv.residual_output < 1e-9);

  const auto& c = preset.controller;
  const MatrixXd S = hcat(
      hcat(conv.T * c.G - conv.R * c.J, conv.T * c.P - conv.R * c.Q), conv.R);
  // entries determined by the printed gains alone reproduce the reference
  // values; discretization-sensitive entries are handled in the acceptance
  // suite with the full reference matrix
  CHECK(S(6, 0) == doctest::Approx(-5.0182).epsilon(1e-4));
  CHECK(std::abs(S(0, 1) - 0.0108) < 5e-4);
  CHECK(std::abs(S(0, 2) - (-0.9931)) < 5e-4);
  CHECK(std::abs(S(6, 1) - 0.1000) < 5e-4);
  CHECK(std::abs(S(6, 2) - (-0.1886)) < 5e-4);

  // the default rule rounds the characteristic coefficients instead
  const auto conv_def = convert_controller(preset.controller);
  CHECK(conv_def.kvec == std::vector<std::int64_t>{0, 0, 0, -1, 3, -3, 3});
}

TEST_CASE("output pruning drops feedback columns while keeping the identities") {
  CounterRng rng(28);
  for (int trial = 0; trial < 10; ++trial) {
    // both outputs see the whole state, so one column suffices
    const auto ctl = testutil::random_controller(rng, {3, 1, 1, 2});
    ConvertOptions opt;
    opt.prune_outputs = true;
    const auto conv = convert_controller(ctl, opt);
    CHECK(conv.residual_dynamics <= 1e-9);
    CHECK(conv.residual_output <= 1e-9);
    // greedy elimination kept a single column; the other is exactly zero
    int zero_cols = 0;
    for (int c = 0; c < conv.R.cols(); ++c)
      if (inf_norm(MatrixXd(conv.R.col(c))) == 0.0) ++zero_cols;
    CHECK(zero_cols == 1);
  }
}

TEST_CASE("FIR realization") {
  // single coefficient: pure unit gain with no state
  const GivenController gain = build_fir({1.0});
  CHECK(gain.n() == 0);
  for (int k = 0; k < 8; ++k) {
    const std::complex<double> z = std::polar(1.0, 0.7 * k + 0.1);
    CHECK(std::abs(freq_response(gain, z)(0, 0) - 1.0) < 1e-12);
  }

  // general coefficients against the polynomial transfer function
  CounterRng rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> b(1 + rng.next_u64() % 6);
    for (auto& v : b) v = testutil::uniform(rng, -2.0, 2.0);
    const GivenController fir = build_fir(b);
    const int n = static_cast<int>(b.size()) - 1;
    for (int k = 0; k < 25; ++k) {
      const std::complex<double> z =
          std::polar(1.0, testutil::uniform(rng, 0.01, 6.2));
      std::complex<double> want = 0;
      for (int i = 0; i <= n; ++i) want += b[n - i] * std::pow(z, -i);
      CHECK(std::abs(freq_response(fir, z)(0, 0) - want) < 1e-9);
    }
  }
}

TEST_CASE("PID realization matches the parallel form on the unit circle") {
  // pure proportional corner case
  const GivenController prop = build_pid(1.0, 0.0, 0.0, 0.05, 5);
  CHECK(prop.H(0, 0) == 0.0);
  CHECK(prop.H(0, 1) == 0.0);
  CHECK(prop.J(0, 0) == 1.0);

  CHECK_THROWS_AS(build_pid(1.0, 0.5, 0.1, 0.05, 0), ValidationError);

  const double kp = 1.0, ki = 0.5, kd = 0.1, ts = 0.05;
  const int nd = 5;
  const GivenController pid = build_pid(kp, ki, kd, ts, nd);
  CounterRng rng(27);
  for (int k = 0; k < 100; ++k) {
    const std::complex<double> z =
        std::polar(1.0, testutil::uniform(rng, 0.01, 6.27));
    const std::complex<double> want =
        kp + ki * ts / (z - 1.0) + kd / (ts / nd + ts / (z - 1.0));
    CHECK(std::abs(freq_response(pid, z)(0, 0) - want) < 1e-9);
  }
}

TEST_CASE("scaled recursion without truncation blows up") {
  // stable state matrix (shift register), nonzero constant input
  const GivenController fir = build_fir({0.5, 0.25, 1.0});
  ScaleSet sc;
  sc.r1_exp = -8;
  sc.s1_exp = -1;  // 1/s1 = 2
  VectorXd y(1), r(0);
  y << 1.0;

  const auto norms = divergent_demo(fir, sc, 50, y, r);
  REQUIRE(norms.size() == 51);
  // average growth over the tail must be at least geometric
  double factor = 0;
  int counted = 0;
  for (std::size_t i = 30; i + 1 < norms.size(); ++i) {
    if (norms[i] > 0) {
      factor += norms[i + 1] / norms[i];
      ++counted;
    }
  }
  CHECK(counted > 0);
  CHECK(factor / counted >= 1.5);

  // 1/s1 = 1: plain recursion, no growth mechanism
  ScaleSet flat = sc;
  flat.s1_exp = 0;
  const auto tame = divergent_demo(fir, flat, 50, y, r);
  CHECK(tame.back() < 1e7);

  // zero input from zero state stays identically zero
  VectorXd y0 = VectorXd::Zero(1);
  const auto silent = divergent_demo(fir, sc, 20, y0, r);
  for (double v : silent) CHECK(v == 0.0);
}
