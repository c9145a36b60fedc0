// Closed-loop error-budget evaluators and the parameter designer.
//
// All bounds are literal evaluations of the analysis:
//   alpha'(r1,r2,s1)          quantized-controller perturbation size
//   theta(eps)                margin transported through the conversion,
//                             eta(eps) / max(1, ||T'||(1+||R||))
//   beta(r1,r2,s1,s2)         converted-integer perturbation size, from
//                             beta_z, beta_u and the initial-state term
//   gamma(L,r1,r2,s1,s2)      beta plus the encryption-noise terms
//                             L*r1*s1*gamma1, L*r1*s1*s2*gamma2,
//                             L*r1*s1*delta_enc
// gamma(0, .) == beta(.), so the injected-error contribution can be pushed
// below any margin by growing 1/L.  The designer picks r1, r2 from the
// reference parameter set, then doubles 1/L = 1/s1 = 1/s2 jointly until
// gamma fits under theta(eps).

#pragma once

#include <cmath>

#include "ectl/common.hpp"
#include "ectl/convert.hpp"
#include "ectl/quantize.hpp"
#include "ectl/zq_lwe.hpp"

namespace ectl {

struct NormsCache {
  double S_norm = 0;    // ||[TG - RJ, TP - RQ, R]||
  double GP_norm = 0;   // ||[G, P]||
  double JQ_norm = 0;   // ||[J, Q]||
  double T_norm = 0;
  double Tp_norm = 0;   // ||T'|| (right inverse)
  double R_norm = 0;
  int p = 0, nr = 0, m = 0, n_prime = 0;
  int l2() const { return p + nr + m; }

  static NormsCache make(const GivenController& c, const ConversionResult& v) {
    NormsCache n;
    n.S_norm = inf_norm(hcat(hcat(v.T * c.G - v.R * c.J, v.T * c.P - v.R * c.Q),
                             v.R));
    n.GP_norm = inf_norm(hcat(c.G, c.P));
    n.JQ_norm = inf_norm(hcat(c.J, c.Q));
    n.T_norm = inf_norm(v.T);
    n.Tp_norm = inf_norm(v.T_right_inv);
    n.R_norm = inf_norm(v.R);
    n.p = c.p();
    n.nr = c.nr();
    n.m = c.m();
    n.n_prime = v.n_obs;
    return n;
  }
};

struct BoundInputs {
  double M = 0;    // closed-loop signal bound ||[y'; r; x'; u']||
  double eps = 0;  // performance target
  double eta = 0;  // stability margin eta(eps)
  NormsCache norms;

  void validate() const {
    if (!(M > 0) || !(eps > 0) || !(eta > 0))
      throw ValidationError("BoundInputs: M, eps, eta must be positive");
  }
};

inline double eval_alpha_prime(double r1, double r2, double s1,
                               const NormsCache& n) {
  return std::max(0.5 * (r1 * s1 + n.GP_norm * r1),
                  0.5 * (r2 + n.JQ_norm * r1));
}

inline double eval_theta(double eta, const NormsCache& n) {
  if (!(eta > 0)) throw ValidationError("eval_theta: eta must be positive");
  return eta / std::max(1.0, n.Tp_norm * (1.0 + n.R_norm));
}

inline double eval_beta_z(double w_norm, double r1, double r2, double s1,
                          const NormsCache& n) {
  return 0.5 * n.l2() * w_norm * s1 + 0.5 * n.S_norm * r1 +
         0.25 * n.l2() * (r1 + r2) * s1;
}

inline double eval_beta_u(double z_norm, double r1, double r2, double s2,
                          const NormsCache& n) {
  return 0.5 * r2 + 0.5 * n.n_prime * z_norm * s2 + 0.5 * n.JQ_norm * r1;
}

inline double eval_beta(double r1, double r2, double s1, double s2, double M,
                        double eps, const NormsCache& n) {
  const double bz = eval_beta_z(M + eps, r1, r2, s1, n);
  const double bu = eval_beta_u(n.T_norm * (M + eps), r1, r2, s2, n);
  return std::max({bz, bu, 0.5 * r1 * s1});
}

inline double eval_gamma1(double s1, const LweParams& p, const NormsCache& n,
                          double delta_enc, double delta_mult) {
  (void)p;
  return (n.S_norm / s1 + 0.5 * n.l2()) * delta_enc +
         (n.n_prime + n.l2()) * delta_mult;
}

inline double eval_gamma2(double s1, double s2, const NormsCache& n,
                          double delta_enc, double delta_mult) {
  return n.JQ_norm / (s1 * s2) * delta_enc +
         (n.n_prime + n.p + n.nr) * delta_mult;
}

inline double eval_gamma(double L, double r1, double r2, double s1, double s2,
                         const Backend& be, double M, double eps,
                         const NormsCache& n) {
  const double beta = eval_beta(r1, r2, s1, s2, M, eps, n);
  if (L == 0) return beta;
  const double de = be.delta_enc();
  const double dm = be.delta_mult();
  const double g1 = eval_gamma1(s1, be.params, n, de, dm);
  const double g2 = eval_gamma2(s1, s2, n, de, dm);
  const double noise =
      std::max({L * r1 * s1 * g1, L * r1 * s1 * s2 * g2, L * r1 * s1 * de});
  return beta + noise;
}

// Parameter design: given a reference set {r1', r2', s1'} that already meets
// alpha' <= eta, fix r1, r2 one power of two beyond the transported margin
// requirement and search the joint headroom scale.
struct DesignTarget {
  int r1p_exp = 0;
  int r2p_exp = 0;
  int s1p_exp = 0;
};

inline ScaleSet design_parameters(const DesignTarget& tgt, const BoundInputs& bi,
                                  const Backend& be,
                                  const VectorXd& u_min_real,
                                  const VectorXd& u_max_real) {
  bi.validate();
  const NormsCache& n = bi.norms;
  const double r1p = std::ldexp(1.0, tgt.r1p_exp);
  const double r2p = std::ldexp(1.0, tgt.r2p_exp);
  const double s1p = std::ldexp(1.0, tgt.s1p_exp);
  if (eval_alpha_prime(r1p, r2p, s1p, n) > bi.eta)
    throw ValidationError(
        "design_parameters: reference set violates alpha' <= eta");

  const double amp = std::max(1.0, n.Tp_norm * (1.0 + n.R_norm));
  const double inv_r1_min = amp * std::max(n.S_norm, n.JQ_norm) /
                            std::max(n.GP_norm, n.JQ_norm) / r1p;
  const double inv_r2_min = amp / r2p;
  // next power of two strictly above the requirement
  auto strict_exp = [](double x) {
    int e = ceil_log2(x);
    if (std::ldexp(1.0, e) <= x) ++e;
    return e;
  };
  ScaleSet sc;
  sc.r1_exp = -strict_exp(inv_r1_min);
  sc.r2_exp = -strict_exp(inv_r2_min);

  const double theta = eval_theta(bi.eta, n);
  for (int l_exp = 0; l_exp >= -60; --l_exp) {
    sc.s1_exp = l_exp;
    sc.s2_exp = l_exp;
    sc.L_exp = l_exp;
    const double l = std::ldexp(1.0, l_exp);
    if (eval_gamma(l, sc.r1(), sc.r2(), l, l, be, bi.M, bi.eps, n) <= theta) {
      OutputWindow w;
      try {
        w = size_window(u_min_real, u_max_real, bi.eps, sc);
      } catch (const ValidationError&) {
        throw ValidationError(
            "design_parameters: required window exceeds the crypto modulus");
      }
      if (w.q > be.params.q)
        throw ValidationError(
            "design_parameters: required window exceeds the crypto modulus");
      return sc;
    }
  }
  throw ValidationError("design_parameters: no feasible headroom scale found");
}

}  // namespace ectl
