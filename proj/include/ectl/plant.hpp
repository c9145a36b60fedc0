// Continuous-time LTI plant, zero-order-hold discretization and the RK4
// intersample integrator.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ectl/common.hpp"
#include "ectl/linalg.hpp"

namespace ectl {

struct PlantLti {
  MatrixXd Ap, Bp, Cp;
  VectorXd xp0;
  double Ts = 0;
  int substeps = 10;

  void validate() const {
    if (Ap.rows() != Ap.cols()) throw ValidationError("plant: Ap not square");
    if (Bp.rows() != Ap.rows() || Cp.cols() != Ap.cols())
      throw ValidationError("plant: B/C shape mismatch");
    if (xp0.size() != Ap.rows())
      throw ValidationError("plant: initial state size mismatch");
    if (!(Ts > 0)) throw ValidationError("plant: sampling period must be positive");
    if (substeps < 1) throw ValidationError("plant: substeps must be >= 1");
  }
};

// Ad = exp(Ap*Ts), Bd = int_0^Ts exp(Ap*tau) dtau * Bp, via the augmented
// matrix [[Ap, Bp], [0, 0]] whose exponential stacks both blocks.
inline std::pair<MatrixXd, MatrixXd> discretize_zoh(const PlantLti& plant) {
  plant.validate();
  const int n = static_cast<int>(plant.Ap.rows());
  const int m = static_cast<int>(plant.Bp.cols());
  MatrixXd aug = MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = plant.Ap * plant.Ts;
  aug.topRightCorner(n, m) = plant.Bp * plant.Ts;
  const MatrixXd phi = aug.exp();
  if (!phi.allFinite())
    throw ValidationError("discretize_zoh: non-finite matrix exponential");
  return {phi.topLeftCorner(n, n), phi.topRightCorner(n, m)};
}

// One sampling period of xdot = Ap x + Bp u with u held constant.
inline VectorXd integrate_zoh_rk4(const PlantLti& plant, const VectorXd& x,
                                  const VectorXd& u) {
  const double h = plant.Ts / plant.substeps;
  const VectorXd bu = plant.Bp * u;
  VectorXd s = x;
  for (int k = 0; k < plant.substeps; ++k) {
    const VectorXd k1 = plant.Ap * s + bu;
    const VectorXd k2 = plant.Ap * (s + 0.5 * h * k1) + bu;
    const VectorXd k3 = plant.Ap * (s + 0.5 * h * k2) + bu;
    const VectorXd k4 = plant.Ap * (s + h * k3) + bu;
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return s;
}

}  // namespace ectl
