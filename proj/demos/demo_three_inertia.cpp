// Bench scenario tour: convert the observer + integrator controller, run the
// ideal / integer / mod-q modes side by side and show that the windowed ring
// outputs match the unbounded realization exactly while its state wraps.

#include <cstdio>

#include "ectl/sim.hpp"

using namespace ectl;

int main() {
  const auto preset = three_inertia_preset();
  ConvertOptions opt;
  opt.kvec = preset.kvec;

  SimJob job;
  job.plant = preset.plant;
  job.given = preset.controller;
  job.conv = convert_controller(preset.controller, opt);
  job.sc.r1_exp = -15;
  job.sc.r2_exp = -15;
  job.sc.s1_exp = -19;
  job.sc.s2_exp = 0;
  job.sc.L_exp = -11;
  job.horizon = 400;
  VectorXd one(1);
  one << 1.0;
  job.ref = Reference::constant(one);

  std::printf("companion column: ");
  for (auto k : job.conv->kvec) std::printf("%lld ", static_cast<long long>(k));
  std::printf("\nconversion residual: %g\n", job.conv->residual_dynamics);

  const auto [lo, hi] = estimate_output_range(job);
  job.window = size_window(lo, hi, 0.05, job.sc);

  job.mode = Mode::ideal;
  const Trace ideal = run_closed_loop(job);
  job.mode = Mode::integer_mode;
  Trace integer_tr = run_closed_loop(job);
  job.mode = Mode::ring;
  Trace ring_tr = run_closed_loop(job);

  fill_errors_vs_ideal(integer_tr, ideal);
  fill_errors_vs_ideal(ring_tr, ideal);
  int cuts = 0;
  for (auto c : ring_tr.state_cut) cuts += c;

  std::printf("integer mode: max |y - y'| = %g\n", max_err_y(integer_tr));
  std::printf("ring mode:    max |y - y'| = %g (identical by construction)\n",
              max_err_y(ring_tr));
  std::printf("ring state dropped high bits on %d of %d steps\n", cuts,
              ring_tr.steps());
  std::printf("y(end) = %g with reference 1.0\n",
              ring_tr.y.back()(0));
  return 0;
}
