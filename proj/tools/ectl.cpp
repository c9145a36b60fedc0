// ectl: operator surface for the encrypted-controller toolkit.
//
// Subcommands: keygen, convert, design, encrypt, simulate, compare,
// serve-plant, serve-controller, bench.  Exit codes: 0 success, 2 config
// error, 3 I/O error, 4 validation error.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "ectl/bounds.hpp"
#include "ectl/io.hpp"
#include "ectl/netloop.hpp"
#include "ectl/sim.hpp"

using namespace ectl;
namespace fs = std::filesystem;

namespace {

struct SeedOverride {
  std::int64_t seed = -1;
  void apply(SimJob& job) const {
    if (seed < 0) return;
    job.key_seed = static_cast<std::uint64_t>(seed) * 3 + 1;
    job.rng_seed = static_cast<std::uint64_t>(seed) * 3 + 2;
    job.op_seed = static_cast<std::uint64_t>(seed) * 3 + 3;
  }
};

LweParams params_from_profile(const std::string& profile) {
  if (profile == "desk") return desk_params();
  if (profile == "paper") return paper_params();
  throw ConfigError("unknown profile: " + profile);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[ectl] " << msg << "\n";
}

int cmd_keygen(const std::string& profile, std::uint64_t seed,
               const std::string& out) {
  const LweParams p = params_from_profile(profile);
  const SecretKey key = keygen(p, seed);
  save_key(out, p, key);
  json j;
  j["out"] = out;
  j["q0"] = p.q0;
  j["nu0"] = p.nu0;
  j["d"] = p.d;
  j["n"] = p.n;
  std::cout << j.dump(2) << "\n";
  return 0;
}

GivenController load_controller_arg(const std::string& arg,
                                    std::vector<std::int64_t>* kvec) {
  if (arg == "three_inertia") {
    const auto preset = three_inertia_preset();
    if (kvec && kvec->empty()) *kvec = preset.kvec;
    return preset.controller;
  }
  std::ifstream is(arg);
  if (!is) throw IoError("cannot open controller: " + arg);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("controller parse error: " + std::string(e.what()));
  }
  return controller_from_json(j);
}

int cmd_convert(const std::string& ctl_arg, std::vector<std::int64_t> kvec,
                const std::string& out) {
  const GivenController ctl = load_controller_arg(ctl_arg, &kvec);
  ConvertOptions opt;
  if (!kvec.empty()) opt.kvec = kvec;
  const ConversionResult conv = convert_controller(ctl, opt);
  json report = conversion_to_json(conv);
  report["controller"] = controller_to_json(ctl);
  write_file(out, report.dump(2) + "\n");
  log_info("conversion written to " + out);
  std::cout << "residual_dynamics " << dbl_str(conv.residual_dynamics)
            << "\nresidual_output " << dbl_str(conv.residual_output) << "\n";
  return 0;
}

int cmd_design(const std::string& scenario_path, int r1p, int r2p, int s1p,
               double eta, double m_bound, double eps,
               const std::string& out) {
  const Scenario sc = load_scenario_file(scenario_path);
  BoundInputs bi;
  bi.norms = NormsCache::make(sc.base.given, *sc.base.conv);
  bi.M = m_bound;
  bi.eps = eps;
  bi.eta = eta;
  DesignTarget tgt{r1p, r2p, s1p};
  const Backend be{sc.base.backend_kind, sc.base.params};
  const auto [lo, hi] = estimate_output_range(sc.base);
  const ScaleSet designed = design_parameters(tgt, bi, be, lo, hi);
  json j = scales_to_json(designed);
  j["gamma"] = dbl_str(eval_gamma(designed.L(), designed.r1(), designed.r2(),
                                  designed.s1(), designed.s2(), be, bi.M,
                                  bi.eps, bi.norms));
  j["theta"] = dbl_str(eval_theta(bi.eta, bi.norms));
  write_file(out, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_encrypt(const std::string& scenario_path, const std::string& key_path,
                bool additive, const SeedOverride& seed,
                const std::string& out) {
  Scenario sc = load_scenario_file(scenario_path);
  seed.apply(sc.base);
  const auto [params, key] = load_key(key_path);
  if (params.q != sc.base.params.q)
    throw ValidationError(
        "key profile does not match the scenario crypto profile");
  IntegerController ic =
      IntegerController::make(sc.base.given, *sc.base.conv, sc.base.sc);
  RingController rc = RingController::make(ic, *sc.base.window);
  const Backend be{sc.base.backend_kind, params};
  CounterRng op_rng(sc.base.op_seed);
  const EncryptedController ec = encrypt_controller(
      rc, key, be, op_rng,
      additive ? ParamMode::plain_params : ParamMode::encrypted_params);
  save_encrypted_controller(out, ec);
  log_info("encrypted controller written to " + out);
  std::cout << "written " << out << "\n";
  return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& mode_arg,
                 const SeedOverride& seed, const std::string& out_dir) {
  Scenario sc = load_scenario_file(scenario_path);
  seed.apply(sc.base);
  ensure_dir(out_dir);
  std::vector<Mode> modes =
      mode_arg.empty() ? sc.modes : std::vector<Mode>{mode_from_name(mode_arg)};

  SimJob ideal_job = sc.base;
  ideal_job.mode = Mode::ideal;
  const Trace ideal = run_closed_loop(ideal_job);

  json report = json::array();
  json timings = json::array();
  for (Mode m : modes) {
    SimJob job = sc.base;
    job.mode = m;
    const auto t0 = std::chrono::steady_clock::now();
    Trace tr = run_closed_loop(job);
    const auto t1 = std::chrono::steady_clock::now();
    fill_errors_vs_ideal(tr, ideal);
    const std::string path = out_dir + "/trace_" + mode_name(m) + ".csv";
    write_file(path, trace_csv(tr));
    report.push_back(summary_json(tr, sc.window_estimated));
    json tj;
    tj["mode"] = mode_name(m);
    tj["runtime_per_step_ms"] =
        std::chrono::duration<double, std::milli>(t1 - t0).count() /
        std::max(1, tr.steps());
    timings.push_back(tj);
    log_info("trace written to " + path);
  }
  write_file(out_dir + "/report.json", report.dump(2) + "\n");
  write_file(out_dir + "/timings.json", timings.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_compare(const std::string& scenario_path, const SeedOverride& seed,
                const std::string& out_dir) {
  Scenario sc = load_scenario_file(scenario_path);
  seed.apply(sc.base);
  ensure_dir(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Trace> traces = compare_modes(sc.base, sc.modes);
  const auto t1 = std::chrono::steady_clock::now();
  json report = json::array();
  for (const auto& tr : traces) {
    write_file(out_dir + "/trace_" + mode_name(tr.mode) + ".csv",
               trace_csv(tr));
    report.push_back(summary_json(tr, sc.window_estimated));
  }
  write_file(out_dir + "/report.json", report.dump(2) + "\n");
  json timings;
  timings["wall_ms"] =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  write_file(out_dir + "/timings.json", timings.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_serve_controller(int port, const std::string& ctl_path,
                         double timeout, const std::string& rule) {
  // this process path never touches key material: the controller file format
  // has no key field and this subcommand accepts no key argument
  EncryptedController ec = load_encrypted_controller(ctl_path);
  net::ControllerServer server(port);
  std::cout << "LISTENING " << server.port() << "\n" << std::flush;
  const auto session =
      server.run(ec, rule == "footnote" ? 1 : 0, timeout);
  std::cout << "served " << session.steps_served << " steps\n";
  return 0;
}

int cmd_serve_plant(const std::string& connect,
                    const std::string& scenario_path,
                    const std::string& key_path, bool realtime,
                    const std::string& reenc_rule, const SeedOverride& seed,
                    const std::string& out_dir) {
  Scenario sc = load_scenario_file(scenario_path);
  seed.apply(sc.base);
  const auto [params, key] = load_key(key_path);
  if (params.q != sc.base.params.q)
    throw ValidationError(
        "key profile does not match the scenario crypto profile");

  const auto colon = connect.find(':');
  if (colon == std::string::npos)
    throw ConfigError("--connect expects host:port");
  const std::string host = connect.substr(0, colon);
  const int port = std::stoi(connect.substr(colon + 1));

  net::PlantNetConfig cfg;
  cfg.plant = sc.base.plant;
  cfg.ref = sc.base.ref;
  cfg.horizon = sc.base.horizon;
  cfg.sc = sc.base.sc;
  cfg.win = *sc.base.window;
  cfg.params = params;
  cfg.key = key;
  cfg.backend_kind = sc.base.backend_kind;
  cfg.rule = reenc_rule == "footnote" ? ReencRule::footnote : ReencRule::paper;
  cfg.rng_seed = sc.base.rng_seed;
  cfg.nr = sc.base.given.nr();
  cfg.realtime = realtime;

  const Trace tr = net::serve_plant(host, port, cfg);
  ensure_dir(out_dir);
  write_file(out_dir + "/trace_net.csv", trace_csv(tr));
  std::cout << "completed " << tr.steps() << " steps\n";
  return 0;
}

int cmd_bench(const std::string& profile, int steps, const SeedOverride& seed,
              const std::string& out) {
  // per-sampling-instant cost of the encrypted pipeline on the bench
  // scenario: input encryption + homomorphic output/update + actuator decode
  const auto preset = three_inertia_preset();
  SimJob job;
  job.plant = preset.plant;
  job.given = preset.controller;
  ConvertOptions opt;
  opt.kvec = preset.kvec;
  job.conv = convert_controller(preset.controller, opt);
  job.sc.r1_exp = -15;
  job.sc.r2_exp = -15;
  job.sc.s1_exp = -19;
  job.sc.s2_exp = 0;
  job.sc.L_exp = -11;
  job.params = params_from_profile(profile);
  job.horizon = std::max(steps, 40);
  VectorXd one(1);
  one << 1.0;
  job.ref = Reference::constant(one);
  seed.apply(job);

  const auto [lo, hi] = estimate_output_range(job);
  OutputWindow win = size_window(lo, hi, 0.05, job.sc);
  if (win.q > job.params.q)
    throw ValidationError("bench window exceeds the crypto modulus");
  win.q = job.params.q;

  const SecretKey key = keygen(job.params, job.key_seed);
  const Backend be{BackendKind::lwe, job.params};
  IntegerController ic = IntegerController::make(job.given, *job.conv, job.sc);
  RingController rc = RingController::make(ic, win);
  CounterRng op_rng(job.op_seed);
  EncryptedController ec = encrypt_controller(rc, key, be, op_rng);
  ActuatorCodec codec{&key, be, win, job.sc, ReencRule::paper};
  CounterRng rng(job.rng_seed);

  VectorXd xp = job.plant.xp0;
  double total_ms = 0, worst_ms = 0;
  for (int t = 0; t < steps; ++t) {
    const VectorXd y = job.plant.Cp * xp;
    const VectorXd r = job.ref.at(t * job.plant.Ts);
    const IVec yb = quantize_signal(y, job.sc.r1());
    const IVec rb = quantize_signal(r, job.sc.r1());

    const auto t0 = std::chrono::steady_clock::now();
    const auto yE = codec.encrypt_inputs(yb, rng);
    const auto rE = codec.encrypt_inputs(rb, rng);
    const auto uE = ec.output(yE, rE);
    const ActuatorDecode dec = codec.decode(uE, rng);
    ec.update(yE, rE, dec.reenc);
    const auto t1 = std::chrono::steady_clock::now();

    const double ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    total_ms += ms;
    worst_ms = std::max(worst_ms, ms);
    xp = integrate_zoh_rk4(job.plant, xp, dec.u_real);
  }
  json j;
  j["profile"] = profile;
  j["steps"] = steps;
  j["avg_step_ms"] = total_ms / std::max(1, steps);
  j["max_step_ms"] = worst_ms;
  j["budget_ms"] = 1000.0 * job.plant.Ts;
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) write_file(out, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"encrypted linear controller toolkit"};
  app.require_subcommand(1);

  auto* keygen_cmd = app.add_subcommand("keygen", "generate a secret key file");
  std::string kg_profile = "desk", kg_out = "key.bin";
  std::uint64_t kg_seed = 1;
  keygen_cmd->add_option("--profile", kg_profile, "crypto profile: desk|paper");
  keygen_cmd->add_option("--seed", kg_seed, "key generation seed");
  keygen_cmd->add_option("--out", kg_out, "output key file")->required();

  auto* convert_cmd =
      app.add_subcommand("convert", "integerize a controller state matrix");
  std::string cv_ctl, cv_out = "conversion.json", cv_kvec;
  convert_cmd
      ->add_option("--controller", cv_ctl, "controller JSON file or preset")
      ->required();
  convert_cmd->add_option("--kvec", cv_kvec,
                          "comma-separated companion column override");
  convert_cmd->add_option("--out", cv_out, "conversion report path");

  auto* design_cmd =
      app.add_subcommand("design", "derive scale parameters from bounds");
  std::string ds_scenario, ds_out = "scales.json";
  int ds_r1p = -12, ds_r2p = -12, ds_s1p = -12;
  double ds_eta = 0.05, ds_m = 2.0, ds_eps = 0.1;
  design_cmd->add_option("--scenario", ds_scenario)->required();
  design_cmd->add_option("--r1p-exp", ds_r1p, "reference sensor step exponent");
  design_cmd->add_option("--r2p-exp", ds_r2p,
                         "reference actuator step exponent");
  design_cmd->add_option("--s1p-exp", ds_s1p,
                         "reference matrix scale exponent");
  design_cmd->add_option("--eta", ds_eta, "stability margin eta(eps)");
  design_cmd->add_option("--M", ds_m, "closed-loop signal bound");
  design_cmd->add_option("--eps", ds_eps, "performance target");
  design_cmd->add_option("--out", ds_out);

  auto* encrypt_cmd =
      app.add_subcommand("encrypt", "encrypt a scenario's controller");
  std::string en_scenario, en_key, en_out = "controller.ect";
  bool en_additive = false;
  SeedOverride en_seed;
  encrypt_cmd->add_option("--scenario", en_scenario)->required();
  encrypt_cmd->add_option("--key", en_key)->required();
  encrypt_cmd->add_option("--out", en_out);
  encrypt_cmd->add_flag("--additive", en_additive,
                        "plaintext parameters, encrypted signals");
  encrypt_cmd->add_option("--seed", en_seed.seed);

  auto* sim_cmd = app.add_subcommand("simulate", "run closed-loop scenarios");
  std::string sm_scenario, sm_mode, sm_out = "out";
  SeedOverride sm_seed;
  sim_cmd->add_option("--scenario", sm_scenario)->required();
  sim_cmd->add_option("--mode", sm_mode, "run a single mode");
  sim_cmd->add_option("--seed", sm_seed.seed);
  sim_cmd->add_option("--out", sm_out, "output directory");

  auto* cmp_cmd =
      app.add_subcommand("compare", "run scenario modes in parallel workers");
  std::string cp_scenario, cp_out = "out";
  SeedOverride cp_seed;
  cmp_cmd->add_option("--scenario", cp_scenario)->required();
  cmp_cmd->add_option("--seed", cp_seed.seed);
  cmp_cmd->add_option("--out", cp_out);

  auto* sc_cmd = app.add_subcommand(
      "serve-controller", "encrypted controller endpoint (holds no key)");
  int sc_port = 0;
  std::string sc_ctl, sc_rule = "paper";
  double sc_timeout = 30.0;
  sc_cmd->add_option("--port", sc_port, "listen port (0 = ephemeral)");
  sc_cmd->add_option("--controller", sc_ctl, "encrypted controller file")
      ->required();
  sc_cmd->add_option("--timeout", sc_timeout, "receive timeout seconds");
  sc_cmd->add_option("--reenc-rule", sc_rule, "paper|footnote");

  auto* sp_cmd =
      app.add_subcommand("serve-plant", "plant/actuator endpoint (key holder)");
  std::string sp_connect, sp_scenario, sp_key, sp_out = "out";
  std::string sp_rule = "paper";
  bool sp_realtime = false;
  SeedOverride sp_seed;
  sp_cmd->add_option("--connect", sp_connect, "controller host:port")
      ->required();
  sp_cmd->add_option("--scenario", sp_scenario)->required();
  sp_cmd->add_option("--key", sp_key)->required();
  sp_cmd->add_flag("--realtime", sp_realtime,
                   "pace steps to the sampling period");
  sp_cmd->add_option("--reenc-rule", sp_rule, "paper|footnote");
  sp_cmd->add_option("--seed", sp_seed.seed);
  sp_cmd->add_option("--out", sp_out);

  auto* bench_cmd =
      app.add_subcommand("bench", "per-step encrypted pipeline timing");
  std::string bn_profile = "paper", bn_out;
  int bn_steps = 200;
  SeedOverride bn_seed;
  bench_cmd->add_option("--profile", bn_profile);
  bench_cmd->add_option("--steps", bn_steps);
  bench_cmd->add_option("--seed", bn_seed.seed);
  bench_cmd->add_option("--out", bn_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*keygen_cmd) return cmd_keygen(kg_profile, kg_seed, kg_out);
    if (*convert_cmd) {
      std::vector<std::int64_t> kvec;
      if (!cv_kvec.empty()) {
        std::stringstream ss(cv_kvec);
        std::string item;
        while (std::getline(ss, item, ',')) kvec.push_back(std::stoll(item));
      }
      return cmd_convert(cv_ctl, kvec, cv_out);
    }
    if (*design_cmd)
      return cmd_design(ds_scenario, ds_r1p, ds_r2p, ds_s1p, ds_eta, ds_m,
                        ds_eps, ds_out);
    if (*encrypt_cmd)
      return cmd_encrypt(en_scenario, en_key, en_additive, en_seed, en_out);
    if (*sim_cmd) return cmd_simulate(sm_scenario, sm_mode, sm_seed, sm_out);
    if (*cmp_cmd) return cmd_compare(cp_scenario, cp_seed, cp_out);
    if (*sc_cmd)
      return cmd_serve_controller(sc_port, sc_ctl, sc_timeout, sc_rule);
    if (*sp_cmd)
      return cmd_serve_plant(sp_connect, sp_scenario, sp_key, sp_realtime,
                             sp_rule, sp_seed, sp_out);
    if (*bench_cmd) return cmd_bench(bn_profile, bn_steps, bn_seed, bn_out);
  } catch (const ConfigError& e) {
    std::cerr << json{{"error", "config"}, {"message", e.what()}}.dump()
              << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << json{{"error", "io"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << json{{"error", "validation"}, {"message", e.what()}}.dump()
              << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump()
              << "\n";
    return 1;
  }
  return 0;
}
