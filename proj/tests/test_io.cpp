#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ectl/io.hpp"
#include "test_util.hpp"

using namespace ectl;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string run_cli(const std::string& args, int* exit_code) {
  const std::string cmd = std::string(ECTL_BIN_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe))
    out.append(buf, n);
  const int status = pclose(pipe);
  if (exit_code) *exit_code = WEXITSTATUS(status);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("key file round trip") {
  const LweParams p = desk_params();
  const SecretKey key = keygen(p, 77);
  const std::string path = tmp_path("ectl_test_key.bin");
  save_key(path, p, key);
  const auto [p2, key2] = load_key(path);
  CHECK(p2.q == p.q);
  CHECK(p2.nu == p.nu);
  CHECK(p2.n == p.n);
  CHECK(p2.sigma == p.sigma);
  CHECK(p2.k0 == p.k0);
  CHECK(key2.sk == key.sk);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_key(tmp_path("ectl_no_such_key.bin")), IoError);
}

TEST_CASE("matrix JSON keeps full precision through decimal strings") {
  CounterRng rng(51);
  MatrixXd m = testutil::random_matrix(rng, 4, 3, 7.3);
  m(1, 2) = -2.5357;
  m(0, 0) = 1.0 / 3.0;
  const json j = matrix_to_json(m);
  const MatrixXd back = matrix_from_json(j);
  CHECK(inf_norm(back - m) == 0.0);  // shortest round-trip strings are exact
}

TEST_CASE("controller JSON round trip and conversion report") {
  CounterRng rng(52);
  const auto ctl = testutil::random_controller(rng, {4, 2, 1, 1});
  const json j = controller_to_json(ctl);
  const GivenController back = controller_from_json(j);
  CHECK(inf_norm(back.F - ctl.F) == 0.0);
  CHECK(inf_norm(back.H - ctl.H) == 0.0);

  // conversion of the re-ingested controller passes the identity check
  const auto conv = convert_controller(back);
  CHECK(conv.residual_dynamics <= 1e-9);
  const json report = conversion_to_json(conv);
  CHECK(report.at("n_obs").get<int>() == 4);
  CHECK(report.contains("charpoly"));
}

TEST_CASE("encrypted controller file round trip") {
  CounterRng rng(53);
  const auto loop = testutil::random_closed_loop(rng, {2, 1, 1, 1}, 2);
  const auto conv = convert_controller(loop.ctl);
  ScaleSet sc;
  sc.r1_exp = -8;
  sc.r2_exp = -8;
  sc.s1_exp = -5;
  sc.s2_exp = -5;
  sc.L_exp = -2;
  const LweParams params = desk_params();
  OutputWindow win = testutil::window_from_dry_run(loop, conv, sc, 100);
  win.q = params.q;
  IntegerController ic = IntegerController::make(loop.ctl, conv, sc);
  RingController rc = RingController::make(ic, win);
  const SecretKey key = keygen(params, 5);
  const Backend be{BackendKind::lwe, params};
  CounterRng op(6);
  const EncryptedController ec = encrypt_controller(rc, key, be, op);

  const std::string path = tmp_path("ectl_test_ctl.ect");
  save_encrypted_controller(path, ec);
  const EncryptedController back = load_encrypted_controller(path);
  std::remove(path.c_str());

  CHECK(back.params.q == ec.params.q);
  CHECK(back.win.u_min == ec.win.u_min);
  CHECK(back.sc.L_exp == ec.sc.L_exp);
  REQUIRE(back.z.size() == ec.z.size());
  for (std::size_t i = 0; i < ec.z.size(); ++i)
    CHECK(back.z[i].coeffs == ec.z[i].coeffs);
  REQUIRE(back.FpE.size() == ec.FpE.size());
  CHECK(back.FpE[0][0].mat == ec.FpE[0][0].mat);
  CHECK(back.QbE[0][0].mat == ec.QbE[0][0].mat);
}

TEST_CASE("scenario assembly from JSON") {
  json j;
  j["plant"] = "three_inertia";
  j["controller"] = "three_inertia";
  j["scales"] = {{"r1_exp", -15}, {"r2_exp", -15}, {"s1_exp", -19},
                 {"s2_exp", 0},   {"L_exp", -11}};
  j["crypto"] = "paper";
  j["horizon"] = 40;
  j["reference"] = 1.0;
  j["modes"] = {"ideal", "ring"};
  j["window"] = "auto";
  j["seeds"] = {{"key", 11}, {"rng", 12}, {"op", 13}};

  const Scenario sc = load_scenario(j);
  CHECK(sc.base.horizon == 40);
  CHECK(sc.base.given.n() == 7);
  CHECK(sc.modes.size() == 2);
  CHECK(sc.window_estimated);
  CHECK(sc.base.window->q == paper_params().q);  // ring modulus = crypto
  CHECK(sc.kvec.has_value());
  CHECK(sc.base.conv->kvec == std::vector<std::int64_t>{1, 0, 0, -1, 3, -3, 3});

  // a run through the assembled job works end to end
  SimJob job = sc.base;
  job.mode = Mode::ring;
  const Trace tr = run_closed_loop(job);
  CHECK(tr.steps() == 40);

  // CSV is stable across reruns
  const std::string csv1 = trace_csv(tr);
  const Trace tr2 = run_closed_loop(job);
  CHECK(csv1 == trace_csv(tr2));
  CHECK(csv1.find("step,time_s,r_0,y_0,u_0") == 0);

  // bad config is a ConfigError (exit code 2 at the CLI)
  json bad = j;
  bad["modes"] = {"warp"};
  CHECK_THROWS_AS(load_scenario(bad), ConfigError);
}

TEST_CASE("CLI: reruns with the same seed are byte-identical") {
  const std::string dir = tmp_path("ectl_cli_det");
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  json scenario;
  scenario["plant"] = "three_inertia";
  scenario["controller"] = "three_inertia";
  scenario["scales"] = {{"r1_exp", -15}, {"r2_exp", -15}, {"s1_exp", -19},
                        {"s2_exp", 0},   {"L_exp", -11}};
  scenario["crypto"] = "paper";
  scenario["backend"] = "debug";  // keep the determinism check fast
  scenario["horizon"] = 60;
  scenario["reference"] = 1.0;
  scenario["window"] = "auto";
  scenario["modes"] = {"ideal", "ring", "encrypted"};
  const std::string sc_path = dir + "/s.json";
  write_file(sc_path, scenario.dump(2));

  int code = 0;
  run_cli("simulate --scenario " + sc_path + " --seed 7 --out " + dir + "/a",
          &code);
  REQUIRE(code == 0);
  run_cli("simulate --scenario " + sc_path + " --seed 7 --out " + dir + "/b",
          &code);
  REQUIRE(code == 0);
  for (const std::string mode : {"ideal", "ring", "encrypted"})
    CHECK(slurp(dir + "/a/trace_" + mode + ".csv") ==
          slurp(dir + "/b/trace_" + mode + ".csv"));
  CHECK(slurp(dir + "/a/report.json") == slurp(dir + "/b/report.json"));
  // timing lives outside the determinism contract, in its own file
  CHECK(std::filesystem::exists(dir + "/a/timings.json"));

  // a different seed changes the encrypted trace (fresh randomness) but not
  // the deterministic modes
  run_cli("simulate --scenario " + sc_path + " --seed 8 --out " + dir + "/c",
          &code);
  REQUIRE(code == 0);
  CHECK(slurp(dir + "/a/trace_ideal.csv") == slurp(dir + "/c/trace_ideal.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("CLI: conversion report re-ingests through the identity verifier") {
  const std::string dir = tmp_path("ectl_cli_convert");
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  int code = 0;
  run_cli("convert --controller three_inertia --out " + dir + "/report.json",
          &code);
  REQUIRE(code == 0);

  json report;
  {
    std::ifstream is(dir + "/report.json");
    is >> report;
  }
  const GivenController ctl = controller_from_json(report.at("controller"));
  const MatrixXd T = matrix_from_json(report.at("T"));
  const MatrixXd R = matrix_from_json(report.at("R"));
  const MatrixXd Hp = matrix_from_json(report.at("Hp"));
  const int n_obs = report.at("n_obs").get<int>();
  MatrixXd Fp(n_obs, n_obs);
  {
    const auto& fp = report.at("Fp");
    int k = 0;
    for (int i = 0; i < n_obs; ++i)
      for (int j = 0; j < n_obs; ++j)
        Fp(i, j) = fp[k++].get<double>();
  }
  CHECK(inf_norm((Fp + R * Hp) * T - T * ctl.F) <= 1e-9);
  CHECK(inf_norm(Hp * T - ctl.H) <= 1e-9);
  std::filesystem::remove_all(dir);
}

TEST_CASE("CLI: config, IO and validation failures map to exit codes 2/3/4") {
  const std::string dir = tmp_path("ectl_cli_codes");
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  int code = 0;

  // unknown flag / parse error -> 2
  run_cli("keygen --no-such-flag x --out " + dir + "/k.bin", &code);
  CHECK(code == 2);

  // malformed scenario JSON -> 2
  write_file(dir + "/bad.json", "{ not json");
  run_cli("simulate --scenario " + dir + "/bad.json --out " + dir, &code);
  CHECK(code == 2);

  // missing file -> 3
  run_cli("simulate --scenario " + dir + "/none.json --out " + dir, &code);
  CHECK(code == 3);

  // validation failure -> 4 (key profile does not match the scenario)
  run_cli("keygen --profile desk --out " + dir + "/k.bin", &code);
  REQUIRE(code == 0);
  json scenario;
  scenario["plant"] = "three_inertia";
  scenario["controller"] = "three_inertia";
  scenario["scales"] = {{"r1_exp", -15}, {"r2_exp", -15}, {"s1_exp", -19},
                        {"s2_exp", 0},   {"L_exp", -11}};
  scenario["crypto"] = "paper";
  scenario["horizon"] = 20;
  scenario["reference"] = 1.0;
  scenario["window"] = "auto";
  const std::string sc_path = dir + "/s.json";
  write_file(sc_path, scenario.dump(2));
  run_cli("encrypt --scenario " + sc_path + " --key " + dir + "/k.bin --out " +
              dir + "/c.ect",
          &code);
  CHECK(code == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("summary JSON carries the error metrics") {
  json j;
  j["plant"] = "three_inertia";
  j["controller"] = "three_inertia";
  j["scales"] = {{"r1_exp", -15}, {"r2_exp", -15}, {"s1_exp", -19},
                 {"s2_exp", 0},   {"L_exp", -11}};
  j["horizon"] = 30;
  j["reference"] = 1.0;
  j["window"] = "auto";
  const Scenario sc = load_scenario(j);
  SimJob job = sc.base;
  job.mode = Mode::integer_mode;
  Trace tr = run_closed_loop(job);
  SimJob ideal = sc.base;
  ideal.mode = Mode::ideal;
  fill_errors_vs_ideal(tr, run_closed_loop(ideal));
  const json s = summary_json(tr, sc.window_estimated);
  CHECK(s.at("mode") == "integer");
  CHECK(s.at("steps") == 30);
  CHECK(std::stod(s.at("max_err_y").get<std::string>()) < 0.01);
}
