// File formats: controller/scenario JSON (matrices as decimal strings),
// conversion reports, trace CSV, summary reports, and the binary key /
// encrypted-controller files shared with the network protocol.
//
// Binary layout: little-endian 8-byte residues behind an "ECT1" header
// carrying {q0, nu0, d, n}.  All JSON/CSV numeric output uses shortest
// round-trip formatting, so reruns with the same seed are byte-identical.

#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ectl/bounds.hpp"
#include "ectl/controller.hpp"
#include "ectl/convert.hpp"
#include "ectl/sim.hpp"

namespace ectl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// binary primitives

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw IoError("unexpected end of binary stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void put_i64(std::ostream& os, std::int64_t v) {
  put_u64(os, static_cast<std::uint64_t>(v));
}
inline std::int64_t get_i64(std::istream& is) {
  return static_cast<std::int64_t>(get_u64(is));
}

constexpr char kBinMagic[4] = {'E', 'C', 'T', '1'};

inline void put_header(std::ostream& os, const LweParams& p) {
  os.write(kBinMagic, 4);
  put_u64(os, static_cast<std::uint64_t>(p.q0));
  put_u64(os, static_cast<std::uint64_t>(p.nu0));
  put_u64(os, static_cast<std::uint64_t>(p.d));
  put_u64(os, static_cast<std::uint64_t>(p.n));
}

inline LweParams get_header(std::istream& is, double sigma, int k0) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kBinMagic, 4) != 0)
    throw IoError("bad magic in binary file");
  const int q0 = static_cast<int>(get_u64(is));
  const int nu0 = static_cast<int>(get_u64(is));
  const int d = static_cast<int>(get_u64(is));
  const int n = static_cast<int>(get_u64(is));
  LweParams p = setup(q0, nu0, n, sigma, k0);
  if (p.d != d) throw IoError("inconsistent gadget length in header");
  return p;
}

// key file: header + sigma + k0 + sk entries
inline void save_key(const std::string& path, const LweParams& p,
                     const SecretKey& key) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open key file for writing: " + path);
  put_header(os, p);
  put_u64(os, std::bit_cast<std::uint64_t>(p.sigma));
  put_u64(os, static_cast<std::uint64_t>(p.k0));
  for (auto v : key.sk) put_i64(os, v);
  if (!os) throw IoError("failed writing key file: " + path);
}

inline std::pair<LweParams, SecretKey> load_key(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open key file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kBinMagic, 4) != 0)
    throw IoError("bad magic in key file");
  const int q0 = static_cast<int>(get_u64(is));
  const int nu0 = static_cast<int>(get_u64(is));
  const int d = static_cast<int>(get_u64(is));
  const int n = static_cast<int>(get_u64(is));
  const double sigma = std::bit_cast<double>(get_u64(is));
  const int k0 = static_cast<int>(get_u64(is));
  LweParams p = setup(q0, nu0, n, sigma, k0);
  if (p.d != d) throw IoError("inconsistent gadget length in key file");
  SecretKey key;
  key.sk.resize(p.n);
  for (auto& v : key.sk) v = get_i64(is);
  if (!is) throw IoError("truncated key file");
  return {p, key};
}

inline void put_ciphertext(std::ostream& os, const Ciphertext& c) {
  for (Residue r : c.coeffs) put_u64(os, r);
}

inline Ciphertext get_ciphertext(std::istream& is, const LweParams& p) {
  Ciphertext c;
  c.coeffs.resize(p.n + 1);
  for (auto& r : c.coeffs) r = get_u64(is);
  return c;
}

inline void put_gsw(std::ostream& os, const GswCiphertext& g) {
  for (Residue r : g.mat) put_u64(os, r);
}

inline GswCiphertext get_gsw(std::istream& is, const LweParams& p) {
  GswCiphertext g;
  g.rows = p.n + 1;
  g.cols = p.n_prime;
  g.mat.resize(static_cast<std::size_t>(g.rows) * g.cols);
  for (auto& r : g.mat) r = get_u64(is);
  return g;
}

inline void put_intmat(std::ostream& os, const IntMat& m) {
  put_u64(os, static_cast<std::uint64_t>(m.rows()));
  put_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) put_i64(os, m(i, j));
}

inline IntMat get_intmat(std::istream& is) {
  const int rows = static_cast<int>(get_u64(is));
  const int cols = static_cast<int>(get_u64(is));
  if (rows < 0 || cols < 0 || rows > 4096 || cols > 4096)
    throw IoError("unreasonable matrix dimensions in binary file");
  IntMat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = get_i64(is);
  return m;
}

// encrypted controller file: header, dims, scales, window, reenc rule and
// the parameter ciphertexts; contains no key material by construction
inline void save_encrypted_controller(const std::string& path,
                                      const EncryptedController& ec) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open controller file for writing: " + path);
  put_header(os, ec.params);
  put_u64(os, std::bit_cast<std::uint64_t>(ec.params.sigma));
  put_u64(os, static_cast<std::uint64_t>(ec.params.k0));
  put_u64(os, ec.mode == ParamMode::encrypted_params ? 0 : 1);
  const auto dims = [&](const auto& gsw_mat, const IntMat& plain) {
    return ec.mode == ParamMode::encrypted_params
               ? std::pair<int, int>(static_cast<int>(gsw_mat.size()),
                                     gsw_mat.empty()
                                         ? 0
                                         : static_cast<int>(gsw_mat[0].size()))
               : std::pair<int, int>(static_cast<int>(plain.rows()),
                                     static_cast<int>(plain.cols()));
  };
  const auto [np, np2] = dims(ec.FpE, ec.Fp);
  const auto [np3, p] = dims(ec.GpE, ec.Gp);
  const auto [np4, nr] = dims(ec.PpE, ec.Pp);
  const auto [m, np5] = dims(ec.HbE, ec.Hb);
  put_u64(os, static_cast<std::uint64_t>(np));
  put_u64(os, static_cast<std::uint64_t>(p));
  put_u64(os, static_cast<std::uint64_t>(nr));
  put_u64(os, static_cast<std::uint64_t>(m));
  put_i64(os, ec.sc.r1_exp);
  put_i64(os, ec.sc.r2_exp);
  put_i64(os, ec.sc.s1_exp);
  put_i64(os, ec.sc.s2_exp);
  put_i64(os, ec.sc.L_exp);
  put_u64(os, ec.win.q);
  for (std::size_t i = 0; i < ec.win.u_min.size(); ++i) {
    put_i64(os, ec.win.u_min[i]);
    put_i64(os, ec.win.u_max[i]);
  }
  auto put_gsw_mat = [&](const std::vector<std::vector<GswCiphertext>>& mat) {
    for (const auto& row : mat)
      for (const auto& g : row) put_gsw(os, g);
  };
  if (ec.mode == ParamMode::encrypted_params) {
    put_gsw_mat(ec.FpE);
    put_gsw_mat(ec.GpE);
    put_gsw_mat(ec.PpE);
    put_gsw_mat(ec.RbE);
    put_gsw_mat(ec.HbE);
    put_gsw_mat(ec.JbE);
    put_gsw_mat(ec.QbE);
  } else {
    put_intmat(os, ec.Fp);
    put_intmat(os, ec.Gp);
    put_intmat(os, ec.Pp);
    put_intmat(os, ec.Rb);
    put_intmat(os, ec.Hb);
    put_intmat(os, ec.Jb);
    put_intmat(os, ec.Qb);
  }
  for (const auto& c : ec.z) put_ciphertext(os, c);
  if (!os) throw IoError("failed writing controller file: " + path);
}

inline EncryptedController load_encrypted_controller(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open controller file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kBinMagic, 4) != 0)
    throw IoError("bad magic in controller file");
  const int q0 = static_cast<int>(get_u64(is));
  const int nu0 = static_cast<int>(get_u64(is));
  const int d = static_cast<int>(get_u64(is));
  const int n = static_cast<int>(get_u64(is));
  const double sigma = std::bit_cast<double>(get_u64(is));
  const int k0 = static_cast<int>(get_u64(is));
  EncryptedController ec;
  ec.params = setup(q0, nu0, n, sigma, k0);
  if (ec.params.d != d) throw IoError("inconsistent gadget length");
  ec.mode = get_u64(is) == 0 ? ParamMode::encrypted_params
                             : ParamMode::plain_params;
  const int np = static_cast<int>(get_u64(is));
  const int p = static_cast<int>(get_u64(is));
  const int nr = static_cast<int>(get_u64(is));
  const int m = static_cast<int>(get_u64(is));
  ec.sc.r1_exp = static_cast<int>(get_i64(is));
  ec.sc.r2_exp = static_cast<int>(get_i64(is));
  ec.sc.s1_exp = static_cast<int>(get_i64(is));
  ec.sc.s2_exp = static_cast<int>(get_i64(is));
  ec.sc.L_exp = static_cast<int>(get_i64(is));
  ec.win.q = get_u64(is);
  ec.win.u_min.resize(m);
  ec.win.u_max.resize(m);
  for (int i = 0; i < m; ++i) {
    ec.win.u_min[i] = get_i64(is);
    ec.win.u_max[i] = get_i64(is);
  }
  ec.win.validate();
  auto get_gsw_mat = [&](int rows, int cols) {
    std::vector<std::vector<GswCiphertext>> mat(rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) mat[i].push_back(get_gsw(is, ec.params));
    return mat;
  };
  if (ec.mode == ParamMode::encrypted_params) {
    ec.FpE = get_gsw_mat(np, np);
    ec.GpE = get_gsw_mat(np, p);
    ec.PpE = get_gsw_mat(np, nr);
    ec.RbE = get_gsw_mat(np, m);
    ec.HbE = get_gsw_mat(m, np);
    ec.JbE = get_gsw_mat(m, p);
    ec.QbE = get_gsw_mat(m, nr);
  } else {
    ec.Fp = get_intmat(is);
    ec.Gp = get_intmat(is);
    ec.Pp = get_intmat(is);
    ec.Rb = get_intmat(is);
    ec.Hb = get_intmat(is);
    ec.Jb = get_intmat(is);
    ec.Qb = get_intmat(is);
  }
  ec.z.resize(np);
  for (auto& c : ec.z) c = get_ciphertext(is, ec.params);
  if (!is) throw IoError("truncated controller file");
  return ec;
}

// ---------------------------------------------------------------------------
// JSON: matrices as row-major arrays of decimal strings

inline json matrix_to_json(const MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  json data = json::array();
  for (int i = 0; i < m.rows(); ++i)
    for (int c = 0; c < m.cols(); ++c) data.push_back(dbl_str(m(i, c)));
  j["data"] = data;
  return j;
}

inline MatrixXd matrix_from_json(const json& j) {
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw ConfigError("matrix JSON needs rows/cols/data");
  const int rows = j["rows"].get<int>();
  const int cols = j["cols"].get<int>();
  const auto& data = j["data"];
  if (static_cast<int>(data.size()) != rows * cols)
    throw ConfigError("matrix JSON data length mismatch");
  MatrixXd m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) {
      const auto& cell = data[k++];
      m(i, c) = cell.is_string() ? std::strtod(cell.get<std::string>().c_str(),
                                               nullptr)
                                 : cell.get<double>();
    }
  return m;
}

inline json controller_to_json(const GivenController& c) {
  json j;
  j["F"] = matrix_to_json(c.F);
  j["G"] = matrix_to_json(c.G);
  j["P"] = matrix_to_json(c.P);
  j["H"] = matrix_to_json(c.H);
  j["J"] = matrix_to_json(c.J);
  j["Q"] = matrix_to_json(c.Q);
  j["x0"] = matrix_to_json(c.x0);
  return j;
}

inline GivenController controller_from_json(const json& j) {
  GivenController c;
  c.F = matrix_from_json(j.at("F"));
  c.G = matrix_from_json(j.at("G"));
  c.P = matrix_from_json(j.at("P"));
  c.H = matrix_from_json(j.at("H"));
  c.J = matrix_from_json(j.at("J"));
  c.Q = matrix_from_json(j.at("Q"));
  c.x0 = matrix_from_json(j.at("x0")).col(0);
  c.validate();
  return c;
}

inline json scales_to_json(const ScaleSet& sc) {
  return json{{"r1_exp", sc.r1_exp},
              {"r2_exp", sc.r2_exp},
              {"s1_exp", sc.s1_exp},
              {"s2_exp", sc.s2_exp},
              {"L_exp", sc.L_exp}};
}

inline ScaleSet scales_from_json(const json& j) {
  ScaleSet sc;
  sc.r1_exp = j.at("r1_exp").get<int>();
  sc.r2_exp = j.at("r2_exp").get<int>();
  sc.s1_exp = j.at("s1_exp").get<int>();
  sc.s2_exp = j.at("s2_exp").get<int>();
  sc.L_exp = j.at("L_exp").get<int>();
  sc.validate();
  return sc;
}

inline json conversion_to_json(const ConversionResult& v) {
  json j;
  j["n_obs"] = v.n_obs;
  j["single_output_route"] = v.single_output_route;
  j["residual_dynamics"] = dbl_str(v.residual_dynamics);
  j["residual_output"] = dbl_str(v.residual_output);
  j["charpoly"] = v.target_charpoly;
  if (!v.kvec.empty()) j["kvec"] = v.kvec;
  if (!v.targets.empty()) {
    json t = json::array();
    for (const auto& g : v.targets) t.push_back(json::array({g.re, g.im}));
    j["targets"] = t;
  }
  json fp = json::array();
  for (int i = 0; i < v.Fp.rows(); ++i)
    for (int c = 0; c < v.Fp.cols(); ++c) fp.push_back(v.Fp(i, c));
  j["Fp"] = fp;
  j["Hp"] = matrix_to_json(v.Hp);
  j["T"] = matrix_to_json(v.T);
  j["R"] = matrix_to_json(v.R);
  return j;
}

// ---------------------------------------------------------------------------
// scenario configuration

struct Scenario {
  SimJob base;
  std::vector<Mode> modes;
  bool window_estimated = false;
  double eps = 0.05;
  std::optional<std::vector<std::int64_t>> kvec;
};

inline LweParams crypto_from_json(const json& j) {
  if (j.is_string()) {
    const std::string prof = j.get<std::string>();
    if (prof == "desk") return desk_params();
    if (prof == "paper") return paper_params();
    throw ConfigError("unknown crypto profile: " + prof);
  }
  return setup(j.at("q0").get<int>(), j.at("nu0").get<int>(),
               j.at("n").get<int>(), j.value("sigma", 1.0),
               j.value("k0", 6));
}

inline GivenController controller_from_config(const json& j,
                                              std::vector<std::int64_t>* kvec) {
  if (j.is_string()) {
    if (j.get<std::string>() == "three_inertia") {
      const auto preset = three_inertia_preset();
      if (kvec && kvec->empty()) *kvec = preset.kvec;
      return preset.controller;
    }
    throw ConfigError("unknown controller preset: " + j.get<std::string>());
  }
  if (j.contains("file")) {
    std::ifstream is(j["file"].get<std::string>());
    if (!is) throw IoError("cannot open controller file: " +
                           j["file"].get<std::string>());
    json cj;
    is >> cj;
    return controller_from_json(cj);
  }
  if (j.contains("pid")) {
    const auto& pj = j["pid"];
    return build_pid(pj.at("kp").get<double>(), pj.at("ki").get<double>(),
                     pj.at("kd").get<double>(), pj.at("Ts").get<double>(),
                     pj.at("Nd").get<int>());
  }
  if (j.contains("fir"))
    return build_fir(j["fir"].get<std::vector<double>>());
  return controller_from_json(j);
}

inline PlantLti plant_from_config(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "three_inertia")
      return three_inertia_preset().plant;
    throw ConfigError("unknown plant preset: " + j.get<std::string>());
  }
  PlantLti p;
  p.Ap = matrix_from_json(j.at("Ap"));
  p.Bp = matrix_from_json(j.at("Bp"));
  p.Cp = matrix_from_json(j.at("Cp"));
  p.xp0 = j.contains("xp0") ? VectorXd(matrix_from_json(j["xp0"]).col(0))
                            : VectorXd(VectorXd::Zero(p.Ap.rows()));
  p.Ts = j.at("Ts").get<double>();
  p.substeps = j.value("substeps", 10);
  p.validate();
  return p;
}

inline Scenario load_scenario(const json& j) {
  Scenario sc;
  std::vector<std::int64_t> preset_kvec;
  sc.base.plant = plant_from_config(j.at("plant"));
  sc.base.given = controller_from_config(j.at("controller"), &preset_kvec);
  sc.base.sc = scales_from_json(j.at("scales"));
  sc.base.horizon = j.at("horizon").get<int>();
  sc.eps = j.value("eps", 0.05);

  if (j.contains("crypto")) sc.base.params = crypto_from_json(j["crypto"]);
  sc.base.backend_kind = j.value("backend", std::string("lwe")) == "debug"
                             ? BackendKind::debug
                             : BackendKind::lwe;
  if (j.contains("seeds")) {
    sc.base.key_seed = j["seeds"].value("key", 1);
    sc.base.rng_seed = j["seeds"].value("rng", 2);
    sc.base.op_seed = j["seeds"].value("op", 3);
  }
  sc.base.rule = j.value("reenc_rule", std::string("paper")) == "footnote"
                     ? ReencRule::footnote
                     : ReencRule::paper;

  if (j.contains("kvec"))
    sc.kvec = j["kvec"].get<std::vector<std::int64_t>>();
  else if (!preset_kvec.empty())
    sc.kvec = preset_kvec;
  ConvertOptions copt;
  copt.kvec = sc.kvec;
  if (sc.base.given.m() == 1 || !j.contains("targets")) {
    sc.base.conv = convert_controller(sc.base.given, copt);
  } else {
    ConvertOptions mopt;
    std::vector<GaussInt> targets;
    for (const auto& t : j["targets"])
      targets.push_back({t[0].get<std::int64_t>(), t[1].get<std::int64_t>()});
    mopt.targets = targets;
    sc.base.conv = convert_controller(sc.base.given, mopt);
  }

  // reference schedule: constant or list of [time_from, [values]]
  const auto& rj = j.at("reference");
  if (rj.is_number()) {
    VectorXd v(sc.base.given.nr());
    v.setConstant(rj.get<double>());
    sc.base.ref = Reference::constant(v);
  } else {
    Reference ref;
    for (const auto& piece : rj) {
      const auto vals = piece[1].get<std::vector<double>>();
      VectorXd v(static_cast<Eigen::Index>(vals.size()));
      for (std::size_t i = 0; i < vals.size(); ++i) v(i) = vals[i];
      ref.pieces.emplace_back(piece[0].get<double>(), v);
    }
    sc.base.ref = ref;
  }

  // output window: explicit bounds or estimated from the ideal sweep
  const auto wj = j.value("window", json("auto"));
  VectorXd lo, hi;
  if (wj.is_string() && wj.get<std::string>() == "auto") {
    std::tie(lo, hi) = estimate_output_range(sc.base);
    sc.window_estimated = true;
  } else {
    const auto lov = wj.at("u_min").get<std::vector<double>>();
    const auto hiv = wj.at("u_max").get<std::vector<double>>();
    lo.resize(static_cast<Eigen::Index>(lov.size()));
    hi.resize(static_cast<Eigen::Index>(hiv.size()));
    for (std::size_t i = 0; i < lov.size(); ++i) lo(i) = lov[i];
    for (std::size_t i = 0; i < hiv.size(); ++i) hi(i) = hiv[i];
  }
  OutputWindow win = size_window(lo, hi, sc.eps, sc.base.sc);
  if (j.contains("crypto")) {
    if (win.q > sc.base.params.q)
      throw ConfigError("output window needs a larger modulus than the crypto profile");
    win.q = sc.base.params.q;  // ring and crypto moduli coincide
  }
  sc.base.window = win;

  if (j.contains("modes"))
    for (const auto& m : j["modes"]) sc.modes.push_back(mode_from_name(m));
  if (sc.modes.empty()) sc.modes.push_back(Mode::ideal);
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open scenario: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario parse error: " + std::string(e.what()));
  }
  return load_scenario(j);
}

// ---------------------------------------------------------------------------
// trace CSV and summary report

inline std::string trace_csv(const Trace& tr) {
  std::ostringstream os;
  const int p = tr.y.empty() ? 0 : static_cast<int>(tr.y[0].size());
  const int m = tr.u.empty() ? 0 : static_cast<int>(tr.u[0].size());
  const int nr = tr.r.empty() ? 0 : static_cast<int>(tr.r[0].size());
  os << "step,time_s";
  for (int i = 0; i < nr; ++i) os << ",r_" << i;
  for (int i = 0; i < p; ++i) os << ",y_" << i;
  for (int i = 0; i < m; ++i) os << ",u_" << i;
  for (int i = 0; i < m; ++i) os << ",u_window_" << i;
  for (int i = 0; i < m; ++i) os << ",u_prime_" << i;
  os << ",ez_norm,eu_norm,delta1,delta2,window_margin,state_cut,err_y,err_u\n";
  auto opt = [&](const std::vector<double>& v, int t) {
    return t < static_cast<int>(v.size()) ? dbl_str(v[t]) : std::string();
  };
  for (int t = 0; t < tr.steps(); ++t) {
    os << t << ',' << dbl_str(t * tr.Ts);
    for (int i = 0; i < nr; ++i) os << ',' << dbl_str(tr.r[t](i));
    for (int i = 0; i < p; ++i) os << ',' << dbl_str(tr.y[t](i));
    for (int i = 0; i < m; ++i) os << ',' << dbl_str(tr.u[t](i));
    for (int i = 0; i < m; ++i) {
      os << ',';
      if (t < static_cast<int>(tr.u_window.size()))
        os << tr.u_window[t][i];
    }
    for (int i = 0; i < m; ++i) {
      os << ',';
      if (t < static_cast<int>(tr.u_prime.size())) os << tr.u_prime[t][i];
    }
    os << ',' << opt(tr.ez_norm, t) << ',' << opt(tr.eu_norm, t) << ','
       << opt(tr.delta1_norm, t) << ',' << opt(tr.delta2_norm, t) << ','
       << opt(tr.window_margin, t) << ',';
    if (t < static_cast<int>(tr.state_cut.size()))
      os << static_cast<int>(tr.state_cut[t]);
    os << ',' << opt(tr.err_y, t) << ',' << opt(tr.err_u, t) << '\n';
  }
  return os.str();
}

inline json summary_json(const Trace& tr, bool window_estimated) {
  json j;
  j["mode"] = mode_name(tr.mode);
  j["steps"] = tr.steps();
  j["max_err_y"] = dbl_str(max_err_y(tr));
  j["max_err_u"] = dbl_str(max_err_u(tr));
  double margin = -1;
  for (double w : tr.window_margin)
    margin = margin < 0 ? w : std::min(margin, w);
  j["window_margin"] = margin < 0 ? json() : json(dbl_str(margin));
  j["window_estimated"] = window_estimated;
  return j;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << content;
  if (!os) throw IoError("failed writing: " + path);
}

}  // namespace ectl
