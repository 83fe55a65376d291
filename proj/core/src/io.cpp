#include "tlab/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tlab/error.hpp"

namespace tlab::io {

namespace {

using nlohmann::json;

// ----- filesystem helpers -----------------------------------------------------

json read_json(const std::string& path, const std::string& expected_kind) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open for reading: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) {
    throw SchemaError(path + ": top level must be an object");
  }
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"].get<int>() != kSchemaVersion) {
    throw SchemaError(path + ": missing or unsupported schema_version");
  }
  if (!j.contains("kind") || !j["kind"].is_string() ||
      j["kind"].get<std::string>() != expected_kind) {
    throw SchemaError(path + ": expected kind '" + expected_kind + "'");
  }
  return j;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ----- matrix (de)serialization ----------------------------------------------

json mat_to_json(const Mat& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = data;
  return j;
}

Mat mat_from_json(const json& j, Eigen::Index rows = -1, Eigen::Index cols = -1) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw SchemaError("matrix entries need rows/cols/data");
  }
  const auto r = j["rows"].get<Eigen::Index>();
  const auto c = j["cols"].get<Eigen::Index>();
  if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols) || r < 0 || c < 0) {
    throw SchemaError("matrix has unexpected dimensions");
  }
  const auto data = j["data"].get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != r * c) {
    throw SchemaError("matrix data length does not match rows*cols");
  }
  Mat m(r, c);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index jj = 0; jj < c; ++jj) m(i, jj) = data[k++];
  }
  return m;
}

template <typename F>
auto guard_schema(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError(path + ": malformed numeric field '" + s + "'");
  }
}

}  // namespace

// ===== plant parameters ========================================================

void save_plant_params(const std::string& path, const plant::PlantParams& p) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "plant_params";
  j["alpha1"] = p.alpha1;
  j["alpha2"] = p.alpha2;
  j["U"] = p.U;
  j["Us"] = p.Us;
  j["tau_c1"] = p.tau_c1;
  j["tau_c2"] = p.tau_c2;
  j["m"] = p.m;
  j["c_p"] = p.c_p;
  j["A_surf"] = p.A_surf;
  j["As_surf"] = p.As_surf;
  j["eps"] = p.eps;
  j["k_B"] = p.k_B;
  write_json(path, j);
}

plant::PlantParams load_plant_params(const std::string& path) {
  const json j = read_json(path, "plant_params");
  return guard_schema(path, [&] {
    plant::PlantParams p;
    p.alpha1 = j.at("alpha1").get<double>();
    p.alpha2 = j.at("alpha2").get<double>();
    p.U = j.at("U").get<double>();
    p.Us = j.at("Us").get<double>();
    p.tau_c1 = j.at("tau_c1").get<double>();
    p.tau_c2 = j.at("tau_c2").get<double>();
    p.m = j.at("m").get<double>();
    p.c_p = j.at("c_p").get<double>();
    p.A_surf = j.at("A_surf").get<double>();
    p.As_surf = j.at("As_surf").get<double>();
    p.eps = j.at("eps").get<double>();
    p.k_B = j.at("k_B").get<double>();
    return p;
  });
}

// ===== identification records ==================================================

void save_experiment(const std::string& csv_path, const std::string& sidecar_path,
                     const sysid::ExperimentRecord& rec) {
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot open for writing: " + csv_path);
  out << "t,Q1,Q2,TS1,TS2\n";
  for (Eigen::Index i = 0; i < rec.t.size(); ++i) {
    out << fmt_double(rec.t(i)) << ',' << fmt_double(rec.Q1(i)) << ',' << fmt_double(rec.Q2(i))
        << ',' << fmt_double(rec.TS1(i)) << ',' << fmt_double(rec.TS2(i)) << '\n';
  }
  if (!out) throw IoError("write failed: " + csv_path);
  if (!sidecar_path.empty()) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "experiment_sidecar";
    j["T_amb"] = rec.T_amb;
    write_json(sidecar_path, j);
  }
}

sysid::ExperimentRecord load_experiment(const std::string& csv_path,
                                        const std::string& sidecar_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open for reading: " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(csv_path + ": empty file");
  {
    const auto fields = split_csv_line(line);
    const std::vector<std::string> want = {"t", "Q1", "Q2", "TS1", "TS2"};
    for (std::size_t i = 0; i < want.size(); ++i) {
      if (i >= fields.size()) {
        throw IoError(csv_path + ": malformed header, missing column '" + want[i] + "'");
      }
      if (fields[i] != want[i]) {
        throw IoError(csv_path + ": malformed header, expected column '" + want[i] +
                      "' but found '" + fields[i] + "'");
      }
    }
    if (fields.size() != want.size()) {
      throw IoError(csv_path + ": malformed header, unexpected extra column '" +
                    fields[want.size()] + "'");
    }
  }
  std::vector<double> t, q1, q2, s1, s2;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw IoError(csv_path + ": row with wrong field count");
    t.push_back(parse_double(f[0], csv_path));
    q1.push_back(parse_double(f[1], csv_path));
    q2.push_back(parse_double(f[2], csv_path));
    s1.push_back(parse_double(f[3], csv_path));
    s2.push_back(parse_double(f[4], csv_path));
  }
  if (t.size() < 2) throw IoError(csv_path + ": need at least two samples");

  sysid::ExperimentRecord rec;
  const auto n = static_cast<Eigen::Index>(t.size());
  rec.t.resize(n);
  rec.Q1.resize(n);
  rec.Q2.resize(n);
  rec.TS1.resize(n);
  rec.TS2.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rec.t(i) = t[static_cast<std::size_t>(i)];
    rec.Q1(i) = q1[static_cast<std::size_t>(i)];
    rec.Q2(i) = q2[static_cast<std::size_t>(i)];
    rec.TS1(i) = s1[static_cast<std::size_t>(i)];
    rec.TS2(i) = s2[static_cast<std::size_t>(i)];
  }
  if (sidecar_path.empty()) {
    rec.T_amb = 0.5 * (rec.TS1(0) + rec.TS2(0));
  } else {
    const json j = read_json(sidecar_path, "experiment_sidecar");
    rec.T_amb = guard_schema(sidecar_path, [&] { return j.at("T_amb").get<double>(); });
  }
  return rec;
}

// ===== controller design artifact ==============================================

void save_design(const std::string& path, const DesignArtifact& d) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "controller";
  j["controller_kind"] = (d.ctrl.kind == synthesis::ControllerKind::lqg) ? "lqg" : "lqi";
  j["n_c"] = d.ctrl.n_c;
  j["Ts"] = d.ctrl.Ts;
  j["rho_Ac"] = d.ctrl.rho_Ac;
  j["Ac"] = mat_to_json(d.ctrl.Ac);
  j["Bc"] = mat_to_json(d.ctrl.Bc);
  j["Cc"] = mat_to_json(d.ctrl.Cc);
  j["Tc"] = mat_to_json(d.ctrl.Tc);
  j["C"] = mat_to_json(d.ctrl.C);
  j["K_xhat"] = mat_to_json(d.ctrl.K_xhat);
  if (d.ctrl.K_int.size() > 0) j["K_int"] = mat_to_json(d.ctrl.K_int);
  j["L"] = mat_to_json(d.ctrl.L);
  if (d.ctrl.Sigma_nu.size() > 0 && d.ctrl.Sigma_nu.cwiseAbs().maxCoeff() > 0.0) {
    j["Sigma_nu"] = mat_to_json(d.ctrl.Sigma_nu);
  }
  j["model"] = {{"A", mat_to_json(d.model.A)},
                {"B", mat_to_json(d.model.B)},
                {"C", mat_to_json(d.model.C)},
                {"Ts", d.model.Ts}};
  j["steady_state"] = {{"T_amb", d.ss.T_amb},
                       {"T_inf", d.ss.T_inf},
                       {"Q1_inf", d.ss.Q_inf(0)},
                       {"Q2_inf", d.ss.Q_inf(1)}};
  j["weights"] = {{"Qx", mat_to_json(d.weights.Qx)},
                  {"Ru", mat_to_json(d.weights.Ru)},
                  {"Qint", mat_to_json(d.weights.Qint)},
                  {"Sw", mat_to_json(d.weights.Sw)},
                  {"Sv", mat_to_json(d.weights.Sv)}};
  write_json(path, j);
}

DesignArtifact load_design(const std::string& path) {
  const json j = read_json(path, "controller");
  return guard_schema(path, [&] {
    DesignArtifact d;
    const std::string kind = j.at("controller_kind").get<std::string>();
    if (kind == "lqg") {
      d.ctrl.kind = synthesis::ControllerKind::lqg;
    } else if (kind == "lqi") {
      d.ctrl.kind = synthesis::ControllerKind::lqi;
    } else {
      throw SchemaError(path + ": unknown controller_kind '" + kind + "'");
    }
    d.ctrl.n_c = j.at("n_c").get<int>();
    if (d.ctrl.n_c != ((d.ctrl.kind == synthesis::ControllerKind::lqg) ? 4 : 6)) {
      throw SchemaError(path + ": n_c inconsistent with controller_kind");
    }
    d.ctrl.Ts = j.at("Ts").get<double>();
    d.ctrl.rho_Ac = j.at("rho_Ac").get<double>();
    const int n = d.ctrl.n_c;
    d.ctrl.Ac = mat_from_json(j.at("Ac"), n, n);
    d.ctrl.Bc = mat_from_json(j.at("Bc"), n, 2);
    d.ctrl.Cc = mat_from_json(j.at("Cc"), 2, n);
    d.ctrl.Tc = mat_from_json(j.at("Tc"), 4, n);
    d.ctrl.C = mat_from_json(j.at("C"), 2, 4);
    d.ctrl.K_xhat = mat_from_json(j.at("K_xhat"), 2, 4);
    if (j.contains("K_int")) d.ctrl.K_int = mat_from_json(j.at("K_int"), 2, 2);
    d.ctrl.L = mat_from_json(j.at("L"), 4, 2);
    d.ctrl.Sigma_nu = j.contains("Sigma_nu") ? mat_from_json(j.at("Sigma_nu"), n, n)
                                             : Mat(Mat::Zero(n, n));
    const json& jm = j.at("model");
    d.model.A = mat_from_json(jm.at("A"), 4, 4);
    d.model.B = mat_from_json(jm.at("B"), 4, 2);
    d.model.C = mat_from_json(jm.at("C"), 2, 4);
    d.model.Ts = jm.at("Ts").get<double>();
    const json& js = j.at("steady_state");
    d.ss.T_amb = js.at("T_amb").get<double>();
    d.ss.T_inf = js.at("T_inf").get<double>();
    d.ss.Q_inf(0) = js.at("Q1_inf").get<double>();
    d.ss.Q_inf(1) = js.at("Q2_inf").get<double>();
    const json& jw = j.at("weights");
    d.weights.Qx = mat_from_json(jw.at("Qx"), 4, 4);
    d.weights.Ru = mat_from_json(jw.at("Ru"), 2, 2);
    d.weights.Qint = mat_from_json(jw.at("Qint"), 2, 2);
    d.weights.Sw = mat_from_json(jw.at("Sw"), 4, 4);
    d.weights.Sv = mat_from_json(jw.at("Sv"), 2, 2);
    return d;
  });
}

// ===== detector artifact ========================================================

void save_detector(const std::string& path, const detect::DetectorConfig& cfg,
                   double arl_estimate, int tune_iterations) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "detector";
  j["variant"] = (cfg.variant == detect::Variant::chi2) ? "chi2" : "mewma";
  j["beta"] = cfg.beta;
  j["J_D"] = cfg.J_D;
  j["dim"] = cfg.dim;
  j["arl_target"] = cfg.arl_target;
  if (arl_estimate > 0.0) j["arl_estimate"] = arl_estimate;
  if (tune_iterations > 0) j["tune_iterations"] = tune_iterations;
  write_json(path, j);
}

detect::DetectorConfig load_detector(const std::string& path) {
  const json j = read_json(path, "detector");
  return guard_schema(path, [&] {
    detect::DetectorConfig cfg;
    const std::string v = j.at("variant").get<std::string>();
    if (v == "chi2") {
      cfg.variant = detect::Variant::chi2;
    } else if (v == "mewma") {
      cfg.variant = detect::Variant::mewma;
    } else {
      throw SchemaError(path + ": unknown detector variant '" + v + "'");
    }
    cfg.beta = j.at("beta").get<double>();
    cfg.J_D = j.at("J_D").get<double>();
    cfg.dim = j.at("dim").get<int>();
    cfg.arl_target = j.at("arl_target").get<double>();
    return cfg;
  });
}

// ===== scenario =================================================================

namespace {

attack::SupportMode support_from_string(const std::string& s, const std::string& path) {
  if (s == "squared") return attack::SupportMode::squared;
  if (s == "proportional") return attack::SupportMode::proportional;
  throw SchemaError(path + ": unknown support mode '" + s + "'");
}

sim::Stage1ModeChoice stage1_from_string(const std::string& s, const std::string& path) {
  if (s == "auto") return sim::Stage1ModeChoice::automatic;
  if (s == "open_loop") return sim::Stage1ModeChoice::open_loop;
  if (s == "joint_kf") return sim::Stage1ModeChoice::joint_kf;
  throw SchemaError(path + ": unknown stage1_mode '" + s + "'");
}

}  // namespace

sim::ScenarioConfig load_scenario(const std::string& path) {
  const json j = read_json(path, "scenario");
  return guard_schema(path, [&] {
    sim::ScenarioConfig cfg;
    cfg.name = j.value("name", std::string("scenario"));

    const json& jc = j.at("controller");
    const std::string kind = jc.at("kind").get<std::string>();
    if (kind == "lqg") {
      cfg.kind = synthesis::ControllerKind::lqg;
    } else if (kind == "lqi") {
      cfg.kind = synthesis::ControllerKind::lqi;
    } else {
      throw SchemaError(path + ": unknown controller kind '" + kind + "'");
    }
    cfg.weights.Qx = jc.value("qx", 10.0) * Mat4::Identity();
    cfg.weights.Ru = jc.value("ru", 2.0) * Mat2::Identity();
    cfg.weights.Qint = jc.value("qint", 2.0) * Mat2::Identity();
    cfg.weights.Sw = jc.value("sw", 5.0) * Mat4::Identity();
    cfg.weights.Sv = jc.value("sv", 1.0) * Mat2::Identity();

    const json& jd = j.at("detector");
    const std::string variant = jd.at("variant").get<std::string>();
    if (variant == "chi2") {
      cfg.detector.variant = detect::Variant::chi2;
    } else if (variant == "mewma") {
      cfg.detector.variant = detect::Variant::mewma;
    } else {
      throw SchemaError(path + ": unknown detector variant '" + variant + "'");
    }
    cfg.detector.beta = jd.value("beta", 0.2);
    cfg.detector.J_D = jd.value("J_D", 0.0);
    cfg.detector.dim = jd.value("dim", 2);
    cfg.detector.arl_target = jd.value("arl", 20.0);

    if (j.contains("plant")) {
      const json& jp = j.at("plant");
      cfg.T_amb = jp.value("T_amb", 294.15);
      cfg.T_set = jp.value("T_set", 313.15);
      cfg.sigma_meas = jp.value("sigma_meas", 0.18);
      cfg.linear_truth = jp.value("linear_truth", false);
      if (jp.contains("params")) {
        const json& q = jp.at("params");
        cfg.params.alpha1 = q.at("alpha1").get<double>();
        cfg.params.alpha2 = q.at("alpha2").get<double>();
        cfg.params.U = q.at("U").get<double>();
        cfg.params.Us = q.at("Us").get<double>();
        cfg.params.tau_c1 = q.at("tau_c1").get<double>();
        cfg.params.tau_c2 = q.at("tau_c2").get<double>();
        cfg.params.m = q.at("m").get<double>();
        cfg.params.c_p = q.at("c_p").get<double>();
        cfg.params.A_surf = q.at("A_surf").get<double>();
        cfg.params.As_surf = q.at("As_surf").get<double>();
        cfg.params.eps = q.at("eps").get<double>();
        cfg.params.k_B = q.at("k_B").get<double>();
      }
    }

    if (j.contains("timeline")) {
      const json& jt = j.at("timeline");
      cfg.timeline.k_I = jt.value("k_I", 900);
      cfg.timeline.N_I = jt.value("N_I", 300);
      cfg.timeline.N_II = jt.value("N_II", 120);
      cfg.timeline.N_III = jt.value("N_III", 1800);
    }

    if (j.contains("attack")) {
      const json& ja = j.at("attack");
      cfg.attack.enabled = ja.value("enabled", false);
      cfg.attack.stage1_mode = stage1_from_string(ja.value("stage1_mode", std::string("auto")), path);
      cfg.attack.support = support_from_string(ja.value("support", std::string("squared")), path);
      cfg.attack.stealth_margin = ja.value("stealth_margin", 1e-3);
      cfg.attack.perfect_stage1 = ja.value("perfect_stage1", false);
      cfg.attack.gamma = ja.value("gamma", -1.0);
      cfg.attack.joint_kf_p0 = ja.value("joint_kf_p0", 10.0);
      cfg.attack.attacker_sw_scale = ja.value("attacker_sw_scale", 1.0);
      cfg.attack.attacker_sv_scale = ja.value("attacker_sv_scale", 1.0);
      cfg.attack.attacker_sigma_r_scale = ja.value("attacker_sigma_r_scale", 1.0);
    }

    if (j.contains("injection")) {
      const json& ji = j.at("injection");
      cfg.injection.variance = ji.value("variance", 0.0);
      cfg.injection.start_k = ji.value("start_k", 0);
    }

    if (j.contains("drift")) {
      const json& jr = j.at("drift");
      cfg.drift.amplitude = jr.value("amplitude", 0.0);
      cfg.drift.period = jr.value("period", 0.0);
    }

    if (j.contains("calibration")) {
      const json& jk = j.at("calibration");
      cfg.calibration.steps = jk.value("steps", 2700);
      cfg.calibration.discard = jk.value("discard", 900);
    }

    cfg.log_diagnostics = j.value("log_diagnostics", true);
    cfg.default_seed = j.value("seed", static_cast<std::uint64_t>(1));
    return cfg;
  });
}

void save_scenario(const std::string& path, const sim::ScenarioConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "scenario";
  j["name"] = cfg.name;
  j["controller"] = {
      {"kind", cfg.kind == synthesis::ControllerKind::lqg ? "lqg" : "lqi"},
      {"qx", cfg.weights.Qx(0, 0)},
      {"ru", cfg.weights.Ru(0, 0)},
      {"qint", cfg.weights.Qint(0, 0)},
      {"sw", cfg.weights.Sw(0, 0)},
      {"sv", cfg.weights.Sv(0, 0)},
  };
  j["detector"] = {
      {"variant", cfg.detector.variant == detect::Variant::chi2 ? "chi2" : "mewma"},
      {"beta", cfg.detector.beta},
      {"J_D", cfg.detector.J_D},
      {"dim", cfg.detector.dim},
      {"arl", cfg.detector.arl_target},
  };
  j["plant"] = {
      {"T_amb", cfg.T_amb},
      {"T_set", cfg.T_set},
      {"sigma_meas", cfg.sigma_meas},
      {"linear_truth", cfg.linear_truth},
  };
  j["timeline"] = {
      {"k_I", cfg.timeline.k_I},
      {"N_I", cfg.timeline.N_I},
      {"N_II", cfg.timeline.N_II},
      {"N_III", cfg.timeline.N_III},
  };
  j["attack"] = {
      {"enabled", cfg.attack.enabled},
      {"stage1_mode", cfg.attack.stage1_mode == sim::Stage1ModeChoice::automatic
                          ? "auto"
                          : (cfg.attack.stage1_mode == sim::Stage1ModeChoice::open_loop
                                 ? "open_loop"
                                 : "joint_kf")},
      {"support",
       cfg.attack.support == attack::SupportMode::squared ? "squared" : "proportional"},
      {"stealth_margin", cfg.attack.stealth_margin},
      {"perfect_stage1", cfg.attack.perfect_stage1},
      {"gamma", cfg.attack.gamma},
      {"joint_kf_p0", cfg.attack.joint_kf_p0},
      {"attacker_sw_scale", cfg.attack.attacker_sw_scale},
      {"attacker_sv_scale", cfg.attack.attacker_sv_scale},
      {"attacker_sigma_r_scale", cfg.attack.attacker_sigma_r_scale},
  };
  j["injection"] = {{"variance", cfg.injection.variance}, {"start_k", cfg.injection.start_k}};
  j["drift"] = {{"amplitude", cfg.drift.amplitude}, {"period", cfg.drift.period}};
  j["calibration"] = {{"steps", cfg.calibration.steps}, {"discard", cfg.calibration.discard}};
  j["log_diagnostics"] = cfg.log_diagnostics;
  j["seed"] = cfg.default_seed;
  write_json(path, j);
}

// ===== run outputs ===============================================================

void save_trace_csv(const std::string& path, const std::vector<sim::TraceRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "k,TH1,TH2,TS1,TS2,y1,y2,yt1,yt2,u1raw,u2raw,u1,u2,r1,r2,yD,alarm,stage,ec,eD,er\n";
  for (const sim::TraceRecord& r : trace) {
    out << r.k << ',' << fmt_double(r.TH1) << ',' << fmt_double(r.TH2) << ','
        << fmt_double(r.TS1) << ',' << fmt_double(r.TS2) << ',' << fmt_double(r.y1) << ','
        << fmt_double(r.y2) << ',' << fmt_double(r.yt1) << ',' << fmt_double(r.yt2) << ','
        << fmt_double(r.u1raw) << ',' << fmt_double(r.u2raw) << ',' << fmt_double(r.u1) << ','
        << fmt_double(r.u2) << ',' << fmt_double(r.r1) << ',' << fmt_double(r.r2) << ','
        << fmt_double(r.yD) << ',' << (r.alarm ? 1 : 0) << ',' << r.stage << ','
        << fmt_double(r.ec) << ',' << fmt_double(r.eD) << ',' << fmt_double(r.er) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<sim::TraceRecord> load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  const std::string want =
      "k,TH1,TH2,TS1,TS2,y1,y2,yt1,yt2,u1raw,u2raw,u1,u2,r1,r2,yD,alarm,stage,ec,eD,er";
  {
    std::string hdr = line;
    if (!hdr.empty() && hdr.back() == '\r') hdr.pop_back();
    if (hdr != want) throw SchemaError(path + ": unexpected header");
  }
  std::vector<sim::TraceRecord> trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 21) throw SchemaError(path + ": row with wrong field count");
    sim::TraceRecord r;
    r.k = static_cast<int>(parse_double(f[0], path));
    r.TH1 = parse_double(f[1], path);
    r.TH2 = parse_double(f[2], path);
    r.TS1 = parse_double(f[3], path);
    r.TS2 = parse_double(f[4], path);
    r.y1 = parse_double(f[5], path);
    r.y2 = parse_double(f[6], path);
    r.yt1 = parse_double(f[7], path);
    r.yt2 = parse_double(f[8], path);
    r.u1raw = parse_double(f[9], path);
    r.u2raw = parse_double(f[10], path);
    r.u1 = parse_double(f[11], path);
    r.u2 = parse_double(f[12], path);
    r.r1 = parse_double(f[13], path);
    r.r2 = parse_double(f[14], path);
    r.yD = parse_double(f[15], path);
    r.alarm = parse_double(f[16], path) != 0.0;
    r.stage = static_cast<int>(parse_double(f[17], path));
    r.ec = parse_double(f[18], path);
    r.eD = parse_double(f[19], path);
    r.er = parse_double(f[20], path);
    trace.push_back(r);
  }
  return trace;
}

void save_alarm_csv(const std::string& path, const std::vector<sim::TraceRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "k,y_D,alarm\n";
  for (const sim::TraceRecord& r : trace) {
    out << r.k << ',' << fmt_double(r.yD) << ',' << (r.alarm ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void save_attack_csv(const std::string& path, const std::vector<Vec2>& a) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "k,a1,a2\n";
  for (std::size_t k = 0; k < a.size(); ++k) {
    out << k << ',' << fmt_double(a[k](0)) << ',' << fmt_double(a[k](1)) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void save_metrics(const std::string& path, const sim::Metrics& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "metrics";
  j["name"] = m.name;
  j["seed"] = m.seed;
  j["attack_enabled"] = m.attack_enabled;
  j["pre_mean_th1"] = m.pre_mean_th[0];
  j["pre_mean_th2"] = m.pre_mean_th[1];
  j["end_mean_th1"] = m.end_mean_th[0];
  j["end_mean_th2"] = m.end_mean_th[1];
  j["achieved_impact"] = m.achieved_impact;
  j["targeted_heater"] = m.targeted_heater;
  j["theoretical_impact"] = m.theoretical_impact;
  j["target_index"] = m.target_index;
  j["alarms_warmup"] = m.alarms_warmup;
  j["alarms_stage1"] = m.alarms_stage1;
  j["alarms_stage2"] = m.alarms_stage2;
  j["alarms_stage3"] = m.alarms_stage3;
  j["alarms_total"] = m.alarms_total;
  j["stealthy"] = m.stealthy;
  j["mean_yD_stage3"] = m.mean_yD_stage3;
  j["false_alarm_rate"] = m.false_alarm_rate;
  j["rho_Ac"] = m.rho_Ac;
  j["J_D"] = m.J_D;
  j["N_II"] = m.N_II;
  // NaN is not representable in JSON; diagnostics fall back to null.
  if (std::isfinite(m.e_c_at_kII)) j["e_c_at_kII"] = m.e_c_at_kII;
  if (std::isfinite(m.e_D_at_kIII)) j["e_D_at_kIII"] = m.e_D_at_kIII;
  j["sigma_r_11"] = m.sigma_r_diag[0];
  j["sigma_r_22"] = m.sigma_r_diag[1];
  write_json(path, j);
}

sim::Metrics load_metrics(const std::string& path) {
  const json j = read_json(path, "metrics");
  return guard_schema(path, [&] {
    sim::Metrics m;
    m.name = j.value("name", std::string());
    m.seed = j.value("seed", static_cast<std::uint64_t>(0));
    m.attack_enabled = j.at("attack_enabled").get<bool>();
    m.pre_mean_th[0] = j.at("pre_mean_th1").get<double>();
    m.pre_mean_th[1] = j.at("pre_mean_th2").get<double>();
    m.end_mean_th[0] = j.at("end_mean_th1").get<double>();
    m.end_mean_th[1] = j.at("end_mean_th2").get<double>();
    m.achieved_impact = j.at("achieved_impact").get<double>();
    m.targeted_heater = j.at("targeted_heater").get<int>();
    m.theoretical_impact = j.at("theoretical_impact").get<double>();
    m.target_index = j.at("target_index").get<int>();
    m.alarms_warmup = j.at("alarms_warmup").get<long>();
    m.alarms_stage1 = j.at("alarms_stage1").get<long>();
    m.alarms_stage2 = j.at("alarms_stage2").get<long>();
    m.alarms_stage3 = j.at("alarms_stage3").get<long>();
    m.alarms_total = j.at("alarms_total").get<long>();
    m.stealthy = j.at("stealthy").get<bool>();
    m.mean_yD_stage3 = j.at("mean_yD_stage3").get<double>();
    m.false_alarm_rate = j.at("false_alarm_rate").get<double>();
    m.rho_Ac = j.at("rho_Ac").get<double>();
    m.J_D = j.at("J_D").get<double>();
    m.N_II = j.at("N_II").get<int>();
    m.e_c_at_kII = j.value("e_c_at_kII", std::numeric_limits<double>::quiet_NaN());
    m.e_D_at_kIII = j.value("e_D_at_kIII", std::numeric_limits<double>::quiet_NaN());
    m.sigma_r_diag[0] = j.at("sigma_r_11").get<double>();
    m.sigma_r_diag[1] = j.at("sigma_r_22").get<double>();
    return m;
  });
}

void save_impact(const std::string& path, const attack::ImpactSolution& sol) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "impact";
  j["theoretical_impact"] = sol.value;
  j["target_index"] = sol.target_index;
  j["target_sign"] = sol.target_sign;
  j["N_III"] = static_cast<int>(sol.a.size());
  j["solver_iterations"] = sol.iterations;
  j["suboptimal"] = sol.suboptimal;
  j["feasibility_margin"] = sol.margins;
  write_json(path, j);
}

attack::ImpactSolution load_impact(const std::string& path) {
  const json j = read_json(path, "impact");
  return guard_schema(path, [&] {
    attack::ImpactSolution sol;
    sol.value = j.at("theoretical_impact").get<double>();
    sol.target_index = j.at("target_index").get<int>();
    sol.target_sign = j.at("target_sign").get<int>();
    sol.iterations = j.at("solver_iterations").get<int>();
    sol.suboptimal = j.at("suboptimal").get<bool>();
    sol.margins = j.at("feasibility_margin").get<std::vector<double>>();
    return sol;
  });
}

// ===== residual statistics =======================================================

void save_residual_stats(const std::string& path, const synthesis::ResidualStats& s) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "residual_stats";
  j["mean"] = {s.mean(0), s.mean(1)};
  j["Sigma_r"] = mat_to_json(s.Sigma_r);
  j["normalizer"] = mat_to_json(s.normalizer);
  write_json(path, j);
}

synthesis::ResidualStats load_residual_stats(const std::string& path) {
  const json j = read_json(path, "residual_stats");
  return guard_schema(path, [&] {
    synthesis::ResidualStats s;
    const auto mean = j.at("mean").get<std::vector<double>>();
    if (mean.size() != 2) throw SchemaError(path + ": mean must have two entries");
    s.mean << mean[0], mean[1];
    s.Sigma_r = mat_from_json(j.at("Sigma_r"), 2, 2);
    s.normalizer = mat_from_json(j.at("normalizer"), 2, 2);
    return s;
  });
}

}  // namespace tlab::io
