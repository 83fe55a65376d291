// tlab: command-line front door for the thermal-bench attack laboratory.
//
// Subcommands: identify, design, tune, plan, run, report.
// Exit codes: 0 ok, 1 I/O failure, 2 non-convergence / numeric failure,
// 3 artifact schema mismatch.
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "tlab/attack.hpp"
#include "tlab/detect.hpp"
#include "tlab/error.hpp"
#include "tlab/io.hpp"
#include "tlab/plant.hpp"
#include "tlab/sim.hpp"
#include "tlab/synthesis.hpp"
#include "tlab/sysid.hpp"
#include "tlab/types.hpp"

namespace fs = std::filesystem;
using namespace tlab;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Scenario overrides shared by `plan` and `run`.
struct Overrides {
  bool linear_truth = false;
  std::string detector;      // "", "chi2", "mewma"
  double arl = -1.0;         // <0: keep scenario value
  double inject = -1.0;      // <0: keep scenario value
};

void apply_overrides(sim::ScenarioConfig& cfg, const Overrides& ov) {
  if (ov.linear_truth) cfg.linear_truth = true;
  if (!ov.detector.empty()) {
    const auto variant =
        ov.detector == "chi2" ? detect::Variant::chi2 : detect::Variant::mewma;
    if (variant != cfg.detector.variant) {
      cfg.detector.variant = variant;
      cfg.detector.J_D = -1.0;  // threshold no longer valid; re-resolve
    }
  }
  if (ov.arl > 0.0) {
    cfg.detector.arl_target = ov.arl;
    cfg.detector.J_D = -1.0;
  }
  if (ov.inject >= 0.0) cfg.injection.variance = ov.inject;
}

void save_plan_artifacts(const std::string& out, const sim::ScenarioResult& res) {
  io::DesignArtifact d{res.ctrl, res.model, res.ss, res.resolved.weights};
  io::save_design(join(out, "controller.json"), d);
  io::save_detector(join(out, "detector.json"), res.resolved.detector);
  io::save_residual_stats(join(out, "residual_stats.json"), res.stats);
  if (res.resolved.attack.enabled) {
    io::save_impact(join(out, "impact.json"), res.impact);
    io::save_attack_csv(join(out, "attack_a.csv"), res.impact.a);
  }
}

void print_metrics_table(const sim::Metrics& m) {
  const double c = kCelsiusOffset;
  std::printf("%-22s %s\n", "scenario", m.name.c_str());
  std::printf("%-22s %llu\n", "seed", static_cast<unsigned long long>(m.seed));
  std::printf("%-22s %s\n", "attack", m.attack_enabled ? "enabled" : "disabled");
  if (m.attack_enabled) {
    std::printf("%-22s %.4f K (state %d)\n", "theoretical impact", m.theoretical_impact,
                m.target_index);
    std::printf("%-22s %.4f K (heater %d)\n", "achieved impact", m.achieved_impact,
                m.targeted_heater + 1);
    std::printf("%-22s %.2f / %.2f C\n", "pre-attack means", m.pre_mean_th[0] - c,
                m.pre_mean_th[1] - c);
    std::printf("%-22s %.2f / %.2f C\n", "end-of-attack means", m.end_mean_th[0] - c,
                m.end_mean_th[1] - c);
    std::printf("%-22s %s\n", "stealthy", m.stealthy ? "yes" : "no");
    std::printf("%-22s %.4f\n", "mean y_D (stage 3)", m.mean_yD_stage3);
  }
  std::printf("%-22s %ld/%ld/%ld/%ld (total %ld)\n", "alarms w/I/II/III", m.alarms_warmup,
              m.alarms_stage1, m.alarms_stage2, m.alarms_stage3, m.alarms_total);
  std::printf("%-22s %.5f\n", "false-alarm rate", m.false_alarm_rate);
  std::printf("%-22s %.4f\n", "detector threshold", m.J_D);
  std::printf("%-22s %.4f\n", "controller rho(Ac)", m.rho_Ac);
  std::printf("%-22s %.4f / %.4f\n", "residual cov diag", m.sigma_r_diag[0],
              m.sigma_r_diag[1]);
}

void write_fig_extracts(const std::string& dir, const std::vector<sim::TraceRecord>& trace,
                        double T_set, double J_D) {
  const double c = kCelsiusOffset;
  {
    std::ofstream f(join(dir, "fig_temps.csv"));
    if (!f) throw IoError("cannot write fig_temps.csv");
    f << "k,TH1_C,TH2_C,TS1_C,TS2_C,recv1_C,recv2_C\n";
    for (const auto& r : trace) {
      f << r.k << ',' << r.TH1 - c << ',' << r.TH2 - c << ',' << r.TS1 - c << ',' << r.TS2 - c
        << ',' << r.yt1 + T_set - c << ',' << r.yt2 + T_set - c << '\n';
    }
  }
  {
    std::ofstream f(join(dir, "fig_inputs.csv"));
    if (!f) throw IoError("cannot write fig_inputs.csv");
    f << "k,u1,u2,u1raw,u2raw\n";
    for (const auto& r : trace) {
      f << r.k << ',' << r.u1 << ',' << r.u2 << ',' << r.u1raw << ',' << r.u2raw << '\n';
    }
  }
  {
    std::ofstream f(join(dir, "fig_detector.csv"));
    if (!f) throw IoError("cannot write fig_detector.csv");
    f << "k,yD,J_D,alarm,stage\n";
    for (const auto& r : trace) {
      f << r.k << ',' << r.yD << ',' << J_D << ',' << (r.alarm ? 1 : 0) << ',' << r.stage
        << '\n';
    }
  }
}

// ----- subcommand bodies ------------------------------------------------------

int cmd_identify(const std::string& data_csv, const std::string& sidecar,
                 const std::string& init_path, const std::string& out) {
  ensure_dir(out);
  const sysid::ExperimentRecord rec = io::load_experiment(data_csv, sidecar);
  const plant::ParamBounds bounds = plant::default_bounds();
  plant::PlantParams init = plant::fitted_params();
  if (!init_path.empty()) {
    init = io::load_plant_params(init_path);
  } else {
    init.alpha1 = 0.5 * (bounds.lo(plant::kAlpha1) + bounds.hi(plant::kAlpha1));
    init.alpha2 = 0.5 * (bounds.lo(plant::kAlpha2) + bounds.hi(plant::kAlpha2));
    init.U = 0.5 * (bounds.lo(plant::kU) + bounds.hi(plant::kU));
    init.Us = 0.5 * (bounds.lo(plant::kUs) + bounds.hi(plant::kUs));
    init.tau_c1 = 0.5 * (bounds.lo(plant::kTauC1) + bounds.hi(plant::kTauC1));
    init.tau_c2 = 0.5 * (bounds.lo(plant::kTauC2) + bounds.hi(plant::kTauC2));
  }
  const sysid::FitResult fit = sysid::estimate_parameters(rec, bounds, init);
  io::save_plant_params(join(out, "params.json"), fit.params);
  std::printf("identify: objective %.6g after %ld iterations (%ld evaluations)\n",
              fit.objective, fit.iterations, fit.evaluations);
  std::printf("wrote %s\n", join(out, "params.json").c_str());
  return 0;
}

int cmd_design(const std::string& params_path, const std::string& controller,
               const std::string& out) {
  ensure_dir(out);
  const plant::PlantParams p =
      params_path.empty() ? plant::fitted_params() : io::load_plant_params(params_path);
  const auto ss = plant::steady_state(p, 294.15, 313.15);
  const auto dm = plant::discretize(plant::linearize(p, ss), 1.0);
  const synthesis::Weights w;
  const auto ctrl = (controller == "lqi") ? synthesis::design_lqi(dm, w)
                                          : synthesis::design_lqg(dm, w);
  io::save_design(join(out, "controller.json"), io::DesignArtifact{ctrl, dm, ss, w});
  std::printf("design: %s controller, rho(Ac) = %.6f\n", controller.c_str(), ctrl.rho_Ac);
  std::printf("wrote %s\n", join(out, "controller.json").c_str());
  return 0;
}

int cmd_tune(const std::string& detector, double arl, double beta, std::uint64_t seed,
             const std::string& out) {
  ensure_dir(out);
  detect::DetectorConfig cfg;
  cfg.arl_target = arl;
  cfg.dim = 2;
  double arl_estimate = 0.0;
  int iterations = 0;
  if (detector == "chi2") {
    cfg.variant = detect::Variant::chi2;
    cfg.J_D = detect::chi2_threshold(arl, cfg.dim);
    arl_estimate = arl;
  } else {
    cfg.variant = detect::Variant::mewma;
    cfg.beta = beta;
    detect::TuneOptions topt;
    if (seed != 0) topt.seed = seed;
    const auto tuned = detect::tune_mewma_threshold(arl, beta, cfg.dim, topt);
    cfg.J_D = tuned.J_D;
    arl_estimate = tuned.arl_estimate;
    iterations = tuned.iterations;
  }
  io::save_detector(join(out, "detector.json"), cfg, arl_estimate, iterations);
  std::printf("tune: %s threshold J_D = %.4f (ARL estimate %.2f)\n", detector.c_str(),
              cfg.J_D, arl_estimate);
  std::printf("wrote %s\n", join(out, "detector.json").c_str());
  return 0;
}

int cmd_plan(const std::string& scenario, std::uint64_t seed, bool seed_given,
             const Overrides& ov, const std::string& out) {
  ensure_dir(out);
  sim::ScenarioConfig cfg = io::load_scenario(scenario);
  apply_overrides(cfg, ov);
  const std::uint64_t s = seed_given ? seed : cfg.default_seed;
  const sim::ScenarioResult res = sim::run_scenario(cfg, s);
  save_plan_artifacts(out, res);
  io::save_scenario(join(out, "scenario_resolved.json"), res.resolved);
  if (res.resolved.attack.enabled) {
    std::printf("plan: theoretical impact %.4f K on state %d over %d steps\n",
                res.impact.value, res.impact.target_index,
                static_cast<int>(res.impact.a.size()));
  } else {
    std::printf("plan: attack disabled in scenario; wrote design artifacts only\n");
  }
  std::printf("wrote artifacts under %s\n", out.c_str());
  return 0;
}

void write_run_outputs(const std::string& dir, const sim::ScenarioResult& res) {
  ensure_dir(dir);
  io::save_trace_csv(join(dir, "trace.csv"), res.trace);
  io::save_metrics(join(dir, "metrics.json"), res.metrics);
  io::save_alarm_csv(join(dir, "alarms.csv"), res.trace);
  io::save_scenario(join(dir, "scenario_resolved.json"), res.resolved);
  save_plan_artifacts(dir, res);
}

int cmd_run(const std::string& scenario, std::uint64_t seed, bool seed_given, int nseeds,
            const Overrides& ov, const std::string& out) {
  ensure_dir(out);
  sim::ScenarioConfig cfg = io::load_scenario(scenario);
  apply_overrides(cfg, ov);
  const std::uint64_t base = seed_given ? seed : cfg.default_seed;

  if (nseeds <= 1) {
    const sim::ScenarioResult res = sim::run_scenario(cfg, base);
    write_run_outputs(out, res);
    print_metrics_table(res.metrics);
    std::printf("wrote artifacts under %s\n", out.c_str());
    return 0;
  }

  // Fan the replicas out across worker threads; each writes its own directory.
  std::vector<sim::Metrics> metrics(static_cast<std::size_t>(nseeds));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nseeds));
  unsigned workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(nseeds));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = static_cast<int>(w); i < nseeds; i += static_cast<int>(workers)) {
        try {
          const std::uint64_t s = base + static_cast<std::uint64_t>(i);
          const sim::ScenarioResult res = sim::run_scenario(cfg, s);
          write_run_outputs(join(out, "seed_" + std::to_string(s)), res);
          metrics[static_cast<std::size_t>(i)] = res.metrics;
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::ofstream f(join(out, "summary.csv"));
  if (!f) throw IoError("cannot write summary.csv");
  f << "seed,stealthy,theoretical_impact,achieved_impact,alarms_stage2,alarms_stage3,"
       "false_alarm_rate\n";
  int stealthy = 0;
  for (const auto& m : metrics) {
    f << m.seed << ',' << (m.stealthy ? 1 : 0) << ',' << m.theoretical_impact << ','
      << m.achieved_impact << ',' << m.alarms_stage2 << ',' << m.alarms_stage3 << ','
      << m.false_alarm_rate << '\n';
    stealthy += m.stealthy ? 1 : 0;
  }
  std::printf("run: %d seeds, stealthy %d/%d\n", nseeds, stealthy, nseeds);
  std::printf("wrote %s and per-seed directories under %s\n",
              join(out, "summary.csv").c_str(), out.c_str());
  return 0;
}

int cmd_report(const std::string& run_dir) {
  const sim::Metrics m = io::load_metrics(join(run_dir, "metrics.json"));
  const auto trace = io::load_trace_csv(join(run_dir, "trace.csv"));
  double T_set = 313.15;
  const std::string resolved = join(run_dir, "scenario_resolved.json");
  if (fs::exists(resolved)) T_set = io::load_scenario(resolved).T_set;
  print_metrics_table(m);
  write_fig_extracts(run_dir, trace, T_set, m.J_D);
  std::printf("wrote fig_temps.csv, fig_inputs.csv, fig_detector.csv under %s\n",
              run_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal-bench stealthy-attack laboratory"};
  app.require_subcommand(1);

  // identify
  std::string id_data, id_sidecar, id_init, id_out = ".";
  auto* identify = app.add_subcommand("identify", "Fit plant parameters from a CSV record");
  identify->add_option("data", id_data, "experiment CSV (t,Q1,Q2,TS1,TS2)")->required();
  identify->add_option("--sidecar", id_sidecar, "JSON sidecar with ambient temperature");
  identify->add_option("--init", id_init, "initial-guess params JSON");
  identify->add_option("--out", id_out, "output directory");

  // design
  std::string de_params, de_ctrl = "lqg", de_out = ".";
  auto* design = app.add_subcommand("design", "Synthesize a controller for the bench model");
  design->add_option("--params", de_params, "plant params JSON (default: built-in fit)");
  design->add_option("--controller", de_ctrl, "controller kind")
      ->check(CLI::IsMember({"lqg", "lqi"}));
  design->add_option("--out", de_out, "output directory");

  // tune
  std::string tu_det = "mewma", tu_out = ".";
  double tu_arl = 20.0, tu_beta = 0.2;
  std::uint64_t tu_seed = 0;
  auto* tune = app.add_subcommand("tune", "Resolve a detector threshold for an ARL target");
  tune->add_option("--detector", tu_det, "detector kind")
      ->check(CLI::IsMember({"chi2", "mewma"}));
  tune->add_option("--arl", tu_arl, "average run length target (steps)");
  tune->add_option("--beta", tu_beta, "MEWMA forgetting factor");
  tune->add_option("--seed", tu_seed, "Monte Carlo seed (0 = built-in default)");
  tune->add_option("--out", tu_out, "output directory");

  // shared run/plan options
  auto add_common = [](CLI::App* c, std::string& scen, std::uint64_t& seed, Overrides& ov,
                       std::string& out) {
    c->add_option("--scenario", scen, "scenario JSON")->required();
    c->add_option("--seed", seed, "replica seed (default: scenario's)");
    c->add_flag("--linear-truth", ov.linear_truth, "propagate the linear model as truth");
    c->add_option("--detector", ov.detector, "override detector kind")
        ->check(CLI::IsMember({"chi2", "mewma"}));
    c->add_option("--arl", ov.arl, "override ARL target (forces re-tune)");
    c->add_option("--inject-noise", ov.inject, "override injection variance");
    c->add_option("--out", out, "output directory");
  };

  // plan
  std::string pl_scen, pl_out = ".";
  std::uint64_t pl_seed = 0;
  Overrides pl_ov;
  auto* plan = app.add_subcommand("plan", "Design the attack for a scenario without running it");
  add_common(plan, pl_scen, pl_seed, pl_ov, pl_out);

  // run
  std::string ru_scen, ru_out = ".";
  std::uint64_t ru_seed = 0;
  int ru_nseeds = 1;
  Overrides ru_ov;
  auto* run = app.add_subcommand("run", "Execute a scenario end to end");
  add_common(run, ru_scen, ru_seed, ru_ov, ru_out);
  run->add_option("--seeds", ru_nseeds, "number of parallel replicas (seed, seed+1, ...)")
      ->check(CLI::PositiveNumber);

  // report
  std::string re_dir;
  auto* report = app.add_subcommand("report", "Summarize a finished run directory");
  report->add_option("run_dir", re_dir, "directory written by `run`")->required();

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(identify)) {
      return cmd_identify(id_data, id_sidecar, id_init, id_out);
    }
    if (app.got_subcommand(design)) return cmd_design(de_params, de_ctrl, de_out);
    if (app.got_subcommand(tune)) return cmd_tune(tu_det, tu_arl, tu_beta, tu_seed, tu_out);
    if (app.got_subcommand(plan)) {
      return cmd_plan(pl_scen, pl_seed, plan->count("--seed") > 0, pl_ov, pl_out);
    }
    if (app.got_subcommand(run)) {
      return cmd_run(ru_scen, ru_seed, run->count("--seed") > 0, ru_nseeds, ru_ov, ru_out);
    }
    if (app.got_subcommand(report)) return cmd_report(re_dir);
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
