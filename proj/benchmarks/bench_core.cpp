// Micro-benchmarks for the hot paths: plant integration, Riccati synthesis,
// detector updates, attack-stage steps, and a full scenario run.

#include <benchmark/benchmark.h>

#include "tlab/attack.hpp"
#include "tlab/detect.hpp"
#include "tlab/plant.hpp"
#include "tlab/rng.hpp"
#include "tlab/sim.hpp"
#include "tlab/synthesis.hpp"

using namespace tlab;

namespace {

plant::DiscreteModel bench_model() {
  const auto p = plant::fitted_params();
  const auto ss = plant::steady_state(p, 294.15, 313.15);
  return plant::discretize(plant::linearize(p, ss), 1.0);
}

attack::AttackerKnowledge bench_knowledge(bool integral) {
  const plant::DiscreteModel dm = bench_model();
  const synthesis::Weights w;
  attack::AttackerKnowledge know;
  know.ctrl = integral ? synthesis::design_lqi(dm, w) : synthesis::design_lqg(dm, w);
  know.model = dm;
  know.det.variant = detect::Variant::mewma;
  know.det.J_D = 4.4434;
  return know;
}

void BM_PlantStep(benchmark::State& state) {
  const auto p = plant::fitted_params();
  plant::State x;
  x << 320.0, 330.0, 315.0, 322.0;
  const plant::Input u(30.0, 40.0);
  for (auto _ : state) {
    x = plant::step(p, x, u, 1.0, 294.15);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_PlantStep);

void BM_DareSolve(benchmark::State& state) {
  const plant::DiscreteModel dm = bench_model();
  const Mat Q = 10.0 * Mat::Identity(4, 4);
  const Mat R = 2.0 * Mat::Identity(2, 2);
  for (auto _ : state) {
    auto res = synthesis::solve_dare(dm.A, dm.B, Q, R);
    benchmark::DoNotOptimize(res.P);
  }
}
BENCHMARK(BM_DareSolve);

void BM_LqgSynthesis(benchmark::State& state) {
  const plant::DiscreteModel dm = bench_model();
  const synthesis::Weights w;
  for (auto _ : state) {
    auto ctrl = synthesis::design_lqg(dm, w);
    benchmark::DoNotOptimize(ctrl.rho_Ac);
  }
}
BENCHMARK(BM_LqgSynthesis);

void BM_DetectorStep(benchmark::State& state) {
  detect::DetectorConfig cfg;
  cfg.variant = detect::Variant::mewma;
  cfg.J_D = 4.4434;
  detect::DetectorState st = detect::make_state(cfg);
  Rng rng(3);
  for (auto _ : state) {
    const Vec2 r(rng.gaussian(), rng.gaussian());
    auto out = detect::detector_step(cfg, st, r);
    benchmark::DoNotOptimize(out.y_D);
  }
}
BENCHMARK(BM_DetectorStep);

void BM_Stage1Listen(benchmark::State& state) {
  const auto know = bench_knowledge(false);
  attack::ControllerEstimate est =
      attack::make_stage1_estimate(know, attack::Stage1Mode::open_loop);
  Rng rng(5);
  for (auto _ : state) {
    const Vec2 y(rng.gaussian(), rng.gaussian());
    attack::stage1_step(know, est, y);
    benchmark::DoNotOptimize(est.x_c_hat);
  }
}
BENCHMARK(BM_Stage1Listen);

void BM_Stage2Step(benchmark::State& state) {
  const auto know = bench_knowledge(false);
  attack::Stage2State st;
  Rng rng(7);
  const attack::Stage2Options opts;
  int j = 0;
  for (auto _ : state) {
    auto out = attack::stage2_step(know, st, rng, j, opts);
    benchmark::DoNotOptimize(out.a);
    j = (j + 1) % 120;
    if (j == 0) st = attack::Stage2State{};
  }
}
BENCHMARK(BM_Stage2Step);

void BM_Stage3Solve(benchmark::State& state) {
  const auto know = bench_knowledge(false);
  const auto prob = attack::build_impact_problem(know, 1800);
  const attack::Stage3Options opt;
  for (auto _ : state) {
    auto sol = attack::solve_worst_case(prob, know.det, opt);
    benchmark::DoNotOptimize(sol.value);
  }
}
BENCHMARK(BM_Stage3Solve);

void BM_NominalScenario(benchmark::State& state) {
  sim::ScenarioConfig cfg;
  cfg.kind = synthesis::ControllerKind::lqg;
  cfg.detector.variant = detect::Variant::mewma;
  cfg.detector.J_D = 4.4434;
  cfg.timeline = sim::Timeline{60, 30, 0, 200};
  cfg.calibration.steps = 400;
  cfg.calibration.discard = 100;
  for (auto _ : state) {
    auto res = sim::run_scenario(cfg, 1);
    benchmark::DoNotOptimize(res.metrics.false_alarm_rate);
  }
}
BENCHMARK(BM_NominalScenario);

}  // namespace

BENCHMARK_MAIN();
