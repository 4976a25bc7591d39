#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "wadc/ddpg.hpp"
#include "wadc/environment.hpp"
#include "wadc/grid_model.hpp"
#include "wadc/modal.hpp"
#include "wadc/model_io.hpp"

using namespace wadc;

namespace {

std::shared_ptr<const GridModel> three_machine() {
  static const auto model =
      std::make_shared<const GridModel>(build_model(load_model_file(std::string(WADC_DATA_DIR) + "/three_machine.json")));
  return model;
}

}  // namespace

static void BM_SimulateLinear(benchmark::State& state) {
  const auto model = three_machine();
  Vec x0 = Vec::Zero(6);
  x0(0) = 0.1;
  const auto steps = static_cast<std::size_t>(state.range(0));
  const Vec zero = Vec::Zero(static_cast<Eigen::Index>(model->p));
  for (auto _ : state) {
    auto traj = simulate_linear(*model, x0, [&](std::size_t, const SystemState&) { return zero; }, 0.01, steps, 1);
    benchmark::DoNotOptimize(traj.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateLinear)->Arg(400)->Arg(4000);

static void BM_Dmd(benchmark::State& state) {
  const auto model = three_machine();
  const auto W = state.range(0);
  const Mat Ad = (model->A * model->dt).exp();
  SnapshotWindow w{Mat(6, W + 1), model->dt};
  w.snapshots.col(0) << 0.05, -0.03, 0.02, 0.01, 0.04, -0.02;
  for (Eigen::Index k = 1; k <= W; ++k) w.snapshots.col(k) = Ad * w.snapshots.col(k - 1);
  for (auto _ : state) benchmark::DoNotOptimize(dmd_analyze(w));
}
BENCHMARK(BM_Dmd)->Arg(40)->Arg(100);

static void BM_EnvStepExact(benchmark::State& state) {
  const auto model = three_machine();
  ControlSetup controls;
  controls.pss.assign(model->p, PssParams{});
  controls.scs.reference = model->reference;
  EnvConfig cfg;
  cfg.episode_steps = 1u << 30;
  Environment env(model, cfg, controls);
  env.reset(1);
  const std::vector<double> action(env.action_size(), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(env.step(action));
}
BENCHMARK(BM_EnvStepExact);

static void BM_DdpgUpdate(benchmark::State& state) {
  DdpgConfig cfg;
  cfg.observation_size = 6;
  cfg.action_size = 12;
  cfg.actor_hidden = static_cast<std::size_t>(state.range(0));
  cfg.critic_hidden = static_cast<std::size_t>(state.range(0));
  cfg.optimizer = OptimizerKind::adam;
  DdpgAgent agent(cfg, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<Transition> batch(32);
  for (auto& t : batch) {
    t.state = Vec(6);
    t.next_state = Vec(6);
    t.action = Vec(12);
    for (auto& x : t.state) x = g(rng);
    for (auto& x : t.next_state) x = g(rng);
    for (auto& x : t.action) x = g(rng);
    t.reward = g(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(agent.update(batch));
    agent.soft_update_targets();
  }
}
BENCHMARK(BM_DdpgUpdate)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
