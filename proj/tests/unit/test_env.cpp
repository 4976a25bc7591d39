#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <memory>
#include <random>

#include <Eigen/Eigenvalues>

#include "support.hpp"
#include "wadc/environment.hpp"
#include "wadc/evaluation.hpp"

using namespace wadc;

namespace {

std::shared_ptr<const GridModel> three_machine_model() {
  const auto d = test::three_machine();
  return std::make_shared<GridModel>(build_linear_model(d.machines, d.network, d.dt));
}

ControlSetup default_controls(const GridModel& m) {
  ControlSetup c;
  c.pss.assign(m.p, PssParams{});
  c.scs.reference = m.reference;
  return c;
}

// x'' + 2 x' + 10 x = u, open-loop pair -1 +- 3j, observation (x, x').
std::shared_ptr<const GridModel> oscillator(double w0sq = 10.0, double d = 2.0) {
  Mat A(2, 2);
  A << 0.0, 1.0, -w0sq, -d;
  Mat B(2, 1);
  B << 0.0, 1.0;
  return std::make_shared<GridModel>(GridModel::from_matrices(A, B, B, 1, 0.01));
}

ControlSetup silent_pss(std::size_t p) {
  ControlSetup c;
  PssParams off;
  off.gain = 0.0;
  c.pss.assign(p, off);
  c.scs.threshold = 1e-300;
  return c;
}

bool same_bits(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a(i)) != std::bit_cast<std::uint64_t>(b(i))) return false;
  return true;
}

}  // namespace

TEST_CASE("reset") {
  const auto model = three_machine_model();
  EnvConfig cfg;
  SUBCASE("zero scale gives a zero observation") {
    cfg.init_scale = 0.0;
    Environment env(model, cfg, default_controls(*model));
    CHECK(env.reset(1) == Vec::Zero(6));
  }
  SUBCASE("mode-aligned start has the configured norm") {
    Environment env(model, cfg, default_controls(*model));
    for (std::uint64_t s = 0; s < 20; ++s) {
      env.reset(s);
      CHECK(std::abs(env.initial_deviation().norm() - 0.1) < 1e-12);
    }
    env.reset(3, 0.0);
    // zero phase: the real part of the normalized target eigenvector
    const CVec& phi = env.target_mode().right;
    Eigen::Index imax = 0;
    phi.cwiseAbs().maxCoeff(&imax);
    const Vec shape = (phi * (std::abs(phi(imax)) / phi(imax))).real();
    CHECK((env.initial_deviation() - 0.1 * shape / shape.norm()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("gaussian start when not mode-aligned") {
    cfg.mode_aligned = false;
    Environment env(model, cfg, default_controls(*model));
    const Vec a = env.reset(5);
    const Vec b = env.reset(6);
    CHECK_FALSE(same_bits(a, b));
  }
  SUBCASE("same seed, same observation") {
    Environment env(model, cfg, default_controls(*model));
    const Vec a = env.reset(11);
    const Vec b = env.reset(11);
    CHECK(same_bits(a, b));
  }
  SUBCASE("config validation") {
    cfg.action_repeat = 1;
    CHECK_THROWS_AS(Environment(model, cfg, default_controls(*model)), InvalidArgument);
    cfg = {};
    cfg.penalty = 0.0;
    CHECK_THROWS_AS(Environment(model, cfg, default_controls(*model)), InvalidArgument);
    cfg = {};
    cfg.alpha = -1.0;
    CHECK_THROWS_AS(Environment(model, cfg, default_controls(*model)), InvalidArgument);
  }
}

TEST_CASE("eigenvalue reward hand cases") {
  CHECK(eigenvalue_reward({{-1, 2}, {-1, -2}}, {{-1, 3}, {-1, -3}}, 1.0, 1.0, RewardForm::printed) == -4.0);
  // printed form: Re^2 - Re_hat^2, difference form: (Re - Re_hat)^2
  CHECK(eigenvalue_reward({{-2, 1}}, {{-1, 1}}, 1.0, 0.0, RewardForm::printed) == doctest::Approx(-3.0));
  CHECK(eigenvalue_reward({{-2, 1}}, {{-1, 1}}, 1.0, 0.0, RewardForm::difference) == doctest::Approx(-1.0));
  // unmatched closed-loop oscillatory modes count in full
  CHECK(eigenvalue_reward({{-1, 2}, {-3, 5}}, {{-1, 2}}, 1.0, 1.0, RewardForm::printed) == doctest::Approx(-(4.0 + 9.0 + 25.0)));
  // real modes are never charged
  CHECK(eigenvalue_reward({{-1, 0}, {-7, 0}}, {{-1, 3}}, 1.0, 1.0, RewardForm::printed) == 0.0);
}

TEST_CASE("step in exact mode") {
  EnvConfig cfg;
  cfg.eigen_source = EigenSource::exact;
  cfg.noise_std = 0.0;
  cfg.alpha = cfg.beta = 1.0;

  SUBCASE("K = 0 reproduces the open-loop reward every step") {
    const auto model = three_machine_model();
    cfg.episode_steps = 10;
    Environment env(model, cfg, default_controls(*model));
    double expected = 0.0;
    for (const auto& l : env.open_loop_spectrum())
      if (l.imag() > 1e-9) expected -= l.imag() * l.imag();
    env.reset(1);
    const std::vector<double> zero(env.action_size(), 0.0);
    for (int k = 0; k < 10; ++k) {
      const auto r = env.step(zero);
      CHECK(r.reward == doctest::Approx(expected).epsilon(1e-12));
      CHECK(r.done == (k == 9));
    }
  }
  SUBCASE("the -4 example") {
    Environment env(oscillator(), cfg, silent_pss(1));
    env.reset(1);
    // K = (-5, 0) turns -1 +- 3j into -1 +- 2j
    const std::vector<double> action{-0.5, 0.0};
    const auto r = env.step(action);
    CHECK(r.reward == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK_FALSE(r.done);
  }
  SUBCASE("instability gives the penalty and ends the episode") {
    cfg.k_max = 20.0;
    Environment env(oscillator(), cfg, silent_pss(1));
    env.reset(1);
    // K = (-10.5, -1.5): s^2 + 0.5 s - 0.5 = (s - 0.5)(s + 1)
    const std::vector<double> action{-0.525, -0.075};
    const auto r = env.step(action);
    CHECK(r.reward == -300.0);
    CHECK(r.done);
    CHECK(r.diagnostics.unstable);
    CHECK(r.diagnostics.max_real == doctest::Approx(0.5));
    CHECK_THROWS_WITH_AS(env.step(action), "episode finished", InvalidArgument);
    env.reset(2);
    CHECK_NOTHROW(env.step(std::vector<double>{0.0, 0.0}));
  }
  SUBCASE("actions are validated") {
    Environment env(oscillator(), cfg, silent_pss(1));
    env.reset(1);
    CHECK_THROWS_AS(env.step(std::vector<double>{1.5, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(env.step(std::vector<double>{0.0}), InvalidArgument);
  }
}

TEST_CASE("reward monotonicity under increasing damping") {
  EnvConfig cfg;
  cfg.eigen_source = EigenSource::exact;
  cfg.noise_std = 0.0;
  cfg.alpha = 0.0;
  cfg.beta = 1.0;
  cfg.episode_steps = 1000;
  const double w0sq = 16.0, d = 0.4;
  Environment env(oscillator(w0sq, d), cfg, silent_pss(1));
  env.reset(1);
  double previous = -1e300, previous_im = 1e300;
  // damping gains up to critical damping (d + k = 2 w0)
  for (double k = 0.0; k <= 2.0 * std::sqrt(w0sq) - d + 1.0; k += 0.1) {
    const auto r = env.step_gain((Mat(1, 2) << 0.0, k).finished());
    double im = 0.0;
    for (const auto& l : r.diagnostics.spectrum) im = std::max(im, l.imag());
    CHECK(im <= previous_im + 1e-12);
    CHECK(r.reward >= previous - 1e-12);
    previous = r.reward;
    previous_im = im;
  }
  CHECK(previous == 0.0);
}

TEST_CASE("dmd and exact rewards agree on noiseless linear episodes") {
  // The wide-area input is held over each substep, so the window evolves under
  // the sampled closed loop Ad - B1d K T rather than exp((A - B1 K T) dt). The
  // two spectra differ by O(dt |K|); agreement to 1e-3 holds for small gains.
  const auto model = three_machine_model();
  const auto zoh = DiscreteModel::zero_order_hold(*model);
  EnvConfig cfg;
  cfg.noise_std = 0.0;
  cfg.alpha = cfg.beta = 1.0;
  cfg.episode_steps = 5;
  std::mt19937_64 rng(12);
  for (std::size_t W : {100, 150}) {
    for (double bound : {0.001, 0.05}) {
      std::uniform_real_distribution<double> u(-bound, bound);
      cfg.action_repeat = W;
      auto exact_cfg = cfg;
      exact_cfg.eigen_source = EigenSource::exact;
      auto dmd_cfg = cfg;
      dmd_cfg.eigen_source = EigenSource::dmd;
      Environment exact(model, exact_cfg, silent_pss(model->p));
      Environment dmd(model, dmd_cfg, silent_pss(model->p));
      exact.reset(4);
      dmd.reset(4);
      for (int k = 0; k < 5; ++k) {
        std::vector<double> a(exact.action_size());
        for (auto& v : a) v = u(rng);
        const auto re = exact.step(a);
        const auto rd = dmd.step(a);
        REQUIRE_FALSE(re.diagnostics.unstable);

        // oracle for the sampled loop: eigenvalues of the discrete propagator
        const Mat K = unflatten_gain(a, model->p, model->observation_size(), cfg.k_max);
        const Mat Md = zoh.Ad - zoh.B1d * lift_gain(*model, K);
        Eigen::EigenSolver<Mat> es(Md);
        Spectrum sampled;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
          const Complex mu = es.eigenvalues()(i);
          if (std::abs(mu - 1.0) > 1e-9) sampled.push_back(std::log(mu) / model->dt);
        }
        sort_spectrum(sampled);
        const double r_sampled = eigenvalue_reward(sampled, exact.open_loop_spectrum(), 1.0, 1.0, RewardForm::printed);
        CHECK(std::abs(rd.reward - r_sampled) < 1e-6);
        if (bound <= 0.001) CHECK(std::abs(re.reward - rd.reward) < 1e-3);
      }
    }
  }
}

TEST_CASE("episodes are deterministic") {
  const auto model = three_machine_model();
  EnvConfig cfg;
  cfg.noise_std = 0.01;
  cfg.episode_steps = 8;
  cfg.eigen_source = EigenSource::dmd;
  Environment a(model, cfg, default_controls(*model)), b(model, cfg, default_controls(*model));
  a.reset(42);
  b.reset(42);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int k = 0; k < 8; ++k) {
    std::vector<double> act(a.action_size());
    for (auto& v : act) v = u(rng);
    const auto ra = a.step(act), rb = b.step(act);
    CHECK(std::bit_cast<std::uint64_t>(ra.reward) == std::bit_cast<std::uint64_t>(rb.reward));
    CHECK(same_bits(ra.observation, rb.observation));
    CHECK(ra.done == rb.done);
    CHECK(ra.diagnostics.energy_sum == rb.diagnostics.energy_sum);
  }
}

TEST_CASE("switching and delays inside the environment") {
  const auto model = three_machine_model();
  EnvConfig cfg;
  cfg.noise_std = 0.0;
  cfg.episode_steps = 3;
  cfg.eigen_source = EigenSource::dmd;
  auto controls = default_controls(*model);
  SUBCASE("threshold above the energy keeps the wide-area path off") {
    controls.scs.threshold = 1e6;
    Environment env(model, cfg, controls);
    env.reset(1);
    const auto r = env.step(std::vector<double>(env.action_size(), 0.5));
    CHECK(r.diagnostics.scs_on_substeps == 0);
    controls.wide_area = false;
    controls.scs.threshold = 1e-9;
    Environment pss_only(model, cfg, controls);
    pss_only.reset(1);
    const auto r2 = pss_only.step(std::vector<double>(env.action_size(), 0.5));
    CHECK(r2.diagnostics.energy_sum == r.diagnostics.energy_sum);
  }
  SUBCASE("a delayed observation lags the plant") {
    controls.delay = 0.35;
    cfg.init_scale = 0.1;
    Environment env(model, cfg, controls);
    const Vec first = env.reset(1);
    const auto r = env.step(std::vector<double>(env.action_size(), 0.0));
    // 40 substeps with a 35-sample lag: the agent sees the state 5 substeps in
    CHECK_FALSE(same_bits(r.observation, first));
    controls.delay = 0.0;
    Environment fresh(model, cfg, controls);
    fresh.reset(1);
    fresh.set_recording(true);
    fresh.step(std::vector<double>(env.action_size(), 0.0));
    const auto& rec = fresh.trace()[5];
    Vec expected(6);
    expected << (rec.theta.array() - rec.theta(2)).matrix(), rec.omega;
    CHECK((r.observation - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("nonlinear plant with a fault") {
  const auto d = test::three_machine();
  const auto model = three_machine_model();
  EnvConfig cfg;
  cfg.noise_std = 0.0;
  cfg.episode_steps = 10;
  cfg.eigen_source = EigenSource::dmd;
  Environment env(model, cfg, default_controls(*model));
  auto s = FaultScenario::none(d.network);
  s.start = 0.1;
  s.near_clear = 0.2;
  s.remote_clear = 0.5;
  s.fault_on.susceptance(1, 2) = s.fault_on.susceptance(2, 1) = 5.0;
  env.use_nonlinear(s);
  CHECK(env.nonlinear());
  cfg.init_scale = 0.0;
  Environment quiet(model, cfg, default_controls(*model));
  quiet.use_nonlinear(FaultScenario::none(d.network));
  CHECK(quiet.reset(1) == Vec::Zero(6));
  const auto r = quiet.step(std::vector<double>(quiet.action_size(), 0.3));
  CHECK(r.observation.cwiseAbs().maxCoeff() < 1e-10);

  env.reset(1);
  env.set_recording(true);
  bool done = false;
  while (!done) done = env.step(std::vector<double>(env.action_size(), 0.0)).done;
  CHECK(env.trace().size() == 400);
  CHECK(env.trace()[10].t == doctest::Approx(0.1));
}

TEST_CASE("evaluation episodes") {
  const auto model = three_machine_model();
  EvaluationSetup setup{model, {}, default_controls(*model), std::nullopt};
  setup.env.noise_std = 0.0;
  setup.env.eigen_source = EigenSource::dmd;
  SUBCASE("zero-width episode") {
    setup.env.episode_steps = 0;
    const auto rec = run_episode(setup, zero_policy(12), {1, std::nullopt}, true);
    CHECK(rec.summary.steps == 0);
    CHECK(rec.summary.energy == 0.0);
    CHECK(rec.steps.empty());
  }
  SUBCASE("summaries are independent of the thread count") {
    setup.env.episode_steps = 5;
    std::vector<EpisodeStart> starts;
    for (std::uint64_t i = 0; i < 6; ++i) starts.push_back({i, std::nullopt});
    const auto one = evaluate_policy(setup, zero_policy(12), starts, 1);
    const auto four = evaluate_policy(setup, zero_policy(12), starts, 4);
    REQUIRE(one.size() == four.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(one[i].energy == four[i].energy);
      CHECK(one[i].total_return == four[i].total_return);
      CHECK(one[i].energy > 0.0);
    }
  }
  SUBCASE("settling time") {
    CHECK(settling_time({}) == 0.0);
    std::vector<SubstepRecord> trace;
    for (int k = 0; k < 10; ++k) {
      SubstepRecord r;
      r.t = 0.1 * k;
      r.omega = Vec::Constant(2, k < 6 ? 1.0 / (k + 1) : 1e-4);
      trace.push_back(r);
    }
    // peak 1, band 1e-3: the last sample outside is k = 5
    CHECK(settling_time(trace) == doctest::Approx(0.6));
    trace.back().omega(1) = 0.5;
    CHECK(std::isinf(settling_time(trace)));
  }
}
