#include "wadc/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace wadc {

Policy actor_policy(Mlp actor) {
  return [net = std::move(actor)](const Vec& obs) { return net.forward(obs); };
}

Policy zero_policy(std::size_t action_size) {
  return [action_size](const Vec&) { return Vec::Zero(static_cast<Eigen::Index>(action_size)).eval(); };
}

double settling_time(const std::vector<SubstepRecord>& trace, double fraction) {
  if (trace.empty()) return 0.0;
  double peak = 0.0;
  for (const auto& r : trace) peak = std::max(peak, r.omega.cwiseAbs().maxCoeff());
  if (peak == 0.0) return trace.front().t;
  const double band = fraction * peak;
  // Walk back to the last sample outside the band.
  std::size_t k = trace.size();
  while (k > 0 && trace[k - 1].omega.cwiseAbs().maxCoeff() < band) --k;
  if (k == trace.size()) return std::numeric_limits<double>::infinity();
  return trace[k].t;
}

EpisodeRecord run_episode(const EvaluationSetup& setup, const Policy& policy, const EpisodeStart& start,
                          bool keep_trace) {
  Environment env(setup.model, setup.env, setup.controls);
  if (setup.scenario) env.use_nonlinear(*setup.scenario);
  env.set_recording(true);
  Vec obs = start.phase ? env.reset(start.seed, *start.phase) : env.reset(start.seed);

  EpisodeRecord rec;
  rec.summary.seed = start.seed;
  const double window = static_cast<double>(setup.env.action_repeat) * setup.model->dt;
  for (std::size_t k = 0; k < setup.env.episode_steps && !env.done(); ++k) {
    const Vec action = setup.controls.wide_area ? policy(obs) : Vec::Zero(static_cast<Eigen::Index>(env.action_size()));
    const Vec clipped = action.cwiseMax(-1.0).cwiseMin(1.0);
    const auto result = env.step(std::span<const double>(clipped.data(), static_cast<std::size_t>(clipped.size())));
    const auto& d = result.diagnostics;
    rec.summary.total_return += result.reward;
    rec.summary.energy += d.energy_sum;
    rec.summary.unstable = rec.summary.unstable || d.unstable;
    ++rec.summary.steps;
    rec.steps.push_back({static_cast<double>(k) * window, result.reward, d.energy_sum, d.scs_on, d.max_real, d.unstable});
    obs = result.observation;
    if (result.done) break;
  }
  std::vector<SubstepRecord> trace = env.trace();
  for (const auto& r : trace) rec.summary.peak_omega = std::max(rec.summary.peak_omega, r.omega.cwiseAbs().maxCoeff());
  rec.summary.settling_time = rec.summary.unstable ? std::numeric_limits<double>::infinity() : settling_time(trace);
  if (keep_trace) rec.trace = std::move(trace);
  return rec;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_lock);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<EpisodeSummary> evaluate_policy(const EvaluationSetup& setup, const Policy& policy,
                                            const std::vector<EpisodeStart>& starts, std::size_t threads) {
  std::vector<EpisodeSummary> out(starts.size());
  parallel_for(starts.size(), threads, [&](std::size_t i) { out[i] = run_episode(setup, policy, starts[i]).summary; });
  return out;
}

}  // namespace wadc
