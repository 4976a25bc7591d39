#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "wadc/environment.hpp"
#include "wadc/mlp.hpp"

namespace wadc {

/// Maps an observation to a normalized action.
using Policy = std::function<Vec(const Vec&)>;

/// Deterministic actor output, no exploration.
Policy actor_policy(Mlp actor);
/// Always K = 0.
Policy zero_policy(std::size_t action_size);

struct EvaluationSetup {
  std::shared_ptr<const GridModel> model;
  EnvConfig env;
  ControlSetup controls;
  std::optional<FaultScenario> scenario;  // nonlinear plant when set
};

struct EpisodeStart {
  std::uint64_t seed = 0;
  std::optional<double> phase;
};

struct EpisodeSummary {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  double total_return = 0.0;
  double energy = 0.0;  // P summed over every substep
  double settling_time = std::numeric_limits<double>::infinity();
  double peak_omega = 0.0;
  bool unstable = false;
};

/// One row of the per-step diagnostic log.
struct StepLog {
  double t = 0.0;
  double reward = 0.0;
  double energy = 0.0;
  bool scs_on = false;
  double max_real = 0.0;
  bool unstable = false;
};

struct EpisodeRecord {
  EpisodeSummary summary;
  std::vector<SubstepRecord> trace;
  std::vector<StepLog> steps;
};

/// First time after which max_i |omega_i| stays below `fraction` of its
/// peak. Infinite when the last sample is still above the band.
double settling_time(const std::vector<SubstepRecord>& trace, double fraction = 1e-3);

/// Runs one episode without exploration or learning.
EpisodeRecord run_episode(const EvaluationSetup& setup, const Policy& policy, const EpisodeStart& start,
                          bool keep_trace = false);

/// Episodes run on up to `threads` workers; results keep the order of `starts`.
std::vector<EpisodeSummary> evaluate_policy(const EvaluationSetup& setup, const Policy& policy,
                                            const std::vector<EpisodeStart>& starts,
                                            std::size_t threads = 1);

/// Runs `count` jobs on up to `threads` workers. Each job writes only its own
/// result slot, so the outcome does not depend on scheduling.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& job);

}  // namespace wadc
