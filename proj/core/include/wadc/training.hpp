#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "wadc/checkpoint.hpp"
#include "wadc/csv.hpp"
#include "wadc/ddpg.hpp"
#include "wadc/environment.hpp"
#include "wadc/replay_buffer.hpp"

namespace wadc {

struct TrainingConfig {
  std::size_t max_episodes = 5000;
  std::size_t batch_size = 32;
  ReplayConfig replay;
  DdpgConfig agent;  // sizes are filled from the environment
  double explore_start = 0.2;
  double explore_end = 0.02;
  double beta_start = 0.4;
  double beta_end = 1.0;
  std::size_t checkpoint_every = 100;

  void validate() const;
};

struct EpisodeLog {
  std::size_t episode = 0;
  std::size_t steps = 0;
  double total_return = 0.0;
  double mean_reward = 0.0;
  bool terminated_unstable = false;
};

/// `episode,steps,return,mean_reward,terminated_unstable`
csv::Writer training_log_table(const std::vector<EpisodeLog>& log);

/// DDPG with prioritized replay on one environment.
///
/// Episode e draws its exploration and minibatch randomness from
/// derive_seed(seed, train_episode, e) and its initial state from
/// derive_seed(seed, env_reset, e), so a run restored at an episode boundary
/// continues exactly like an uninterrupted one.
class TrainingSession {
public:
  TrainingSession(std::shared_ptr<const GridModel> model, EnvConfig env, ControlSetup controls,
                  TrainingConfig config, std::uint64_t seed);

  EpisodeLog run_episode();
  bool finished() const noexcept { return episode_ >= config_.max_episodes; }
  std::size_t episodes_done() const noexcept { return episode_; }

  Checkpoint checkpoint() const;
  /// Restores agent, optimizers, replay and counters. The checkpoint must come
  /// from a session with the same seed and network shapes.
  void restore(const Checkpoint& ckpt);

  const DdpgAgent& agent() const noexcept { return agent_; }
  const PrioritizedReplay& replay() const noexcept { return replay_; }
  const TrainingConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }

private:
  double schedule(double from, double to) const;

  Environment env_;
  TrainingConfig config_;
  std::uint64_t seed_;
  DdpgAgent agent_;
  PrioritizedReplay replay_;
  std::size_t episode_ = 0;
};

/// Actor network stored by a training checkpoint.
Mlp load_actor(const Checkpoint& ckpt);

}  // namespace wadc
