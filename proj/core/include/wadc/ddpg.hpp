#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wadc/mlp.hpp"
#include "wadc/replay_buffer.hpp"

namespace wadc {

struct DdpgConfig {
  std::size_t observation_size = 0;
  std::size_t action_size = 0;
  std::size_t actor_hidden = 64;
  std::size_t critic_hidden = 64;
  double gamma = 0.95;
  double tau = 0.01;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  OptimizerKind optimizer = OptimizerKind::sgd;

  void validate() const;
};

/// a = tanh(W_o relu(W_h s + b_h) + b_o)
Vec actor_forward(const Mlp& actor, const Vec& state);
/// Q = W_o relu(W_h [s; a] + b_h) + b_o, no output activation.
double critic_forward(const Mlp& critic, const Vec& state, const Vec& action);

struct CriticGradient {
  double loss = 0.0;
  Vec gradient;
  std::vector<double> td_error;  // y - Q(s, a)
};

struct ActorGradient {
  double objective = 0.0;  // mean Q(s, mu(s))
  Vec gradient;            // d objective / d actor parameters
};

struct UpdateResult {
  double critic_loss = 0.0;
  std::vector<double> priorities;  // |y - Q(s, a)| before the update
};

/// Actor, critic and their slowly tracking target copies.
class DdpgAgent {
public:
  DdpgAgent(const DdpgConfig& config, std::uint64_t seed);

  Vec act(const Vec& state) const { return actor_forward(actor_, state); }

  /// Bootstrapped targets r + (1 - done) gamma Q'(s', mu'(s')).
  std::vector<double> targets(std::span<const Transition> batch) const;

  /// Weighted mean squared TD error and its gradient in the critic parameters.
  CriticGradient critic_gradient(std::span<const Transition> batch,
                                 std::span<const double> weights = {}) const;
  /// Deterministic policy gradient through the critic's action input.
  ActorGradient actor_gradient(std::span<const Transition> batch) const;

  /// One critic descent step then one actor ascent step. Throws
  /// DivergenceError on a non-finite loss.
  UpdateResult update(std::span<const Transition> batch, std::span<const double> weights = {});

  void soft_update_targets();

  const DdpgConfig& config() const noexcept { return config_; }
  Mlp& actor() noexcept { return actor_; }
  Mlp& critic() noexcept { return critic_; }
  Mlp& target_actor() noexcept { return target_actor_; }
  Mlp& target_critic() noexcept { return target_critic_; }
  const Mlp& actor() const noexcept { return actor_; }
  const Mlp& critic() const noexcept { return critic_; }
  const Mlp& target_actor() const noexcept { return target_actor_; }
  const Mlp& target_critic() const noexcept { return target_critic_; }
  Optimizer& actor_optimizer() noexcept { return actor_opt_; }
  Optimizer& critic_optimizer() noexcept { return critic_opt_; }
  const Optimizer& actor_optimizer() const noexcept { return actor_opt_; }
  const Optimizer& critic_optimizer() const noexcept { return critic_opt_; }
  std::uint64_t update_count() const noexcept { return updates_; }
  void set_update_count(std::uint64_t n) noexcept { updates_ = n; }

private:
  DdpgConfig config_;
  Mlp actor_;
  Mlp critic_;
  Mlp target_actor_;
  Mlp target_critic_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
  std::uint64_t updates_ = 0;
};

/// Adds i.i.d. Gaussian noise to each component and clips to [-1, 1].
Vec explore(const Vec& action, double noise_std, std::mt19937_64& rng);

}  // namespace wadc
