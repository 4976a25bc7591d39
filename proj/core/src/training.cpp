#include "wadc/training.hpp"

#include <algorithm>

#include "wadc/seed.hpp"

namespace wadc {

void TrainingConfig::validate() const {
  if (batch_size == 0) throw InvalidArgument("minibatch size must be positive");
  if (replay.capacity < batch_size) throw InvalidArgument("replay capacity must hold a minibatch");
  if (!(replay.alpha >= 0.0) || !(replay.epsilon >= 0.0)) throw InvalidArgument("invalid replay constants");
  if (!(explore_start >= 0.0 && explore_end >= 0.0)) throw InvalidArgument("exploration noise must be non-negative");
  if (!(beta_start >= 0.0 && beta_end >= 0.0)) throw InvalidArgument("importance exponent must be non-negative");
}

csv::Writer training_log_table(const std::vector<EpisodeLog>& log) {
  csv::Writer w({"episode", "steps", "return", "mean_reward", "terminated_unstable"});
  for (const auto& e : log)
    w.add_row(std::vector<double>{static_cast<double>(e.episode), static_cast<double>(e.steps), e.total_return,
                                  e.mean_reward, e.terminated_unstable ? 1.0 : 0.0});
  return w;
}

namespace {

DdpgConfig sized(DdpgConfig agent, const Environment& env) {
  agent.observation_size = env.observation_size();
  agent.action_size = env.action_size();
  return agent;
}

}  // namespace

TrainingSession::TrainingSession(std::shared_ptr<const GridModel> model, EnvConfig env, ControlSetup controls,
                                 TrainingConfig config, std::uint64_t seed)
    : env_(std::move(model), env, std::move(controls)),
      config_(config),
      seed_(seed),
      agent_(sized(config.agent, env_), seed),
      replay_(config.replay) {
  config_.validate();
  config_.agent = agent_.config();
}

double TrainingSession::schedule(double from, double to) const {
  if (config_.max_episodes <= 1) return from;
  const double f = static_cast<double>(episode_) / static_cast<double>(config_.max_episodes - 1);
  return from + (to - from) * std::min(f, 1.0);
}

EpisodeLog TrainingSession::run_episode() {
  if (finished()) throw InvalidArgument("training already finished");
  std::mt19937_64 rng(derive_seed(seed_, SeedStream::train_episode, episode_));
  const double noise = schedule(config_.explore_start, config_.explore_end);
  const double beta = schedule(config_.beta_start, config_.beta_end);

  EpisodeLog log;
  log.episode = episode_;
  Vec obs = env_.reset(derive_seed(seed_, SeedStream::env_reset, episode_));
  bool done = env_.config().episode_steps == 0;
  while (!done) {
    const Vec action = explore(agent_.act(obs), noise, rng);
    const auto result = env_.step(std::span<const double>(action.data(), static_cast<std::size_t>(action.size())));
    replay_.add({obs, action, result.reward, result.observation, result.done, 1.0});
    ++log.steps;
    log.total_return += result.reward;
    log.terminated_unstable = result.diagnostics.unstable;
    done = result.done;
    obs = result.observation;

    if (replay_.size() >= config_.batch_size) {
      const auto sample = replay_.sample(config_.batch_size, beta, rng);
      const auto update = agent_.update(sample.batch, sample.weights);
      replay_.update_priorities(sample.indices, update.priorities);
      agent_.soft_update_targets();
    }
  }
  log.mean_reward = log.steps ? log.total_return / static_cast<double>(log.steps) : 0.0;
  ++episode_;
  return log;
}

namespace {

void store_optimizer(Checkpoint& c, const std::string& prefix, const Optimizer& opt) {
  c.set_scalar(prefix + ".steps", static_cast<double>(opt.steps));
  if (opt.kind() == OptimizerKind::adam) {
    c.put_vector(prefix + ".first_moment", opt.first_moment);
    c.put_vector(prefix + ".second_moment", opt.second_moment);
  }
}

void load_optimizer(const Checkpoint& c, const std::string& prefix, Optimizer& opt) {
  opt.steps = static_cast<std::uint64_t>(c.scalar(prefix + ".steps"));
  if (opt.kind() == OptimizerKind::adam) {
    const Vec m = c.vector(prefix + ".first_moment");
    const Vec v = c.vector(prefix + ".second_moment");
    if (m.size() != opt.first_moment.size() || v.size() != opt.second_moment.size())
      throw ConfigError("checkpoint optimizer state does not match the network");
    opt.first_moment = m;
    opt.second_moment = v;
  }
}

}  // namespace

Checkpoint TrainingSession::checkpoint() const {
  Checkpoint c;
  c.set_meta("seed", std::to_string(seed_));
  c.set_meta("optimizer", config_.agent.optimizer == OptimizerKind::adam ? "adam" : "sgd");
  c.set_scalar("episode", static_cast<double>(episode_));
  c.set_scalar("updates", static_cast<double>(agent_.update_count()));
  c.set_scalar("gamma", config_.agent.gamma);
  c.set_scalar("tau", config_.agent.tau);
  c.set_scalar("actor_lr", config_.agent.actor_lr);
  c.set_scalar("critic_lr", config_.agent.critic_lr);
  c.set_scalar("k_max", env_.config().k_max);

  const auto& agent = agent_;
  store_network(c, "actor", agent.actor());
  store_network(c, "critic", agent.critic());
  store_network(c, "target_actor", agent.target_actor());
  store_network(c, "target_critic", agent.target_critic());
  store_optimizer(c, "actor_optimizer", agent.actor_optimizer());
  store_optimizer(c, "critic_optimizer", agent.critic_optimizer());

  const auto& items = replay_.storage();
  const auto n = static_cast<Eigen::Index>(items.size());
  const auto obs = static_cast<Eigen::Index>(env_.observation_size());
  const auto act = static_cast<Eigen::Index>(env_.action_size());
  Mat states(obs, n), actions(act, n), next_states(obs, n);
  Vec rewards(n), done(n), priority(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = items[static_cast<std::size_t>(i)];
    states.col(i) = t.state;
    actions.col(i) = t.action;
    next_states.col(i) = t.next_state;
    rewards(i) = t.reward;
    done(i) = t.done ? 1.0 : 0.0;
    priority(i) = t.priority;
  }
  c.put("replay.states", states);
  c.put("replay.actions", actions);
  c.put("replay.next_states", next_states);
  c.put_vector("replay.rewards", rewards);
  c.put_vector("replay.done", done);
  c.put_vector("replay.priority", priority);
  c.set_scalar("replay.next", static_cast<double>(replay_.next_slot()));
  c.set_scalar("replay.max_priority", replay_.max_priority());
  return c;
}

void TrainingSession::restore(const Checkpoint& c) {
  if (c.meta("seed") != std::to_string(seed_))
    throw ConfigError("checkpoint was written by a run with seed " + c.meta("seed"));
  Mlp actor = load_network(c, "actor");
  Mlp critic = load_network(c, "critic");
  Mlp target_actor = load_network(c, "target_actor");
  Mlp target_critic = load_network(c, "target_critic");
  if (!actor.same_shape(agent_.actor()) || !critic.same_shape(agent_.critic()) ||
      !target_actor.same_shape(agent_.actor()) || !target_critic.same_shape(agent_.critic()))
    throw ConfigError("checkpoint networks do not match the configured architecture");
  agent_.actor() = std::move(actor);
  agent_.critic() = std::move(critic);
  agent_.target_actor() = std::move(target_actor);
  agent_.target_critic() = std::move(target_critic);
  load_optimizer(c, "actor_optimizer", agent_.actor_optimizer());
  load_optimizer(c, "critic_optimizer", agent_.critic_optimizer());
  agent_.set_update_count(static_cast<std::uint64_t>(c.scalar("updates")));

  const Mat states = c.matrix("replay.states");
  const Mat actions = c.matrix("replay.actions");
  const Mat next_states = c.matrix("replay.next_states");
  const Vec rewards = c.vector("replay.rewards");
  const Vec done = c.vector("replay.done");
  const Vec priority = c.vector("replay.priority");
  const auto n = rewards.size();
  if (states.cols() != n || actions.cols() != n || next_states.cols() != n || done.size() != n ||
      priority.size() != n)
    throw ConfigError("checkpoint replay arrays disagree in length");
  std::vector<Transition> items;
  items.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    items.push_back({states.col(i), actions.col(i), rewards(i), next_states.col(i), done(i) != 0.0, priority(i)});
  try {
    replay_.restore(std::move(items), static_cast<std::size_t>(c.scalar("replay.next")),
                    c.scalar("replay.max_priority"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("checkpoint replay: ") + e.what());
  }
  episode_ = static_cast<std::size_t>(c.scalar("episode"));
}

Mlp load_actor(const Checkpoint& ckpt) { return load_network(ckpt, "actor"); }

}  // namespace wadc
