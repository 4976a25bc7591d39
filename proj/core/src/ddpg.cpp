#include "wadc/ddpg.hpp"

#include <algorithm>
#include <cmath>

#include "wadc/seed.hpp"

namespace wadc {

void DdpgConfig::validate() const {
  if (observation_size == 0 || action_size == 0) throw InvalidArgument("agent dimensions must be positive");
  if (actor_hidden == 0 || critic_hidden == 0) throw InvalidArgument("hidden layers must be non-empty");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("tau must lie in (0, 1]");
  if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw InvalidArgument("learning rates must be positive");
}

Vec actor_forward(const Mlp& actor, const Vec& state) { return actor.forward(state); }

double critic_forward(const Mlp& critic, const Vec& state, const Vec& action) {
  Vec input(state.size() + action.size());
  input << state, action;
  return critic.forward(input)(0);
}

DdpgAgent::DdpgAgent(const DdpgConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 actor_rng(derive_seed(seed, SeedStream::network_init, 0));
  std::mt19937_64 critic_rng(derive_seed(seed, SeedStream::network_init, 1));
  actor_ = Mlp::make({config_.observation_size, config_.actor_hidden, config_.action_size},
                     {Activation::relu, Activation::tanh}, actor_rng);
  critic_ = Mlp::make({config_.observation_size + config_.action_size, config_.critic_hidden, 1},
                      {Activation::relu, Activation::linear}, critic_rng);
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_opt_ = Optimizer(config_.optimizer, config_.actor_lr, actor_.parameter_count());
  critic_opt_ = Optimizer(config_.optimizer, config_.critic_lr, critic_.parameter_count());
}

namespace {

struct BatchMatrices {
  Mat states;
  Mat actions;
  Mat next_states;
};

BatchMatrices stack(std::span<const Transition> batch, std::size_t obs, std::size_t act) {
  if (batch.empty()) throw InvalidArgument("minibatch must be non-empty");
  const auto n = static_cast<Eigen::Index>(batch.size());
  BatchMatrices m{Mat(obs, n), Mat(act, n), Mat(obs, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    if (t.state.size() != static_cast<Eigen::Index>(obs) || t.next_state.size() != static_cast<Eigen::Index>(obs) ||
        t.action.size() != static_cast<Eigen::Index>(act))
      throw InvalidArgument("transition shape mismatch");
    m.states.col(i) = t.state;
    m.actions.col(i) = t.action;
    m.next_states.col(i) = t.next_state;
  }
  return m;
}

Mat concat_rows(const Mat& top, const Mat& bottom) {
  Mat out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

}  // namespace

std::vector<double> DdpgAgent::targets(std::span<const Transition> batch) const {
  const auto m = stack(batch, config_.observation_size, config_.action_size);
  const Mat next_actions = target_actor_.forward(m.next_states);
  const Mat next_q = target_critic_.forward(concat_rows(m.next_states, next_actions));
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double bootstrap = batch[i].done ? 0.0 : config_.gamma * next_q(0, static_cast<Eigen::Index>(i));
    y[i] = batch[i].reward + bootstrap;
  }
  return y;
}

CriticGradient DdpgAgent::critic_gradient(std::span<const Transition> batch,
                                          std::span<const double> weights) const {
  if (!weights.empty() && weights.size() != batch.size()) throw InvalidArgument("weight count mismatch");
  const auto m = stack(batch, config_.observation_size, config_.action_size);
  const auto y = targets(batch);
  Mlp::Tape tape;
  const Mat q = critic_.forward(concat_rows(m.states, m.actions), tape);

  const double n = static_cast<double>(batch.size());
  CriticGradient out;
  out.td_error.resize(batch.size());
  Mat dq(1, q.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const double td = y[i] - q(0, static_cast<Eigen::Index>(i));
    out.td_error[i] = td;
    out.loss += w * td * td / n;
    dq(0, static_cast<Eigen::Index>(i)) = -2.0 * w * td / n;
  }
  critic_.backward(tape, dq, &out.gradient);
  return out;
}

ActorGradient DdpgAgent::actor_gradient(std::span<const Transition> batch) const {
  const auto m = stack(batch, config_.observation_size, config_.action_size);
  Mlp::Tape actor_tape;
  const Mat actions = actor_.forward(m.states, actor_tape);
  Mlp::Tape critic_tape;
  const Mat q = critic_.forward(concat_rows(m.states, actions), critic_tape);

  const double n = static_cast<double>(batch.size());
  ActorGradient out;
  out.objective = q.sum() / n;
  const Mat dq = Mat::Constant(1, q.cols(), 1.0 / n);
  const Mat dinput = critic_.backward(critic_tape, dq, nullptr);
  const Mat daction = dinput.bottomRows(static_cast<Eigen::Index>(config_.action_size));
  actor_.backward(actor_tape, daction, &out.gradient);
  return out;
}

UpdateResult DdpgAgent::update(std::span<const Transition> batch, std::span<const double> weights) {
  auto critic = critic_gradient(batch, weights);
  if (!std::isfinite(critic.loss) || !critic.gradient.allFinite())
    throw DivergenceError("training divergence", static_cast<std::size_t>(updates_));
  critic_opt_.step(critic_, critic.gradient);

  const auto actor = actor_gradient(batch);
  if (!std::isfinite(actor.objective) || !actor.gradient.allFinite())
    throw DivergenceError("training divergence", static_cast<std::size_t>(updates_));
  actor_opt_.step(actor_, -actor.gradient);
  ++updates_;

  UpdateResult out;
  out.critic_loss = critic.loss;
  out.priorities.reserve(critic.td_error.size());
  for (double td : critic.td_error) out.priorities.push_back(std::abs(td));
  return out;
}

void DdpgAgent::soft_update_targets() {
  soft_update(actor_, target_actor_, config_.tau);
  soft_update(critic_, target_critic_, config_.tau);
}

Vec explore(const Vec& action, double noise_std, std::mt19937_64& rng) {
  if (!(noise_std >= 0.0)) throw InvalidArgument("exploration noise must be non-negative");
  if (noise_std == 0.0) return action.cwiseMax(-1.0).cwiseMin(1.0);
  std::normal_distribution<double> gauss(0.0, noise_std);
  Vec out = action;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = std::clamp(out(i) + gauss(rng), -1.0, 1.0);
  return out;
}

}  // namespace wadc
