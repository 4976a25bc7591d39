#include "wadc/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wadc {

void EnvConfig::validate() const {
  if (action_repeat < 2) throw InvalidArgument("action repeat (DMD window) must be at least 2");
  if (alpha < 0.0 || beta < 0.0) throw InvalidArgument("reward weights must be non-negative");
  if (!(penalty < 0.0)) throw InvalidArgument("stability penalty must be negative");
  if (!(noise_std >= 0.0)) throw InvalidArgument("noise std must be non-negative");
  if (!(init_scale >= 0.0)) throw InvalidArgument("initial scale must be non-negative");
  if (!(k_max > 0.0)) throw InvalidArgument("gain bound must be positive");
  if (!(divergence_limit > 0.0)) throw InvalidArgument("divergence limit must be positive");
}

double eigenvalue_reward(const Spectrum& closed, const Spectrum& open, double alpha, double beta,
                         RewardForm form) {
  const auto pairing = pair_spectra(closed, open);
  double cost = 0.0;
  for (const auto& [c, o] : pairing.pairs) {
    const double re = closed[c].real();
    const double re_hat = open[o].real();
    const double im = closed[c].imag();
    const double real_term = form == RewardForm::printed ? re * re - re_hat * re_hat
                                                         : (re - re_hat) * (re - re_hat);
    cost += alpha * real_term + beta * im * im;
  }
  for (std::size_t c : pairing.unmatched_closed) {
    if (!(closed[c].imag() > 1e-9)) continue;
    cost += alpha * closed[c].real() * closed[c].real() + beta * closed[c].imag() * closed[c].imag();
  }
  return -cost;
}

Environment::Environment(std::shared_ptr<const GridModel> model, EnvConfig config,
                         ControlSetup controls)
    : model_(std::move(model)),
      config_(config),
      controls_(std::move(controls)),
      delay_(0.0, 1.0) {
  if (!model_) throw InvalidArgument("environment needs a model");
  config_.validate();
  controls_.scs.validate();
  if (controls_.pss.size() != model_->p)
    throw InvalidArgument("need one PSS parameter set per controlled generator");
  if (controls_.scs.reference >= model_->n_g && model_->n_g > 0)
    throw InvalidArgument("SCS reference generator out of range");

  discrete_ = DiscreteModel::zero_order_hold(*model_);
  open_loop_ = exact_eigenvalues(*model_, Mat::Zero(static_cast<Eigen::Index>(model_->p),
                                                    static_cast<Eigen::Index>(model_->observation_size())));
  try {
    modes_ = participation_factors(model_->A);
  } catch (const ModalError&) {
    modes_.clear();  // defective A: no mode to align with, starts fall back to Gaussian
  }
  target_ = modes_.size();
  for (std::size_t k = 0; k < modes_.size(); ++k)
    if (modes_[k].eigenvalue.imag() > 1e-9 &&
        (target_ == modes_.size() || modes_[k].eigenvalue.imag() < modes_[target_].eigenvalue.imag()))
      target_ = k;
  if (target_ < modes_.size()) {
    // Fix the eigenvector phase so the largest entry is real and positive.
    const CVec& phi = modes_[target_].right;
    Eigen::Index imax = 0;
    phi.cwiseAbs().maxCoeff(&imax);
    target_shape_ = phi * (std::abs(phi(imax)) / phi(imax));
  } else {
    target_ = 0;
  }

  for (const auto& p : controls_.pss) pss_.emplace_back(p, model_->dt);
  delay_ = DelayLine(controls_.delay, model_->dt);
  equilibrium_ = Vec::Zero(static_cast<Eigen::Index>(2 * model_->n_g));
}

void Environment::use_nonlinear(FaultScenario scenario) {
  if (model_->machines.empty()) throw InvalidArgument("nonlinear plant needs machine data");
  scenario.validate();
  equilibrium_ = Vec::Zero(static_cast<Eigen::Index>(2 * model_->n_g));
  equilibrium_.head(static_cast<Eigen::Index>(model_->n_g)) =
      solve_equilibrium(model_->machines, scenario.pre_fault);
  scenario_ = std::move(scenario);
  done_ = true;
}

Vec Environment::reset(std::uint64_t seed) { return start(seed, std::nullopt); }

Vec Environment::reset(std::uint64_t seed, double phase) { return start(seed, phase); }

Vec Environment::start(std::uint64_t seed, std::optional<double> phase) {
  rng_.seed(seed);
  const auto n = static_cast<Eigen::Index>(model_->n);
  Vec x0 = Vec::Zero(n);
  if (config_.init_scale > 0.0) {
    if (config_.mode_aligned && target_shape_.size() == n) {
      const double psi = phase ? *phase
                               : std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng_);
      const Vec shape = (target_shape_ * std::polar(1.0, psi)).real();
      const double norm = shape.norm();
      if (norm > 0.0) x0 = config_.init_scale * shape / norm;
    } else {
      std::normal_distribution<double> gauss(0.0, config_.init_scale);
      for (Eigen::Index i = 0; i < n; ++i) x0(i) = gauss(rng_);
    }
  }
  x0_ = x0;
  if (scenario_) {
    x_ = equilibrium_ + x0.head(equilibrium_.size());
  } else {
    x_ = x0;
  }
  for (auto& p : pss_) p.reset();
  delay_.reset();
  remote_obs_ = delay_.push(observe());
  substep_ = 0;
  steps_ = 0;
  done_ = false;
  trace_.clear();
  return remote_obs_;
}

Vec Environment::observe() const {
  if (scenario_) return model_->observation_map.leftCols(equilibrium_.size()) * (x_ - equilibrium_);
  return model_->observation_map * x_;
}

Vec Environment::plant_theta() const { return x_.head(static_cast<Eigen::Index>(model_->n_g)); }

Vec Environment::plant_omega() const {
  return x_.segment(static_cast<Eigen::Index>(model_->n_g), static_cast<Eigen::Index>(model_->n_g));
}

void Environment::advance(const Vec& u) {
  if (!scenario_) {
    Vec eta = Vec::Zero(static_cast<Eigen::Index>(model_->q));
    if (config_.noise_std > 0.0) {
      std::normal_distribution<double> gauss(0.0, config_.noise_std);
      for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = gauss(rng_);
    }
    x_ = discrete_.Ad * x_ + discrete_.B1d * u + discrete_.B2d * eta;
  } else {
    const auto ng = static_cast<Eigen::Index>(model_->n_g);
    Vec injection = Vec::Zero(ng);
    if (config_.noise_std > 0.0) {
      std::normal_distribution<double> gauss(0.0, config_.noise_std);
      for (Eigen::Index i = 0; i < ng; ++i) injection(i) = gauss(rng_);
    }
    for (std::size_t j = 0; j < model_->controlled.size(); ++j)
      injection(static_cast<Eigen::Index>(model_->controlled[j])) += u(static_cast<Eigen::Index>(j));
    x_ = rk4_swing_step(model_->machines, scenario_->network_at(substep_, model_->dt), x_, injection,
                        model_->dt);
  }
  ++substep_;
}

StepResult Environment::step(std::span<const double> action) {
  if (action.size() != action_size()) throw InvalidArgument("action length must equal p * m");
  for (double a : action)
    if (!(a >= -1.0 && a <= 1.0)) throw InvalidArgument("normalized action must lie in [-1, 1]");
  return step_gain(unflatten_gain(action, model_->p, model_->observation_size(), config_.k_max));
}

StepResult Environment::step_gain(const Mat& gain) {
  if (done_) throw InvalidArgument("episode finished");
  if (gain.rows() != static_cast<Eigen::Index>(model_->p) ||
      gain.cols() != static_cast<Eigen::Index>(model_->observation_size()))
    throw InvalidArgument("gain shape mismatch");

  const auto W = config_.action_repeat;
  const auto ng = static_cast<Eigen::Index>(model_->n_g);
  const auto p = static_cast<Eigen::Index>(model_->p);
  SnapshotWindow window{Mat(static_cast<Eigen::Index>(observation_size()), static_cast<Eigen::Index>(W + 1)),
                        model_->dt};
  window.snapshots.col(0) = observe();

  StepResult result;
  auto& diag = result.diagnostics;
  bool diverged = false;
  Vec last_good_remote = remote_obs_;
  Vec u_local(p);
  for (std::size_t j = 0; j < W; ++j) {
    const Vec fresh = window.snapshots.col(static_cast<Eigen::Index>(j));
    const Vec omega = plant_omega();
    for (Eigen::Index c = 0; c < p; ++c)
      u_local(c) = -pss_[static_cast<std::size_t>(c)].step(omega(static_cast<Eigen::Index>(model_->controlled[static_cast<std::size_t>(c)])));

    ScsOutput control{u_local, false};
    if (controls_.wide_area) {
      const double switching_energy = energy(remote_obs_.head(ng), remote_obs_.tail(ng), controls_.scs);
      control = scs_combine(u_local, wide_area_output(gain, remote_obs_), switching_energy,
                            controls_.scs.threshold);
    }
    const double p_now = energy(fresh.head(ng), fresh.tail(ng), controls_.scs);
    diag.energy_sum += p_now;
    diag.energy_last = p_now;
    diag.scs_on = control.wide_area_on;
    diag.scs_on_substeps += control.wide_area_on ? 1 : 0;
    if (recording_)
      trace_.push_back({static_cast<double>(substep_) * model_->dt, plant_theta(), omega, p_now,
                        control.wide_area_on});

    advance(control.input);
    if (!x_.allFinite() || plant_omega().cwiseAbs().maxCoeff() > config_.divergence_limit) {
      diverged = true;
      break;
    }
    window.snapshots.col(static_cast<Eigen::Index>(j + 1)) = observe();
    remote_obs_ = delay_.push(window.snapshots.col(static_cast<Eigen::Index>(j + 1)));
    last_good_remote = remote_obs_;
  }
  ++steps_;

  if (config_.eigen_source == EigenSource::exact) {
    diag.spectrum = exact_eigenvalues(*model_, gain);
  } else if (!diverged) {
    try {
      diag.spectrum = dmd_estimate(window);
    } catch (const ModalError&) {
      diag.estimation_failed = true;
    }
  }
  diag.max_real = diag.spectrum.empty() ? 0.0 : diag.spectrum.front().real();

  diag.unstable = diverged ||
                  (config_.eigen_source == EigenSource::exact && diag.max_real > config_.unstable_real_part);
  if (diag.unstable) {
    result.reward = config_.penalty;
    result.done = true;
  } else {
    result.reward = eigenvalue_reward(diag.spectrum, open_loop_, config_.alpha, config_.beta,
                                      config_.reward_form);
    result.done = steps_ >= config_.episode_steps;
  }
  result.observation = diverged ? last_good_remote : remote_obs_;
  done_ = result.done;
  return result;
}

}  // namespace wadc
