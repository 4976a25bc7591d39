#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "wadc/controllers.hpp"
#include "wadc/grid_model.hpp"
#include "wadc/modal.hpp"

namespace wadc {

enum class EigenSource { dmd, exact };

/// `printed`: -a sum(Re^2 - Re_hat^2) - b sum(Im^2)
/// `difference`: -a sum((Re - Re_hat)^2) - b sum(Im^2)
enum class RewardForm { printed, difference };

struct EnvConfig {
  std::size_t episode_steps = 500;
  std::size_t action_repeat = 40;  // substeps per decision, also the DMD window
  double alpha = 1.0;
  double beta = 1.0;
  double penalty = -300.0;
  double noise_std = 0.01;
  EigenSource eigen_source = EigenSource::exact;
  RewardForm reward_form = RewardForm::printed;
  double init_scale = 0.1;
  bool mode_aligned = true;
  double k_max = 10.0;
  double divergence_limit = 10.0;  // rad/s on any |omega|
  double unstable_real_part = 1e-6;

  void validate() const;
};

/// Local stabilizers, switching rule and the wide-area channel.
struct ControlSetup {
  std::vector<PssParams> pss;  // one per controlled generator
  ScsConfig scs;
  double delay = 0.0;
  bool wide_area = true;  // false runs the stabilizers alone
};

struct StepDiagnostics {
  Spectrum spectrum;
  double energy_sum = 0.0;   // sum of P over the window's substeps
  double energy_last = 0.0;
  bool scs_on = false;       // switch state during the last substep
  std::size_t scs_on_substeps = 0;
  bool unstable = false;
  bool estimation_failed = false;
  double max_real = 0.0;
};

struct StepResult {
  Vec observation;
  double reward = 0.0;
  bool done = false;
  StepDiagnostics diagnostics;
};

/// Sampled plant state at the start of one substep.
struct SubstepRecord {
  double t = 0.0;
  Vec theta;
  Vec omega;
  double energy = 0.0;
  bool scs_on = false;
};

/// Eigenvalue shaping reward over matched oscillatory pairs;
/// unmatched closed-loop oscillatory modes count in full.
double eigenvalue_reward(const Spectrum& closed, const Spectrum& open, double alpha, double beta,
                         RewardForm form);

/// Episodic wrapper around the linear or reduced nonlinear grid.
///
/// One instance per rollout; not safe for concurrent stepping.
class Environment {
public:
  Environment(std::shared_ptr<const GridModel> model, EnvConfig config, ControlSetup controls);

  /// Switches the plant to the reduced nonlinear swing model under `scenario`.
  /// Rewards keep using the linear model's spectrum.
  void use_nonlinear(FaultScenario scenario);

  /// Mode-aligned starts draw their phase from the seed.
  Vec reset(std::uint64_t seed);
  /// Mode-aligned start with an explicit phase rotation of the target mode.
  Vec reset(std::uint64_t seed, double phase);

  StepResult step(std::span<const double> action);
  StepResult step_gain(const Mat& gain);

  std::size_t observation_size() const noexcept { return model_->observation_size(); }
  std::size_t action_size() const noexcept { return model_->p * model_->observation_size(); }
  const Spectrum& open_loop_spectrum() const noexcept { return open_loop_; }
  /// Mode used for aligned starts. Throws ModalError when A has no usable
  /// eigendecomposition.
  const Mode& target_mode() const {
    if (target_ >= modes_.size()) throw ModalError("no target mode");
    return modes_[target_];
  }
  const GridModel& model() const noexcept { return *model_; }
  const EnvConfig& config() const noexcept { return config_; }
  const ControlSetup& controls() const noexcept { return controls_; }
  bool nonlinear() const noexcept { return scenario_.has_value(); }
  bool done() const noexcept { return done_; }
  std::size_t steps_taken() const noexcept { return steps_; }
  Vec initial_deviation() const { return x0_; }

  void set_recording(bool on) noexcept { recording_ = on; }
  const std::vector<SubstepRecord>& trace() const noexcept { return trace_; }

private:
  Vec start(std::uint64_t seed, std::optional<double> phase);
  Vec observe() const;
  Vec plant_omega() const;
  Vec plant_theta() const;
  void advance(const Vec& u);

  std::shared_ptr<const GridModel> model_;
  EnvConfig config_;
  ControlSetup controls_;
  std::optional<FaultScenario> scenario_;

  DiscreteModel discrete_;
  Spectrum open_loop_;
  std::vector<Mode> modes_;
  std::size_t target_ = 0;
  CVec target_shape_;
  Vec equilibrium_;  // nonlinear plant operating point (theta*, 0)

  std::vector<PowerSystemStabilizer> pss_;
  DelayLine delay_;
  std::mt19937_64 rng_;
  Vec x_;
  Vec x0_;
  Vec remote_obs_;
  std::size_t substep_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
  bool recording_ = false;
  std::vector<SubstepRecord> trace_;
};

}  // namespace wadc
