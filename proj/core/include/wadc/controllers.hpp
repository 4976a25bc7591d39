#pragma once

#include <array>
#include <deque>
#include <span>

#include "wadc/types.hpp"

namespace wadc {

/// k * Tw s/(1 + Tw s) * (1 + Tn1 s)/(1 + Td1 s) * (1 + Tn2 s)/(1 + Td2 s)
struct PssParams {
  double gain = 20.0;
  double washout = 10.0;
  double lead1 = 0.05;
  double lag1 = 0.02;
  double lead2 = 3.0;
  double lag2 = 5.4;

  void validate() const;
};

/// First-order section (b1 s + b0)/(a1 s + a0) after the bilinear transform,
/// realized in transposed direct form II with one state.
struct BilinearSection {
  double n0 = 0.0;
  double n1 = 0.0;
  double d1 = 0.0;  // denominator normalized so that d0 = 1

  static BilinearSection from_continuous(double b1, double b0, double a1, double a0, double dt);
  double step(double input, double& state) const noexcept {
    const double y = n0 * input + state;
    state = n1 * input - d1 * y;
    return y;
  }
};

/// Washout plus two lead-lag stages, discretized at a fixed step.
class PowerSystemStabilizer {
public:
  PowerSystemStabilizer(const PssParams& params, double dt);

  /// Feeds one speed sample and returns the stabilizer output.
  double step(double speed);
  void reset() noexcept { state_.fill(0.0); }

  const std::array<double, 3>& state() const noexcept { return state_; }
  const PssParams& params() const noexcept { return params_; }

private:
  PssParams params_;
  std::array<BilinearSection, 3> sections_;
  std::array<double, 3> state_{};
};

/// u_wac = -K y.
Vec wide_area_output(const Mat& gain, const Vec& observation);

/// Normalized action in [-1, 1]^(p*m), row-major, scaled to K = k_max * a.
Mat unflatten_gain(std::span<const double> action, std::size_t p, std::size_t m, double k_max);
Vec flatten_gain(const Mat& gain, double k_max);

struct ScsConfig {
  double threshold = 0.06;
  double kappa1 = 1.0;
  double kappa2 = 1.0;
  double kappa3 = 1.0;
  std::size_t reference = 0;

  void validate() const;
};

/// Energy-like measure of oscillation severity:
/// k1 sum_ij (w_i - w_j)^2 + k2 sum_{i != ref} w_i^2 + k3 sum_{i != ref} (th_i - th_ref)^2.
double energy(const Vec& theta, const Vec& omega, const ScsConfig& config);

struct ScsOutput {
  Vec input;
  bool wide_area_on = false;
};

/// Wide-area signal added only while P exceeds the threshold; P equal to the
/// threshold keeps the stabilizers alone.
ScsOutput scs_combine(const Vec& u_local, const Vec& u_wide_area, double energy_value,
                      double threshold);

/// Fixed communication delay of ceil(delay/dt) samples on the observation path.
class DelayLine {
public:
  DelayLine(double delay, double dt);

  /// Pushes a fresh observation and returns the one `lag()` samples older, or
  /// the oldest held sample while the line is filling.
  Vec push(const Vec& fresh);
  void reset() { queue_.clear(); }

  std::size_t lag() const noexcept { return lag_; }
  double delay() const noexcept { return delay_; }

private:
  double delay_;
  std::size_t lag_;
  std::deque<Vec> queue_;
};

}  // namespace wadc
