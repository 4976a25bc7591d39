#include "wadc/controllers.hpp"

#include <cmath>

namespace wadc {

void PssParams::validate() const {
  if (!(washout > 0.0 && lead1 > 0.0 && lag1 > 0.0 && lead2 > 0.0 && lag2 > 0.0))
    throw InvalidArgument("PSS time constants must be positive");
  if (!std::isfinite(gain)) throw InvalidArgument("PSS gain must be finite");
}

BilinearSection BilinearSection::from_continuous(double b1, double b0, double a1, double a0,
                                                 double dt) {
  // s -> (2/dt) (1 - z^-1)/(1 + z^-1)
  const double c = 2.0 / dt;
  const double d0 = a1 * c + a0;
  BilinearSection s;
  s.n0 = (b1 * c + b0) / d0;
  s.n1 = (-b1 * c + b0) / d0;
  s.d1 = (-a1 * c + a0) / d0;
  return s;
}

PowerSystemStabilizer::PowerSystemStabilizer(const PssParams& params, double dt) : params_(params) {
  params.validate();
  if (!(dt > 0.0)) throw InvalidArgument("PSS step must be positive");
  sections_[0] = BilinearSection::from_continuous(params.washout, 0.0, params.washout, 1.0, dt);
  sections_[1] = BilinearSection::from_continuous(params.lead1, 1.0, params.lag1, 1.0, dt);
  sections_[2] = BilinearSection::from_continuous(params.lead2, 1.0, params.lag2, 1.0, dt);
}

double PowerSystemStabilizer::step(double speed) {
  double v = speed;
  for (std::size_t i = 0; i < sections_.size(); ++i) v = sections_[i].step(v, state_[i]);
  return params_.gain * v;
}

Vec wide_area_output(const Mat& gain, const Vec& observation) {
  if (gain.cols() != observation.size()) throw InvalidArgument("gain shape mismatch");
  return -(gain * observation);
}

Mat unflatten_gain(std::span<const double> action, std::size_t p, std::size_t m, double k_max) {
  if (action.size() != p * m) throw InvalidArgument("action length must equal p * m");
  Mat K(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < m; ++c)
      K(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = k_max * action[r * m + c];
  return K;
}

Vec flatten_gain(const Mat& gain, double k_max) {
  Vec a(gain.size());
  for (Eigen::Index r = 0; r < gain.rows(); ++r)
    for (Eigen::Index c = 0; c < gain.cols(); ++c) a(r * gain.cols() + c) = gain(r, c) / k_max;
  return a;
}

void ScsConfig::validate() const {
  if (!(threshold > 0.0)) throw InvalidArgument("SCS threshold must be positive");
  if (kappa1 < 0.0 || kappa2 < 0.0 || kappa3 < 0.0) throw InvalidArgument("SCS weights must be non-negative");
  if (kappa1 == 0.0 && kappa2 == 0.0 && kappa3 == 0.0)
    throw InvalidArgument("at least one SCS weight must be non-zero");
}

double energy(const Vec& theta, const Vec& omega, const ScsConfig& config) {
  const auto ng = omega.size();
  if (theta.size() != ng) throw InvalidArgument("theta and omega lengths differ");
  const auto ref = static_cast<Eigen::Index>(config.reference);
  if (ref >= ng) throw InvalidArgument("reference generator out of range");

  double pairs = 0.0;
  for (Eigen::Index i = 0; i < ng; ++i)
    for (Eigen::Index j = 0; j < ng; ++j) {
      const double d = omega(i) - omega(j);
      pairs += d * d;
    }
  double kinetic = 0.0;
  double potential = 0.0;
  for (Eigen::Index i = 0; i < ng; ++i) {
    if (i == ref) continue;
    kinetic += omega(i) * omega(i);
    const double d = theta(i) - theta(ref);
    potential += d * d;
  }
  return config.kappa1 * pairs + config.kappa2 * kinetic + config.kappa3 * potential;
}

ScsOutput scs_combine(const Vec& u_local, const Vec& u_wide_area, double energy_value,
                      double threshold) {
  if (u_local.size() != u_wide_area.size()) throw InvalidArgument("control vectors differ in length");
  if (energy_value > threshold) return {u_local + u_wide_area, true};
  return {u_local, false};
}

DelayLine::DelayLine(double delay, double dt) : delay_(delay) {
  if (!(delay >= 0.0)) throw InvalidArgument("invalid delay");
  if (!(dt > 0.0)) throw InvalidArgument("delay line step must be positive");
  // Snap ratios like 0.35/0.01 = 34.999... onto the intended integer.
  const double ratio = delay / dt;
  const double nearest = std::round(ratio);
  lag_ = static_cast<std::size_t>(std::abs(ratio - nearest) < 1e-9 ? nearest : std::ceil(ratio));
}

Vec DelayLine::push(const Vec& fresh) {
  queue_.push_back(fresh);
  while (queue_.size() > lag_ + 1) queue_.pop_front();
  return queue_.front();
}

}  // namespace wadc
