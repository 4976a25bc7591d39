#include "wadc/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

namespace wadc {

void sort_spectrum(Spectrum& values) {
  std::sort(values.begin(), values.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
}

Vec SystemState::stacked() const {
  Vec x(static_cast<Eigen::Index>(size()));
  x << theta, omega, rem;
  return x;
}

SystemState SystemState::unstack(const Vec& x, std::size_t generators) {
  const auto ng = static_cast<Eigen::Index>(generators);
  if (x.size() < 2 * ng) throw InvalidArgument("state vector shorter than 2 * generators");
  SystemState s;
  s.theta = x.head(ng);
  s.omega = x.segment(ng, ng);
  s.rem = x.tail(x.size() - 2 * ng);
  return s;
}

GridModel GridModel::from_matrices(Mat A, Mat B1, Mat B2, std::size_t generators, double dt) {
  if (A.rows() != A.cols()) throw InvalidArgument("A must be square");
  if (B1.rows() != A.rows() || B2.rows() != A.rows())
    throw InvalidArgument("B1 and B2 must have as many rows as A");
  if (static_cast<Eigen::Index>(2 * generators) > A.rows())
    throw InvalidArgument("2 * generators exceeds the state dimension");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");

  GridModel m;
  m.n = static_cast<std::size_t>(A.rows());
  m.n_g = generators;
  m.p = static_cast<std::size_t>(B1.cols());
  m.q = static_cast<std::size_t>(B2.cols());
  m.A = std::move(A);
  m.B1 = std::move(B1);
  m.B2 = std::move(B2);
  m.dt = dt;
  m.controlled.resize(m.p);
  for (std::size_t j = 0; j < m.p; ++j) m.controlled[j] = j;
  const auto obs = static_cast<Eigen::Index>(2 * generators);
  m.observation_map = Mat::Zero(obs, static_cast<Eigen::Index>(m.n));
  m.observation_map.leftCols(obs).setIdentity();
  return m;
}

FaultScenario FaultScenario::none(ReducedNetwork network) {
  FaultScenario s;
  s.pre_fault = network;
  s.fault_on = network;
  s.post_fault = std::move(network);
  return s;
}

void FaultScenario::validate() const {
  const auto symmetric = [](const ReducedNetwork& net) {
    return net.conductance.isApprox(net.conductance.transpose(), 1e-12) &&
           net.susceptance.isApprox(net.susceptance.transpose(), 1e-12);
  };
  if (!symmetric(pre_fault) || !symmetric(fault_on) || !symmetric(post_fault) ||
      (near_cleared && !symmetric(*near_cleared)))
    throw ModelError("fault scenario networks must be symmetric");
  if (!has_fault()) return;
  if (!(start < near_clear && near_clear < remote_clear))
    throw ModelError("fault times must satisfy start < near-end clearing < remote-end clearing");
}

const ReducedNetwork& FaultScenario::network_at(std::size_t step, double dt) const {
  if (!has_fault()) return pre_fault;
  const auto event_step = [dt](double t) {
    return static_cast<std::size_t>(std::max(0.0, std::ceil(t / dt - 1e-9)));
  };
  if (step < event_step(start)) return pre_fault;
  if (step < event_step(near_clear)) return fault_on;
  if (step < event_step(remote_clear)) return near_cleared ? *near_cleared : post_fault;
  return post_fault;
}

void validate_machines(const std::vector<MachineData>& machines) {
  if (machines.empty()) throw ModelError("at least one machine is required");
  std::size_t references = 0;
  std::size_t controlled = 0;
  for (const auto& m : machines) {
    if (!(m.inertia > 0.0)) throw ModelError("machine inertia must be positive");
    if (!(m.emf > 0.0)) throw ModelError("machine internal voltage must be positive");
    if (!std::isfinite(m.damping) || !std::isfinite(m.mech_power))
      throw ModelError("machine damping and mechanical power must be finite");
    references += m.reference ? 1 : 0;
    controlled += m.controlled ? 1 : 0;
  }
  if (references != 1) throw ModelError("exactly one machine must be the reference");
  if (controlled == 0) throw ModelError("at least one machine must be controlled");
}

void validate_network(const ReducedNetwork& network, std::size_t generators) {
  const auto ng = static_cast<Eigen::Index>(generators);
  const auto square = [ng](const Mat& m) { return m.rows() == ng && m.cols() == ng; };
  if (!square(network.conductance) || !square(network.susceptance))
    throw ModelError("reduced network matrices must be n_g x n_g");
  if (!network.conductance.allFinite() || !network.susceptance.allFinite())
    throw ModelError("reduced network matrices must be finite");
  if (!network.conductance.isApprox(network.conductance.transpose(), 1e-12) ||
      !network.susceptance.isApprox(network.susceptance.transpose(), 1e-12))
    throw ModelError("reduced network matrices must be symmetric");
}

namespace {

bool connected(const ReducedNetwork& network) {
  const auto ng = network.conductance.rows();
  if (ng <= 1) return true;
  std::vector<bool> seen(static_cast<std::size_t>(ng), false);
  std::queue<Eigen::Index> frontier;
  frontier.push(0);
  seen[0] = true;
  while (!frontier.empty()) {
    const auto i = frontier.front();
    frontier.pop();
    for (Eigen::Index j = 0; j < ng; ++j) {
      if (i == j || seen[static_cast<std::size_t>(j)]) continue;
      if (network.conductance(i, j) != 0.0 || network.susceptance(i, j) != 0.0) {
        seen[static_cast<std::size_t>(j)] = true;
        frontier.push(j);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

std::size_t reference_index(const std::vector<MachineData>& machines) {
  const auto it = std::find_if(machines.begin(), machines.end(),
                               [](const MachineData& m) { return m.reference; });
  return static_cast<std::size_t>(it - machines.begin());
}

std::vector<std::size_t> controlled_indices(const std::vector<MachineData>& machines) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < machines.size(); ++i)
    if (machines[i].controlled) out.push_back(i);
  return out;
}

}  // namespace

Vec electrical_power(const std::vector<MachineData>& machines, const ReducedNetwork& network,
                     const Vec& theta) {
  const auto ng = static_cast<Eigen::Index>(machines.size());
  Vec pe = Vec::Zero(ng);
  for (Eigen::Index i = 0; i < ng; ++i) {
    const double ei = machines[static_cast<std::size_t>(i)].emf;
    for (Eigen::Index j = 0; j < ng; ++j) {
      const double ej = machines[static_cast<std::size_t>(j)].emf;
      const double d = theta(i) - theta(j);
      pe(i) += ei * ej *
               (network.conductance(i, j) * std::cos(d) + network.susceptance(i, j) * std::sin(d));
    }
  }
  return pe;
}

Mat power_angle_jacobian(const std::vector<MachineData>& machines,
                         const ReducedNetwork& network, const Vec& theta) {
  const auto ng = static_cast<Eigen::Index>(machines.size());
  Mat jac = Mat::Zero(ng, ng);
  for (Eigen::Index i = 0; i < ng; ++i) {
    const double ei = machines[static_cast<std::size_t>(i)].emf;
    for (Eigen::Index j = 0; j < ng; ++j) {
      if (i == j) continue;
      const double ej = machines[static_cast<std::size_t>(j)].emf;
      const double d = theta(i) - theta(j);
      jac(i, j) = ei * ej *
                  (network.conductance(i, j) * std::sin(d) - network.susceptance(i, j) * std::cos(d));
      jac(i, i) -= jac(i, j);
    }
  }
  return jac;
}

Vec swing_rhs(const std::vector<MachineData>& machines, const ReducedNetwork& network,
              const Vec& x, const Vec& injection) {
  const auto ng = static_cast<Eigen::Index>(machines.size());
  const Vec theta = x.head(ng);
  const Vec omega = x.segment(ng, ng);
  const Vec pe = electrical_power(machines, network, theta);
  Vec dx(2 * ng);
  dx.head(ng) = omega;
  for (Eigen::Index i = 0; i < ng; ++i) {
    const auto& m = machines[static_cast<std::size_t>(i)];
    dx(ng + i) = (m.mech_power - pe(i) - m.damping * omega(i) + injection(i)) / m.inertia;
  }
  return dx;
}

Vec solve_equilibrium(const std::vector<MachineData>& machines, const ReducedNetwork& network,
                      const EquilibriumOptions& options) {
  validate_machines(machines);
  validate_network(network, machines.size());
  if (!connected(network)) throw ModelError("disconnected network");

  const auto ng = static_cast<Eigen::Index>(machines.size());
  const auto ref = static_cast<Eigen::Index>(reference_index(machines));
  Vec pm(ng);
  for (Eigen::Index i = 0; i < ng; ++i) pm(i) = machines[static_cast<std::size_t>(i)].mech_power;

  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < ng; ++i)
    if (i != ref) free.push_back(i);
  const auto nf = static_cast<Eigen::Index>(free.size());

  Vec theta = Vec::Zero(ng);
  bool converged = nf == 0;
  for (int iter = 0; iter < options.max_iterations && !converged; ++iter) {
    const Vec mismatch = pm - electrical_power(machines, network, theta);
    Vec f(nf);
    for (Eigen::Index k = 0; k < nf; ++k) f(k) = mismatch(free[static_cast<std::size_t>(k)]);
    if (!f.allFinite()) break;
    if (f.cwiseAbs().maxCoeff() < options.tolerance) {
      converged = true;
      break;
    }
    const Mat jac = power_angle_jacobian(machines, network, theta);
    Mat jf(nf, nf);
    for (Eigen::Index r = 0; r < nf; ++r)
      for (Eigen::Index c = 0; c < nf; ++c)
        jf(r, c) = jac(free[static_cast<std::size_t>(r)], free[static_cast<std::size_t>(c)]);
    Eigen::FullPivLU<Mat> lu(jf);
    if (!lu.isInvertible()) break;
    const Vec delta = lu.solve(f);
    for (Eigen::Index k = 0; k < nf; ++k) theta(free[static_cast<std::size_t>(k)]) += delta(k);
  }
  if (converged) {
    // Σ Pe is fixed by the network; the reference row closes the balance only
    // when the data is consistent.
    const Vec mismatch = pm - electrical_power(machines, network, theta);
    converged = std::abs(mismatch(ref)) < std::max(1e-8, 100.0 * options.tolerance);
  }
  if (!converged) throw ModelError("no stationary operating point");
  return theta;
}

GridModel build_linear_model(const std::vector<MachineData>& machines,
                             const ReducedNetwork& network, double dt) {
  if (!(dt > 0.0)) throw ModelError("simulation step must be positive");
  const Vec theta = solve_equilibrium(machines, network);

  const auto ng = static_cast<Eigen::Index>(machines.size());
  const Mat jac = power_angle_jacobian(machines, network, theta);
  const auto ctrl = controlled_indices(machines);

  GridModel model;
  model.n_g = machines.size();
  model.n = 2 * model.n_g;
  model.p = ctrl.size();
  model.q = model.n_g;
  model.machines = machines;
  model.network = network;
  model.equilibrium_angles = theta;
  model.dt = dt;
  model.controlled = ctrl;
  model.reference = reference_index(machines);

  model.A = Mat::Zero(2 * ng, 2 * ng);
  model.A.topRightCorner(ng, ng).setIdentity();
  for (Eigen::Index i = 0; i < ng; ++i) {
    const auto& m = machines[static_cast<std::size_t>(i)];
    model.A.row(ng + i).head(ng) = -jac.row(i) / m.inertia;
    model.A(ng + i, ng + i) = -m.damping / m.inertia;
  }

  model.B1 = Mat::Zero(2 * ng, static_cast<Eigen::Index>(model.p));
  for (std::size_t j = 0; j < ctrl.size(); ++j) {
    const auto g = static_cast<Eigen::Index>(ctrl[j]);
    model.B1(ng + g, static_cast<Eigen::Index>(j)) = 1.0 / machines[ctrl[j]].inertia;
  }
  model.B2 = Mat::Zero(2 * ng, ng);
  for (Eigen::Index i = 0; i < ng; ++i)
    model.B2(ng + i, i) = 1.0 / machines[static_cast<std::size_t>(i)].inertia;

  model.observation_map = Mat::Identity(2 * ng, 2 * ng);
  model.observation_map.col(static_cast<Eigen::Index>(model.reference)).head(ng).array() -= 1.0;
  return model;
}

DiscreteModel DiscreteModel::zero_order_hold(const Mat& A, const Mat& B1, const Mat& B2,
                                             double dt) {
  const auto n = A.rows();
  const auto p = B1.cols();
  const auto q = B2.cols();
  // exp([A B; 0 0] dt) = [Ad Bd; 0 I]
  Mat block = Mat::Zero(n + p + q, n + p + q);
  block.topLeftCorner(n, n) = A;
  block.block(0, n, n, p) = B1;
  block.block(0, n + p, n, q) = B2;
  const Mat phi = (block * dt).exp();
  DiscreteModel d;
  d.Ad = phi.topLeftCorner(n, n);
  d.B1d = phi.block(0, n, n, p);
  d.B2d = phi.block(0, n + p, n, q);
  return d;
}

DiscreteModel DiscreteModel::zero_order_hold(const GridModel& model) {
  return zero_order_hold(model.A, model.B1, model.B2, model.dt);
}

Trajectory simulate_linear(const GridModel& model, const Vec& x0, const ControlFn& control,
                           double noise_std, std::size_t steps, std::uint64_t seed) {
  if (x0.size() != static_cast<Eigen::Index>(model.n))
    throw InvalidArgument("initial state has wrong dimension");
  if (!(noise_std >= 0.0)) throw InvalidArgument("noise_std must be non-negative");

  const auto disc = DiscreteModel::zero_order_hold(model);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Trajectory out;
  out.reserve(steps + 1);
  Vec x = x0;
  out.push_back(SystemState::unstack(x, model.n_g));
  Vec eta = Vec::Zero(static_cast<Eigen::Index>(model.q));
  for (std::size_t k = 0; k < steps; ++k) {
    Vec u = control ? control(k, out.back()) : Vec::Zero(static_cast<Eigen::Index>(model.p));
    if (u.size() != static_cast<Eigen::Index>(model.p))
      throw InvalidArgument("control function returned wrong input dimension");
    if (noise_std > 0.0)
      for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = noise_std * gauss(rng);
    x = disc.Ad * x + disc.B1d * u + disc.B2d * eta;
    if (!x.allFinite()) throw DivergenceError("numerical divergence", k + 1);
    out.push_back(SystemState::unstack(x, model.n_g));
  }
  return out;
}

Vec rk4_swing_step(const std::vector<MachineData>& machines, const ReducedNetwork& network,
                   const Vec& x, const Vec& injection, double dt) {
  const Vec k1 = swing_rhs(machines, network, x, injection);
  const Vec k2 = swing_rhs(machines, network, x + 0.5 * dt * k1, injection);
  const Vec k3 = swing_rhs(machines, network, x + 0.5 * dt * k2, injection);
  const Vec k4 = swing_rhs(machines, network, x + dt * k3, injection);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory simulate_nonlinear(const std::vector<MachineData>& machines,
                              const FaultScenario& scenario, const ControlFn& control, double dt,
                              std::size_t steps, const std::optional<SystemState>& initial) {
  validate_machines(machines);
  scenario.validate();
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  const auto ng = static_cast<Eigen::Index>(machines.size());
  const auto ctrl = controlled_indices(machines);

  Vec x(2 * ng);
  if (initial) {
    if (initial->theta.size() != ng || initial->omega.size() != ng)
      throw InvalidArgument("initial state has wrong dimension");
    x << initial->theta, initial->omega;
  } else {
    x << solve_equilibrium(machines, scenario.pre_fault), Vec::Zero(ng);
  }

  Trajectory out;
  out.reserve(steps + 1);
  out.push_back(SystemState::unstack(x, machines.size()));
  Vec injection = Vec::Zero(ng);
  for (std::size_t k = 0; k < steps; ++k) {
    injection.setZero();
    if (control) {
      const Vec u = control(k, out.back());
      if (u.size() != static_cast<Eigen::Index>(ctrl.size()))
        throw InvalidArgument("control function returned wrong input dimension");
      for (std::size_t j = 0; j < ctrl.size(); ++j)
        injection(static_cast<Eigen::Index>(ctrl[j])) = u(static_cast<Eigen::Index>(j));
    }
    x = rk4_swing_step(machines, scenario.network_at(k, dt), x, injection, dt);
    if (!x.allFinite()) throw DivergenceError("numerical divergence", k + 1);
    out.push_back(SystemState::unstack(x, machines.size()));
  }
  return out;
}

Mat lift_gain(const GridModel& model, const Mat& gain) {
  if (gain.rows() != static_cast<Eigen::Index>(model.p) ||
      gain.cols() != static_cast<Eigen::Index>(model.observation_size()))
    throw InvalidArgument("gain shape mismatch");
  return gain * model.observation_map;
}

Spectrum exact_eigenvalues(const GridModel& model, const Mat& gain) {
  const Mat closed = model.A - model.B1 * lift_gain(model, gain);
  Eigen::EigenSolver<Mat> solver(closed, false);
  if (solver.info() != Eigen::Success) throw ModalError("eigenvalue iteration failed");
  const CVec ev = solver.eigenvalues();
  Spectrum out(ev.data(), ev.data() + ev.size());
  sort_spectrum(out);
  return out;
}

}  // namespace wadc
