#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "wadc/types.hpp"

namespace wadc {

/// Classical machine behind a reduced network: M w' = Pm - Pe - D w + u.
struct MachineData {
  double inertia = 0.0;
  double damping = 0.0;
  double emf = 0.0;
  double mech_power = 0.0;
  bool controlled = false;
  bool reference = false;
};

/// Network-reduced admittance Y = G + jB between internal machine buses.
struct ReducedNetwork {
  Mat conductance;
  Mat susceptance;
};

/// Rotor angles, frequency deviations and any remaining states.
struct SystemState {
  Vec theta;
  Vec omega;
  Vec rem;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(theta.size() + omega.size() + rem.size());
  }
  Vec stacked() const;
  static SystemState unstack(const Vec& x, std::size_t generators);
};

using Trajectory = std::vector<SystemState>;

/// Linear model x' = A x + B1 u + B2 eta around a stationary operating point.
///
/// Built once and never mutated afterwards; safe to share between threads.
struct GridModel {
  std::size_t n = 0;    // total state dimension
  std::size_t n_g = 0;  // generators
  std::size_t p = 0;    // controlled inputs
  std::size_t q = 0;    // noise inputs
  Mat A;
  Mat B1;
  Mat B2;
  std::vector<MachineData> machines;
  Vec equilibrium_angles;
  ReducedNetwork network;
  double dt = 0.01;

  /// Generator index driven by each column of B1.
  std::vector<std::size_t> controlled;
  std::size_t reference = 0;

  /// Maps the state onto the wide-area observation (m x n, m = 2 n_g).
  /// Grid models observe angles relative to the reference machine; models
  /// assembled from raw matrices observe the leading 2 n_g states directly.
  Mat observation_map;

  std::size_t observation_size() const noexcept { return 2 * n_g; }

  /// Wraps arbitrary matrices. Column j of B1 is treated as controlled input j
  /// and the observation is the first 2 n_g states.
  static GridModel from_matrices(Mat A, Mat B1, Mat B2, std::size_t generators, double dt);
};

/// Time-ordered network switching for a three-phase fault on one line.
///
/// The fault-on network holds on [start, near_clear), the near-end-cleared
/// network on [near_clear, remote_clear) and the post-fault network after.
struct FaultScenario {
  std::size_t bus_from = 0;
  std::size_t bus_to = 0;
  double start = std::numeric_limits<double>::infinity();
  double near_clear = std::numeric_limits<double>::infinity();
  double remote_clear = std::numeric_limits<double>::infinity();
  ReducedNetwork pre_fault;
  ReducedNetwork fault_on;
  ReducedNetwork post_fault;
  std::optional<ReducedNetwork> near_cleared;

  /// No events: the pre-fault network holds for the whole run.
  static FaultScenario none(ReducedNetwork network);

  bool has_fault() const noexcept { return start < std::numeric_limits<double>::infinity(); }
  void validate() const;

  /// Network in force for the step starting at `step * dt`. Each switch takes
  /// effect at the first step boundary at or after its event time.
  const ReducedNetwork& network_at(std::size_t step, double dt) const;
};

struct EquilibriumOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
};

void validate_machines(const std::vector<MachineData>& machines);
void validate_network(const ReducedNetwork& network, std::size_t generators);

/// Electrical power delivered by each machine at the given rotor angles.
Vec electrical_power(const std::vector<MachineData>& machines, const ReducedNetwork& network,
                     const Vec& theta);

/// d Pe_i / d theta_j.
Mat power_angle_jacobian(const std::vector<MachineData>& machines,
                         const ReducedNetwork& network, const Vec& theta);

/// Right-hand side of the swing equations for x = (theta, omega).
/// `injection` holds one additive power term per generator.
Vec swing_rhs(const std::vector<MachineData>& machines, const ReducedNetwork& network,
              const Vec& x, const Vec& injection);

/// Newton solve of Pm = Pe(theta) from a flat start with the reference angle
/// pinned at zero.
Vec solve_equilibrium(const std::vector<MachineData>& machines, const ReducedNetwork& network,
                      const EquilibriumOptions& options = {});

GridModel build_linear_model(const std::vector<MachineData>& machines,
                             const ReducedNetwork& network, double dt);

/// Zero-order-hold discretization of (A, B1, B2) at step dt.
struct DiscreteModel {
  Mat Ad;
  Mat B1d;
  Mat B2d;

  static DiscreteModel zero_order_hold(const GridModel& model);
  static DiscreteModel zero_order_hold(const Mat& A, const Mat& B1, const Mat& B2, double dt);
};

using ControlFn = std::function<Vec(std::size_t step, const SystemState& state)>;

Trajectory simulate_linear(const GridModel& model, const Vec& x0, const ControlFn& control,
                           double noise_std, std::size_t steps, std::uint64_t seed);

/// One classical RK4 step of the swing equations with the injection held.
Vec rk4_swing_step(const std::vector<MachineData>& machines, const ReducedNetwork& network,
                   const Vec& x, const Vec& injection, double dt);

/// Nonlinear reduced swing model with fault switching. Control inputs are
/// indexed like the controlled machines. Starts from `initial` when given,
/// otherwise from the pre-fault equilibrium at rest.
Trajectory simulate_nonlinear(const std::vector<MachineData>& machines,
                              const FaultScenario& scenario, const ControlFn& control, double dt,
                              std::size_t steps,
                              const std::optional<SystemState>& initial = std::nullopt);

/// Lifts a p x m wide-area gain onto the full state through the model's
/// observation map.
Mat lift_gain(const GridModel& model, const Mat& gain);

/// Spectrum of A - B1 K, canonical order.
Spectrum exact_eigenvalues(const GridModel& model, const Mat& gain);

}  // namespace wadc
