#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "support.hpp"
#include "wadc/grid_model.hpp"
#include "wadc/modal.hpp"

using namespace wadc;

namespace {

Spectrum sorted_eigs(const Mat& M) {
  Eigen::EigenSolver<Mat> es(M);
  Spectrum s(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  sort_spectrum(s);
  return s;
}

// Greedy nearest-neighbour distance between two spectra of equal length.
double spectrum_distance(Spectrum a, Spectrum b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (const auto& x : a) {
    auto it = std::min_element(b.begin(), b.end(),
                               [&](Complex l, Complex r) { return std::abs(l - x) < std::abs(r - x); });
    worst = std::max(worst, std::abs(*it - x));
    b.erase(it);
  }
  return worst;
}

// Central-difference Jacobian of the swing right-hand side.
Mat numeric_jacobian(const ModelData& d, const Vec& x0) {
  const auto n = x0.size();
  const Vec zero = Vec::Zero(static_cast<Eigen::Index>(d.machines.size()));
  Mat J(n, n);
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < n; ++j) {
    Vec xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (swing_rhs(d.machines, d.network, xp, zero) - swing_rhs(d.machines, d.network, xm, zero)) / (2 * h);
  }
  return J;
}

// Independent Newton solve on the reduced network, reference angle pinned
// at zero, finite-difference Jacobian.
Vec newton_angles(const std::vector<MachineData>& machines, const ReducedNetwork& net, std::size_t ref) {
  const auto ng = static_cast<Eigen::Index>(machines.size());
  auto mismatch = [&](const Vec& th) {
    Vec f(ng);
    for (Eigen::Index i = 0; i < ng; ++i) {
      double pe = 0.0;
      for (Eigen::Index j = 0; j < ng; ++j) {
        const double d = th(i) - th(j);
        pe += machines[i].emf * machines[j].emf * (net.conductance(i, j) * std::cos(d) + net.susceptance(i, j) * std::sin(d));
      }
      f(i) = machines[i].mech_power - pe;
    }
    return f;
  };
  Vec th = Vec::Zero(ng);
  for (int it = 0; it < 100; ++it) {
    const Vec f = mismatch(th);
    Mat J(ng, ng);
    for (Eigen::Index j = 0; j < ng; ++j) {
      Vec tp = th;
      tp(j) += 1e-7;
      J.col(j) = (mismatch(tp) - f) / 1e-7;
    }
    // Replace the reference row/column so the pinned angle stays fixed.
    J.row(static_cast<Eigen::Index>(ref)).setZero();
    J.col(static_cast<Eigen::Index>(ref)).setZero();
    J(static_cast<Eigen::Index>(ref), static_cast<Eigen::Index>(ref)) = 1.0;
    Vec rhs = -f;
    rhs(static_cast<Eigen::Index>(ref)) = 0.0;
    const Vec dx = J.fullPivLu().solve(rhs);
    th += dx;
    if (dx.norm() < 1e-13) break;
  }
  return th;
}

std::size_t reference_of(const ModelData& d) {
  for (std::size_t i = 0; i < d.machines.size(); ++i)
    if (d.machines[i].reference) return i;
  return 0;
}

}  // namespace

TEST_CASE("two identical machines give the textbook swing frequency") {
  const auto d = test::two_machine();
  const auto m = build_linear_model(d.machines, d.network, d.dt);
  CHECK(m.n == 4);
  // sqrt(2 E^2 B cos(0) / M) = sqrt(2 * 20 / 10) = 2 rad/s
  const auto eig = sorted_eigs(m.A);
  double best = 1e9;
  for (const auto& l : eig) best = std::min(best, std::abs(l - Complex(0.0, 2.0)));
  CHECK(best < 1e-10);
  for (const auto& l : eig) CHECK(std::abs(l.real()) < 1e-6);
}

TEST_CASE("B1 has columns only for controlled machines") {
  auto d = test::three_machine();
  auto m = build_linear_model(d.machines, d.network, d.dt);
  CHECK(m.p == 2);
  CHECK(m.q == 3);
  CHECK(m.controlled == std::vector<std::size_t>{0, 2});
  // e_omega / M for the controlled generators
  CHECK(m.B1(3, 0) == doctest::Approx(1.0 / 12.0));
  CHECK(m.B1(5, 1) == doctest::Approx(1.0 / 16.0));
  CHECK(m.B1.col(0).cwiseAbs().sum() == doctest::Approx(1.0 / 12.0));

  d.machines[2].controlled = false;
  m = build_linear_model(d.machines, d.network, d.dt);
  CHECK(m.p == 1);
  CHECK(m.B1.cols() == 1);
}

TEST_CASE("linearization matches a finite-difference Jacobian") {
  const auto d = test::three_machine();
  const auto m = build_linear_model(d.machines, d.network, d.dt);
  Vec x0 = Vec::Zero(6);
  x0.head(3) = m.equilibrium_angles;
  const Mat J = numeric_jacobian(d, x0);
  CHECK(spectrum_distance(sorted_eigs(J), sorted_eigs(m.A)) < 1e-6);
  CHECK((J - m.A).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("equilibrium errors") {
  auto d = test::two_machine();
  SUBCASE("transfer beyond the tie capacity") {
    d.machines[0].mech_power = 50.0;
    d.machines[1].mech_power = -50.0;
    CHECK_THROWS_WITH_AS(solve_equilibrium(d.machines, d.network), "no stationary operating point", ModelError);
  }
  SUBCASE("disconnected network") {
    d.network.susceptance.setZero();
    CHECK_THROWS_WITH_AS(build_linear_model(d.machines, d.network, 0.01), "disconnected network", ModelError);
  }
  SUBCASE("bad machine data") {
    d.machines[0].inertia = 0.0;
    CHECK_THROWS_AS(validate_machines(d.machines), ModelError);
  }
}

TEST_CASE("simulate_linear: A = 0 stays constant") {
  const auto m = GridModel::from_matrices(Mat::Zero(2, 2), Mat::Zero(2, 1), Mat::Zero(2, 1), 1, 0.01);
  Vec x0(2);
  x0 << 0.3, -0.7;
  const auto traj = simulate_linear(m, x0, nullptr, 0.0, 100, 1);
  REQUIRE(traj.size() == 101);
  for (const auto& s : traj) CHECK(s.stacked() == x0);
}

TEST_CASE("simulate_linear: scalar decay matches exp(-t)") {
  Mat A(1, 1);
  A << -1.0;
  const auto m = GridModel::from_matrices(A, Mat::Zero(1, 1), Mat::Zero(1, 1), 0, 0.01);
  Vec x0(1);
  x0 << 1.0;
  const auto traj = simulate_linear(m, x0, nullptr, 0.0, 500, 1);
  for (std::size_t k = 0; k < traj.size(); ++k)
    CHECK(traj[k].stacked()(0) == doctest::Approx(std::exp(-0.01 * static_cast<double>(k))).epsilon(1e-12));
}

TEST_CASE("simulate_linear follows the modal solution") {
  const auto d = test::three_machine();
  const auto m = build_linear_model(d.machines, d.network, d.dt);
  const auto modes = participation_factors(m.A);
  const auto& mode = modes[find_interarea_mode(modes)];
  const Vec x0 = mode.right.real();
  const auto traj = simulate_linear(m, x0, nullptr, 0.0, 1000, 1);
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = 0.01 * static_cast<double>(k);
    const Vec expected = (std::exp(mode.eigenvalue * t) * mode.right).real();
    worst = std::max(worst, (traj[k].stacked() - expected).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8 * x0.cwiseAbs().maxCoeff());
}

TEST_CASE("log amplitude of a mode decays at Re(lambda)") {
  const auto d = test::three_machine();
  const auto m = build_linear_model(d.machines, d.network, d.dt);
  const auto modes = participation_factors(m.A);
  const auto& mode = modes[find_interarea_mode(modes)];
  const auto traj = simulate_linear(m, Vec(mode.right.real()), nullptr, 0.0, 2000, 1);
  // least squares slope of log|psi^T x(t)|
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double N = static_cast<double>(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = 0.01 * static_cast<double>(k);
    const double y = std::log(std::abs(mode.left.dot(traj[k].stacked().cast<Complex>())));
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double slope = (N * sty - st * sy) / (N * stt - st * st);
  CHECK(slope == doctest::Approx(mode.eigenvalue.real()).epsilon(0.01));
}

TEST_CASE("halving dt gives the same states at shared times") {
  const auto d = test::three_machine();
  const auto m = build_linear_model(d.machines, d.network, 0.02);
  auto half = m;
  half.dt = 0.01;
  Vec x0 = Vec::Zero(6);
  x0(0) = 0.05;
  x0(4) = -0.02;
  const Vec u = Vec::Constant(2, 0.1);
  auto hold = [&](std::size_t, const SystemState&) { return u; };
  const auto coarse = simulate_linear(m, x0, hold, 0.0, 200, 1);
  const auto fine = simulate_linear(half, x0, hold, 0.0, 400, 1);
  double worst = 0.0;
  for (std::size_t k = 0; k < coarse.size(); ++k)
    worst = std::max(worst, (coarse[k].stacked() - fine[2 * k].stacked()).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-10);
}

TEST_CASE("simulate_linear reports divergence with the step index") {
  Mat A(1, 1);
  A << 1e4;
  const auto m = GridModel::from_matrices(A, Mat::Zero(1, 1), Mat::Zero(1, 1), 0, 0.01);
  Vec x0(1);
  x0 << 1.0;
  try {
    simulate_linear(m, x0, nullptr, 0.0, 100, 1);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() > 0);
    CHECK(e.step() < 100);
  }
}

TEST_CASE("simulate_linear: noise is seed-deterministic") {
  const auto d = test::three_machine();
  const auto m = build_linear_model(d.machines, d.network, d.dt);
  const Vec x0 = Vec::Zero(6);
  const auto a = simulate_linear(m, x0, nullptr, 0.01, 50, 42);
  const auto b = simulate_linear(m, x0, nullptr, 0.01, 50, 42);
  const auto c = simulate_linear(m, x0, nullptr, 0.01, 50, 43);
  CHECK(a.back().stacked() == b.back().stacked());
  CHECK(a.back().stacked() != c.back().stacked());
  CHECK_THROWS_AS(simulate_linear(m, Vec::Zero(5), nullptr, 0.0, 1, 1), InvalidArgument);
}

TEST_CASE("simulate_nonlinear: the equilibrium is invariant") {
  const auto d = test::three_machine();
  const auto traj = simulate_nonlinear(d.machines, FaultScenario::none(d.network), nullptr, 0.01, 1000);
  const Vec th0 = traj.front().theta;
  double worst = 0.0;
  for (const auto& s : traj) {
    worst = std::max(worst, s.omega.cwiseAbs().maxCoeff());
    worst = std::max(worst, (s.theta - th0).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("two-machine nonlinear oscillation peaks at the linear frequency") {
  const auto d = test::two_machine();
  SystemState init;
  init.theta = Vec::Zero(2);
  init.theta(0) = 0.01;
  init.omega = Vec::Zero(2);
  const std::size_t steps = 40000;
  const auto traj = simulate_nonlinear(d.machines, FaultScenario::none(d.network), nullptr, 0.01, steps, init);
  // DFT magnitude of the angle difference on a fine frequency grid
  double best_f = 0.0, best_mag = 0.0;
  for (double f = 0.05; f < 1.0; f += 5e-4) {
    Complex acc = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double t = 0.01 * static_cast<double>(k);
      acc += (traj[k].theta(0) - traj[k].theta(1)) * std::polar(1.0, -2.0 * std::numbers::pi * f * t);
    }
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best_f = f;
    }
  }
  const double linear_f = 2.0 / (2.0 * std::numbers::pi);
  CHECK(std::abs(best_f - linear_f) / linear_f < 0.02);
}

TEST_CASE("after a cleared fault the plant settles at the post-fault equilibrium") {
  auto d = test::three_machine();
  FaultScenario s;
  s.bus_from = 1;
  s.bus_to = 2;
  s.start = 0.1;
  s.near_clear = 0.2;
  s.remote_clear = 0.5;
  s.pre_fault = d.network;
  s.fault_on = d.network;
  s.fault_on.susceptance(1, 2) = s.fault_on.susceptance(2, 1) = 5.0;
  s.fault_on.susceptance(0, 2) = s.fault_on.susceptance(2, 0) = 30.0;
  s.post_fault = d.network;
  s.post_fault.susceptance(1, 2) = s.post_fault.susceptance(2, 1) = 28.0;
  const auto traj = simulate_nonlinear(d.machines, s, nullptr, 0.01, 8000);
  const Vec expected = newton_angles(d.machines, s.post_fault, reference_of(d));
  const auto& last = traj.back();
  const Vec rel = last.theta.array() - last.theta(2);
  CHECK((rel - expected).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(last.omega.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("solve_equilibrium agrees with an independent Newton solve") {
  const auto d = test::three_machine();
  const Vec th = solve_equilibrium(d.machines, d.network);
  CHECK((th - newton_angles(d.machines, d.network, reference_of(d))).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("linear and nonlinear models agree for small perturbations") {
  const auto d = test::three_machine();
  const auto m = build_linear_model(d.machines, d.network, d.dt);
  SystemState init;
  init.theta = m.equilibrium_angles;
  init.theta(0) += 1e-3;
  init.omega = Vec::Zero(3);
  const auto nl = simulate_nonlinear(d.machines, FaultScenario::none(d.network), nullptr, 0.01, 500, init);
  Vec dx = Vec::Zero(6);
  dx(0) = 1e-3;
  const auto lin = simulate_linear(m, dx, nullptr, 0.0, 500, 1);
  double worst = 0.0;
  for (std::size_t k = 0; k < lin.size(); ++k) {
    const Vec dth = nl[k].theta - m.equilibrium_angles;
    worst = std::max(worst, (dth - lin[k].theta).cwiseAbs().maxCoeff());
  }
  // second-order terms only: well below the perturbation itself
  CHECK(worst < 1e-3 * 1e-3 * 10);
}

TEST_CASE("exact_eigenvalues") {
  SUBCASE("K = 0 is the open-loop spectrum") {
    const auto d = test::three_machine();
    const auto m = build_linear_model(d.machines, d.network, d.dt);
    const auto s = exact_eigenvalues(m, Mat::Zero(2, 6));
    CHECK(spectrum_distance(s, sorted_eigs(m.A)) < 1e-12);
  }
  SUBCASE("diagonal shift") {
    Mat A = Vec(Eigen::Vector2d(-1.0, -2.0)).asDiagonal();
    const auto m = GridModel::from_matrices(A, Mat::Identity(2, 2), Mat::Zero(2, 1), 1, 0.01);
    const auto s = exact_eigenvalues(m, Mat::Identity(2, 2));
    REQUIRE(s.size() == 2);
    CHECK(std::abs(s[0] - Complex(-2.0, 0.0)) < 1e-12);
    CHECK(std::abs(s[1] - Complex(-3.0, 0.0)) < 1e-12);
  }
  SUBCASE("gain shape mismatch") {
    const auto d = test::three_machine();
    const auto m = build_linear_model(d.machines, d.network, d.dt);
    CHECK_THROWS_WITH_AS(exact_eigenvalues(m, Mat::Zero(2, 5)), "gain shape mismatch", InvalidArgument);
  }
  SUBCASE("conjugate pairs and canonical order") {
    const auto d = test::three_machine();
    const auto m = build_linear_model(d.machines, d.network, d.dt);
    const auto s = exact_eigenvalues(m, Mat::Zero(2, 6));
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1].real() >= s[i].real() - 1e-12);
    for (const auto& l : s) {
      if (std::abs(l.imag()) < 1e-9) continue;
      const bool has_conj = std::any_of(s.begin(), s.end(), [&](Complex c) { return std::abs(c - std::conj(l)) < 1e-9; });
      CHECK(has_conj);
    }
  }
}

TEST_CASE("closed-loop eigenvalues match companion-matrix roots") {
  const auto d = test::three_machine();
  const auto m = build_linear_model(d.machines, d.network, d.dt);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    Mat K(2, 6);
    for (Eigen::Index i = 0; i < K.size(); ++i) K(i) = u(rng);
    // Lift through relative angles by hand: columns 0..2 act on theta_i - theta_3.
    Mat lifted = Mat::Zero(2, 6);
    for (int i = 0; i < 3; ++i) {
      lifted.col(i) += K.col(i);
      lifted.col(2) -= K.col(i);
      lifted.col(3 + i) = K.col(3 + i);
    }
    const Mat Acl = m.A - m.B1 * lifted;
    // Faddeev-LeVerrier characteristic polynomial
    const int n = 6;
    std::vector<double> c(n + 1);
    c[n] = 1.0;
    Mat Mk = Mat::Zero(n, n);
    for (int k = 1; k <= n; ++k) {
      Mk = Acl * Mk + c[n - k + 1] * Mat::Identity(n, n);
      c[n - k] = -(Acl * Mk).trace() / k;
    }
    Mat companion = Mat::Zero(n, n);
    for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) companion(i, n - 1) = -c[i];
    CHECK(spectrum_distance(exact_eigenvalues(m, K), sorted_eigs(companion)) < 1e-8);
  }
}

TEST_CASE("fault scenario switching") {
  const auto d = test::three_machine();
  FaultScenario s = FaultScenario::none(d.network);
  s.start = 0.1;
  s.near_clear = 0.2;
  s.remote_clear = 0.5;
  s.fault_on.susceptance(1, 2) = s.fault_on.susceptance(2, 1) = 5.0;
  s.post_fault.susceptance(1, 2) = s.post_fault.susceptance(2, 1) = 28.0;
  s.validate();
  CHECK(&s.network_at(9, 0.01) == &s.pre_fault);
  CHECK(&s.network_at(10, 0.01) == &s.fault_on);
  CHECK(&s.network_at(19, 0.01) == &s.fault_on);
  CHECK(&s.network_at(20, 0.01) == &s.post_fault);
  s.near_clear = 0.05;
  CHECK_THROWS_AS(s.validate(), ModelError);
}

TEST_CASE("model file parsing") {
  SUBCASE("unknown key") {
    CHECK_THROWS_AS(parse_model(R"({"dt":0.01,"machines":[],"bogus":1})"), ConfigError);
  }
  SUBCASE("syntax error reports the line") {
    try {
      parse_model("{\n\"dt\": 0.01,\n oops\n}");
      FAIL("expected a parse error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("trajectory table has 12 significant digits") {
    Trajectory t(1);
    t[0].theta = Vec::Constant(1, 1.0 / 3.0);
    t[0].omega = Vec::Constant(1, 0.0);
    const auto text = trajectory_table(t, 0.01).str();
    CHECK(text.find("t,theta_1,omega_1") == 0);
    CHECK(text.find("0.333333333333") != std::string::npos);
    CHECK(text.find("0.3333333333333") == std::string::npos);
  }
}
