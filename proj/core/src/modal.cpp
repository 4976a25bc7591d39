#include "wadc/modal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace wadc {

namespace {
constexpr double kOscillatoryTol = 1e-9;
constexpr double kMaxEigenvectorCondition = 1e12;
constexpr double kSvdRelativeCutoff = 1e-10;
constexpr double kNegligibleDiscreteEigenvalue = 1e-12;
}  // namespace

ModeMetrics mode_metrics(Complex lambda) noexcept {
  ModeMetrics m;
  m.natural_frequency = std::hypot(lambda.real(), lambda.imag());
  m.damping_ratio = m.natural_frequency > 0.0 ? -lambda.real() / m.natural_frequency : 0.0;
  return m;
}

std::vector<Mode> participation_factors(const Mat& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw InvalidArgument("A must be square and non-empty");
  Eigen::EigenSolver<Mat> solver(A, true);
  if (solver.info() != Eigen::Success) throw ModalError("eigenvalue iteration failed");
  const CMat right = solver.eigenvectors();
  const CVec values = solver.eigenvalues();

  Eigen::JacobiSVD<CMat> svd(right);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || sv(0) / smin > kMaxEigenvectorCondition)
    throw ModalError("non-diagonalizable within tolerance");
  const CMat left = right.partialPivLu().inverse();

  std::vector<Mode> modes;
  modes.reserve(static_cast<std::size_t>(values.size()));
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    Mode mode;
    mode.eigenvalue = values(k);
    mode.right = right.col(k);
    mode.left = left.row(k).transpose();
    mode.metrics = mode_metrics(values(k));
    const Vec weight = mode.left.cwiseProduct(mode.right).cwiseAbs();
    mode.participation = weight / weight.sum();
    modes.push_back(std::move(mode));
  }
  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.eigenvalue.real() != b.eigenvalue.real()) return a.eigenvalue.real() > b.eigenvalue.real();
    return a.eigenvalue.imag() > b.eigenvalue.imag();
  });
  return modes;
}

Vec generator_participation(const Mode& mode, std::size_t generators) {
  const auto ng = static_cast<Eigen::Index>(generators);
  if (mode.participation.size() < 2 * ng) throw InvalidArgument("mode has fewer than 2 * n_g states");
  return mode.participation.head(ng) + mode.participation.segment(ng, ng);
}

std::size_t find_interarea_mode(const std::vector<Mode>& modes) {
  std::size_t best = modes.size();
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (modes[k].eigenvalue.imag() <= kOscillatoryTol) continue;
    if (best == modes.size() || modes[k].eigenvalue.imag() < modes[best].eigenvalue.imag()) best = k;
  }
  if (best == modes.size()) throw ModalError("model has no oscillatory mode");
  return best;
}

std::vector<std::size_t> select_controlled_generators(const std::vector<Mode>& modes,
                                                      std::size_t target_mode, std::size_t count,
                                                      std::size_t generators) {
  if (target_mode >= modes.size()) throw InvalidArgument("target mode out of range");
  if (count < 1 || count > generators) throw InvalidArgument("count must lie in [1, n_g]");
  // Round so that participations equal up to eigen-solver noise tie exactly.
  const Vec part = (generator_participation(modes[target_mode], generators) * 1e12).array().round();
  std::vector<std::size_t> order(generators);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return part(static_cast<Eigen::Index>(a)) > part(static_cast<Eigen::Index>(b));
  });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

DmdResult dmd_analyze(const SnapshotWindow& window) {
  const auto cols = window.snapshots.cols();
  if (cols < 3) throw ModalError("insufficient data");
  if (!(window.dt > 0.0)) throw InvalidArgument("snapshot spacing must be positive");
  if (!window.snapshots.allFinite()) throw InvalidArgument("snapshots must be finite");

  const Mat X = window.snapshots.leftCols(cols - 1);
  const Mat Y = window.snapshots.rightCols(cols - 1);
  Eigen::BDCSVD<Mat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0.0)) throw ModalError("insufficient data");
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > kSvdRelativeCutoff * sv(0)) ++rank;

  const Mat U = svd.matrixU().leftCols(rank);
  const Mat V = svd.matrixV().leftCols(rank);
  const Vec inv_sigma = sv.head(rank).cwiseInverse();
  const Mat F = U.transpose() * Y * V * inv_sigma.asDiagonal();

  Eigen::EigenSolver<Mat> solver(F, false);
  if (solver.info() != Eigen::Success) throw ModalError("eigenvalue iteration failed");
  const CVec mu = solver.eigenvalues();

  DmdResult result;
  result.rank = static_cast<std::size_t>(rank);
  result.singular_values = sv.head(rank);
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (std::abs(mu(i)) < kNegligibleDiscreteEigenvalue) continue;
    // |Im(lambda)| dt = |arg mu| reaches pi only on the negative real axis.
    if (mu(i).imag() == 0.0 && mu(i).real() < 0.0)
      throw ModalError("estimated mode at the Nyquist limit; reduce the sampling step");
    result.eigenvalues.push_back(std::log(mu(i)) / window.dt);
  }
  sort_spectrum(result.eigenvalues);
  return result;
}

SpectrumPairing pair_spectra(const Spectrum& closed, const Spectrum& open) {
  SpectrumPairing out;
  std::vector<bool> open_used(open.size(), true);
  for (std::size_t j = 0; j < open.size(); ++j) open_used[j] = !(open[j].imag() > kOscillatoryTol);
  std::vector<bool> closed_used(closed.size(), false);

  for (std::size_t i = 0; i < closed.size(); ++i) {
    if (!(closed[i].imag() > kOscillatoryTol)) continue;
    std::size_t best = open.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < open.size(); ++j) {
      if (open_used[j]) continue;
      const double d = std::abs(closed[i] - open[j]);
      if (d < best_dist) {
        best_dist = d;
        best = j;
      }
    }
    if (best == open.size()) continue;
    open_used[best] = true;
    closed_used[i] = true;
    out.pairs.emplace_back(i, best);
  }
  std::vector<bool> open_paired(open.size(), false);
  for (const auto& [c, o] : out.pairs) open_paired[o] = true;
  for (std::size_t i = 0; i < closed.size(); ++i)
    if (!closed_used[i]) out.unmatched_closed.push_back(i);
  for (std::size_t j = 0; j < open.size(); ++j)
    if (!open_paired[j]) out.unmatched_open.push_back(j);
  return out;
}

}  // namespace wadc
