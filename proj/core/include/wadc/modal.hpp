#pragma once

#include <utility>
#include <vector>

#include "wadc/types.hpp"

namespace wadc {

struct ModeMetrics {
  double natural_frequency = 0.0;  // |lambda|
  double damping_ratio = 0.0;      // -Re(lambda) / |lambda|
};

/// One eigenvalue of a state matrix with its eigenvectors and participations.
struct Mode {
  Complex eigenvalue;
  CVec right;  // phi
  CVec left;   // psi, normalized so that psi^T phi = 1
  ModeMetrics metrics;
  Vec participation;  // sums to 1

  bool oscillatory(double tol = 1e-9) const noexcept { return std::abs(eigenvalue.imag()) > tol; }
};

ModeMetrics mode_metrics(Complex lambda) noexcept;

/// Modes of A in canonical order with state participation factors.
/// Throws ModalError when the eigenvector matrix condition number exceeds 1e12.
std::vector<Mode> participation_factors(const Mat& A);

/// pi(theta_i) + pi(omega_i) for each generator.
Vec generator_participation(const Mode& mode, std::size_t generators);

/// Lowest-frequency oscillatory mode with positive imaginary part; the
/// inter-area candidate of an electromechanical model.
std::size_t find_interarea_mode(const std::vector<Mode>& modes);

/// The `count` generators with largest aggregated participation in the target
/// mode, ties to the lower index. Returned in ascending index order.
std::vector<std::size_t> select_controlled_generators(const std::vector<Mode>& modes,
                                                      std::size_t target_mode, std::size_t count,
                                                      std::size_t generators);

/// Time-ordered snapshots x(0) ... x(W), one column each.
struct SnapshotWindow {
  Mat snapshots;
  double dt = 0.0;

  std::size_t length() const noexcept {
    return snapshots.cols() > 0 ? static_cast<std::size_t>(snapshots.cols() - 1) : 0;
  }
};

struct DmdResult {
  Spectrum eigenvalues;  // continuous time, canonical order
  Vec singular_values;   // retained after truncation
  std::size_t rank = 0;
};

DmdResult dmd_analyze(const SnapshotWindow& window);

/// Continuous-time eigenvalue estimates ln(mu)/dt from exact DMD.
inline Spectrum dmd_estimate(const SnapshotWindow& window) { return dmd_analyze(window).eigenvalues; }

/// Closed-to-open-loop correspondence over oscillatory representatives
/// (Im > 1e-9). Indices refer to the input lists.
struct SpectrumPairing {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (closed, open)
  std::vector<std::size_t> unmatched_closed;
  std::vector<std::size_t> unmatched_open;
};

SpectrumPairing pair_spectra(const Spectrum& closed, const Spectrum& open);

}  // namespace wadc
