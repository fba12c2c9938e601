#pragma once

#include <vector>

#include "gridosc/grid_model.hpp"
#include "gridosc/symmetry.hpp"

namespace gridosc {

// dx/dt = A x + B d, z = C x.
struct LtiSystem {
  Matrix A;
  Matrix B;
  Matrix C;
};

/// Reduced closed loop under u = -F xi: A = Abar - B2bar F, B = B1bar, C = [Qbar^{1/2}; -R^{1/2} F].
LtiSystem closed_loop_system(const ReducedModel& reduced, const Matrix& F);

/// n_points log-spaced frequencies on [lo, hi] (rad/s).
std::vector<double> log_grid(double lo, double hi, int n_points);
/// 400 points over [0.01, 100] rad/s.
std::vector<double> default_frequency_grid();

struct PsdPeak {
  double omega = 0.0;
  double value = 0.0;
};

struct PsdCurve {
  std::vector<double> omega;
  std::vector<double> values;
  std::vector<PsdPeak> peaks;  // ascending frequency

  /// Highest peak; falls back to the global maximum when no interior peak exists.
  PsdPeak dominant() const;
};

/// Strict 3-point local maxima whose topographic prominence is at least
/// `min_prominence` times the global maximum.
std::vector<PsdPeak> find_peaks(const std::vector<double>& omega, const std::vector<double>& values,
                                double min_prominence = 0.01);

/// ||H(jw)||_HS^2 on the grid. Throws NotHurwitz. `jobs` workers evaluate frequencies.
PsdCurve psd(const LtiSystem& system, const std::vector<double>& grid, int jobs = 1);

struct VarianceReport {
  double J = 0.0;
  Matrix X;   // steady-state covariance of xi
  Matrix Z1;  // Qbar^{1/2} X Qbar^{T/2}
  Matrix Z2;  // R^{1/2} F X F^T R^{1/2}
  Vector z1_eigenvalues;   // descending
  Matrix z1_eigenvectors;  // column i pairs with z1_eigenvalues(i)
  Vector angle_contribution;      // diag(Z1) on angle states, per generator
  Vector frequency_contribution;  // diag(Z1) on frequency states, per generator (0 if absent)
};

/// Variance amplification of the reduced closed loop. Throws NotHurwitz.
VarianceReport h2_report(const ReducedModel& reduced, const Matrix& F);

/// Squared H2 norm trace(C X C^T) of a Hurwitz system.
double h2_norm_sq(const LtiSystem& system);

struct CovarianceSpectrum {
  Vector lambda;               // descending, top_k entries
  Matrix vectors;              // matching eigenvectors of Z1
  Vector cumulative_fraction;  // sum_{i<=k} lambda_i / trace(Z1)
};

CovarianceSpectrum covariance_spectrum(const VarianceReport& report, int top_k);

double damping_ratio(Complex eigenvalue);
double frequency_hz(Complex eigenvalue);

struct ModalEntry {
  Complex eigenvalue;
  double damping_ratio = 0.0;
  double frequency_hz = 0.0;
  CVector mode_shape;     // angle components, largest has unit magnitude and zero phase
  CVector right_vector;   // full eigenvector
  Vector participation;   // |psi_ki phi_ik| per state, max 1; empty if no left basis
};

struct ModalTable {
  std::vector<ModalEntry> modes;  // ascending damping ratio
};

/// Oscillatory modes (positive imaginary part of each pair) with damping below `threshold`.
ModalTable modal_table(const Matrix& A, int N, double threshold);
ModalTable modal_table(const StateSpaceModel& model, double threshold);

/// Participation factors |psi_ki phi_ki| per mode (columns), normalized to max 1 per column.
Matrix participation_factors(const EigenDecomposition& decomposition);

struct Trajectory {
  std::vector<double> time;
  Matrix states;  // one row per time point
};

/// Exact LTI stepping x_{k+1} = e^{A dt} x_k for t in [0, horizon].
Trajectory simulate(const Matrix& A, const Vector& x0, double horizon, double dt);

/// Real part of a mode's full eigenvector, scaled to unit max-norm.
Vector modal_initial_condition(const ModalEntry& mode);

/// First sample time after which the deviation max(|theta_i - mean(theta)|, |r_j|)
/// stays within `band` times its peak; 0 for an identically zero trajectory.
double settling_time(const Trajectory& trajectory, int N, double band = 0.02);

}  // namespace gridosc
