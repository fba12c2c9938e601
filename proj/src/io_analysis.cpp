#include "gridosc/io_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "gridosc/error.hpp"
#include "gridosc/parallel.hpp"

namespace gridosc {

LtiSystem closed_loop_system(const ReducedModel& reduced, const Matrix& F) {
  if (F.rows() != reduced.m() || F.cols() != reduced.n()) {
    throw Error(ErrorKind::DimensionMismatch, "reduced gain must be m x (n-1)");
  }
  LtiSystem sys;
  sys.A = reduced.A - reduced.B2 * F;
  sys.B = reduced.B1;
  sys.C.resize(reduced.Qsqrt.rows() + reduced.Rsqrt.rows(), reduced.n());
  sys.C.topRows(reduced.Qsqrt.rows()) = reduced.Qsqrt;
  sys.C.bottomRows(reduced.Rsqrt.rows()) = -reduced.Rsqrt * F;
  return sys;
}

std::vector<double> log_grid(double lo, double hi, int n_points) {
  if (!(lo > 0.0) || !(hi > lo) || n_points < 2) {
    throw Error(ErrorKind::Config, "log grid needs 0 < lo < hi and at least two points");
  }
  std::vector<double> grid(static_cast<size_t>(n_points));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int k = 0; k < n_points; ++k) {
    grid[static_cast<size_t>(k)] = std::pow(10.0, a + (b - a) * k / (n_points - 1));
  }
  return grid;
}

std::vector<double> default_frequency_grid() {
  return log_grid(0.01, 100.0, 400);
}

PsdPeak PsdCurve::dominant() const {
  if (!peaks.empty()) {
    return *std::max_element(peaks.begin(), peaks.end(),
                             [](const PsdPeak& a, const PsdPeak& b) { return a.value < b.value; });
  }
  if (values.empty()) return {};
  const auto it = std::max_element(values.begin(), values.end());
  const auto k = static_cast<size_t>(it - values.begin());
  return {omega[k], *it};
}

std::vector<PsdPeak> find_peaks(const std::vector<double>& omega, const std::vector<double>& values,
                                double min_prominence) {
  std::vector<PsdPeak> peaks;
  const size_t n = values.size();
  if (n < 3 || omega.size() != n) return peaks;
  const double global = *std::max_element(values.begin(), values.end());
  for (size_t k = 1; k + 1 < n; ++k) {
    if (!(values[k] > values[k - 1] && values[k] > values[k + 1])) continue;
    // Lowest point between this peak and the nearest higher sample on each side.
    double left_min = values[k];
    for (size_t i = k; i-- > 0;) {
      if (values[i] > values[k]) break;
      left_min = std::min(left_min, values[i]);
    }
    double right_min = values[k];
    for (size_t i = k + 1; i < n; ++i) {
      if (values[i] > values[k]) break;
      right_min = std::min(right_min, values[i]);
    }
    const double prominence = values[k] - std::max(left_min, right_min);
    if (prominence >= min_prominence * global) peaks.push_back({omega[k], values[k]});
  }
  return peaks;
}

PsdCurve psd(const LtiSystem& system, const std::vector<double>& grid, int jobs) {
  require_hurwitz(system.A, "closed-loop matrix");
  for (size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw Error(ErrorKind::Config, "frequency grid must be strictly increasing");
  }
  const FrequencyResponse response(system.A, system.B, system.C);
  PsdCurve curve;
  curve.omega = grid;
  curve.values.assign(grid.size(), 0.0);
  parallel_for(grid.size(), jobs, [&](size_t k) { curve.values[k] = hilbert_schmidt_sq(response(grid[k])); });
  curve.peaks = find_peaks(curve.omega, curve.values);
  return curve;
}

double h2_norm_sq(const LtiSystem& system) {
  const Matrix X = solve_lyapunov(system.A, system.B * system.B.transpose());
  return (system.C * X * system.C.transpose()).trace();
}

VarianceReport h2_report(const ReducedModel& reduced, const Matrix& F) {
  const LtiSystem sys = closed_loop_system(reduced, F);
  VarianceReport report;
  report.X = solve_lyapunov(sys.A, reduced.B1 * reduced.B1.transpose());
  report.Z1 = reduced.Qsqrt * report.X * reduced.Qsqrt.transpose();
  const Matrix RF = reduced.Rsqrt * F;
  report.Z2 = RF * report.X * RF.transpose();
  report.Z1 = (0.5 * (report.Z1 + report.Z1.transpose())).eval();
  report.Z2 = (0.5 * (report.Z2 + report.Z2.transpose())).eval();
  report.J = report.Z1.trace() + report.Z2.trace();

  Eigen::SelfAdjointEigenSolver<Matrix> solver(report.Z1);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::ConvergenceFailure, "output covariance eigensolver did not converge");
  }
  report.z1_eigenvalues = solver.eigenvalues().reverse();
  report.z1_eigenvectors = solver.eigenvectors().rowwise().reverse();

  const int N = reduced.N();
  report.angle_contribution = report.Z1.diagonal().head(N);
  report.frequency_contribution = Vector::Zero(N);
  for (int g = 0; g < N && g < static_cast<int>(reduced.generator_state_map.size()); ++g) {
    const auto& states = reduced.generator_state_map[static_cast<size_t>(g)];
    if (!states.empty()) report.frequency_contribution(g) = report.Z1(N + states.front(), N + states.front());
  }
  return report;
}

CovarianceSpectrum covariance_spectrum(const VarianceReport& report, int top_k) {
  const auto total_count = report.z1_eigenvalues.size();
  const auto k = std::clamp<Eigen::Index>(top_k, 0, total_count);
  CovarianceSpectrum out;
  out.lambda = report.z1_eigenvalues.head(k);
  out.vectors = report.z1_eigenvectors.leftCols(k);
  out.cumulative_fraction.resize(k);
  const double total = report.Z1.trace();
  double running = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    running += out.lambda(i);
    out.cumulative_fraction(i) = total > 0.0 ? running / total : 0.0;
  }
  return out;
}

double damping_ratio(Complex eigenvalue) {
  const double magnitude = std::abs(eigenvalue);
  return magnitude > 0.0 ? -eigenvalue.real() / magnitude : 0.0;
}

double frequency_hz(Complex eigenvalue) {
  return std::abs(eigenvalue.imag()) / (2.0 * std::numbers::pi);
}

Matrix participation_factors(const EigenDecomposition& d) {
  if (!d.left) return {};
  const Eigen::Index n = d.right.rows();
  Matrix p(n, n);
  for (Eigen::Index mode = 0; mode < n; ++mode) {
    for (Eigen::Index k = 0; k < n; ++k) p(k, mode) = std::abs((*d.left)(mode, k) * d.right(k, mode));
    const double peak = p.col(mode).maxCoeff();
    if (peak > 0.0) p.col(mode) /= peak;
  }
  return p;
}

ModalTable modal_table(const Matrix& A, int N, double threshold) {
  const EigenDecomposition d = eig(A, true);
  const Matrix participation = participation_factors(d);
  ModalTable table;
  const Eigen::Index n = A.rows();
  const Eigen::Index angles = std::clamp<Eigen::Index>(N, 0, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Complex lambda = d.values(k);
    if (!(lambda.imag() > 1e-9)) continue;
    const double zeta = damping_ratio(lambda);
    if (!(zeta < threshold)) continue;
    ModalEntry entry;
    entry.eigenvalue = lambda;
    entry.damping_ratio = zeta;
    entry.frequency_hz = frequency_hz(lambda);
    // Phase reference: the largest angle component becomes 1.
    entry.right_vector = d.right.col(k);
    if (angles > 0) {
      Eigen::Index ref = 0;
      entry.right_vector.head(angles).cwiseAbs().maxCoeff(&ref);
      const Complex pivot = entry.right_vector(ref);
      if (std::abs(pivot) > 0.0) {
        entry.right_vector /= pivot;
        entry.right_vector(ref) = 1.0;
      }
    }
    entry.mode_shape = entry.right_vector.head(angles);
    if (participation.size() > 0) entry.participation = participation.col(k);
    table.modes.push_back(std::move(entry));
  }
  std::stable_sort(table.modes.begin(), table.modes.end(),
                   [](const ModalEntry& a, const ModalEntry& b) { return a.damping_ratio < b.damping_ratio; });
  return table;
}

ModalTable modal_table(const StateSpaceModel& model, double threshold) {
  model.validate();
  return modal_table(model.A, model.N, threshold);
}

Trajectory simulate(const Matrix& A, const Vector& x0, double horizon, double dt) {
  require_square(A, "simulation matrix");
  require_finite(A, "simulation matrix");
  if (x0.size() != A.rows()) throw Error(ErrorKind::DimensionMismatch, "initial state has the wrong size");
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw Error(ErrorKind::Config, "simulation needs dt > 0 and horizon >= 0");
  const auto steps = static_cast<Eigen::Index>(std::floor(horizon / dt + 1e-9));
  const Matrix step = (A * dt).exp();
  Trajectory traj;
  traj.states.resize(steps + 1, A.rows());
  traj.time.resize(static_cast<size_t>(steps + 1));
  Vector x = x0;
  for (Eigen::Index k = 0; k <= steps; ++k) {
    traj.time[static_cast<size_t>(k)] = static_cast<double>(k) * dt;
    traj.states.row(k) = x.transpose();
    x = step * x;
  }
  return traj;
}

Vector modal_initial_condition(const ModalEntry& mode) {
  Vector x = mode.right_vector.real();
  const double scale = x.cwiseAbs().maxCoeff();
  if (scale > 0.0) x /= scale;
  return x;
}

double settling_time(const Trajectory& trajectory, int N, double band) {
  const Eigen::Index rows = trajectory.states.rows();
  if (rows == 0) return 0.0;
  const Eigen::Index angles = std::clamp<Eigen::Index>(N, 0, trajectory.states.cols());
  std::vector<double> deviation(static_cast<size_t>(rows), 0.0);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const auto x = trajectory.states.row(k);
    double d = 0.0;
    if (angles > 0) {
      const double mean = x.head(angles).mean();
      d = (x.head(angles).array() - mean).abs().maxCoeff();
    }
    if (x.size() > angles) d = std::max(d, x.tail(x.size() - angles).cwiseAbs().maxCoeff());
    deviation[static_cast<size_t>(k)] = d;
  }
  const double peak = *std::max_element(deviation.begin(), deviation.end());
  if (!(peak > 0.0)) return 0.0;
  for (Eigen::Index k = rows; k-- > 0;) {
    if (deviation[static_cast<size_t>(k)] > band * peak) {
      return k + 1 < rows ? trajectory.time[static_cast<size_t>(k + 1)] : trajectory.time.back();
    }
  }
  return 0.0;
}

}  // namespace gridosc
