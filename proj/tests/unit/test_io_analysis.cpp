#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gridosc/error.hpp"
#include "gridosc/io_analysis.hpp"
#include "support/oracles.hpp"
#include "support/test_models.hpp"

using namespace gridosc;

namespace {

LtiSystem scalar_lag() {
  LtiSystem s{Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  return s;
}

ReducedModel three_generator_reduced() { return fixtures::reduced(build_swing_model(fixtures::three_generator())); }

ReducedModel pss_reduced() {
  const std::vector<std::optional<PssParameters>> all(3, PssParameters{});
  return fixtures::reduced(embed_pss(build_swing_model(fixtures::three_generator()), all));
}

// Least-squares slope of log(local maxima of |signal|) against time.
double envelope_decay_rate(const std::vector<double>& t, const std::vector<double>& signal) {
  std::vector<double> xs, ys;
  for (size_t k = 1; k + 1 < signal.size(); ++k) {
    const double a = std::abs(signal[k - 1]), b = std::abs(signal[k]), c = std::abs(signal[k + 1]);
    if (b > a && b >= c && b > 1e-12) {
      xs.push_back(t[k]);
      ys.push_back(std::log(b));
    }
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("psd: scalar and diagonal examples") {
  const PsdCurve c = psd(scalar_lag(), {0.0, 1.0});
  CHECK(c.values[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.values[1] == doctest::Approx(0.5).epsilon(1e-14));

  LtiSystem d;
  d.A = Matrix::Zero(2, 2);
  d.A(0, 0) = -1.0;
  d.A(1, 1) = -2.0;
  d.B = Matrix::Identity(2, 2);
  d.C = Matrix::Identity(2, 2);
  CHECK(psd(d, {0.0}).values[0] == doctest::Approx(1.25).epsilon(1e-14));

  Matrix unstable = Matrix::Constant(1, 1, 1.0);
  CHECK_THROWS_AS(psd({unstable, Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, {1.0}), Error);
}

TEST_CASE("psd: grid, peaks and parallel evaluation") {
  const std::vector<double> grid = default_frequency_grid();
  CHECK(grid.size() == 400);
  CHECK(grid.front() == doctest::Approx(0.01));
  CHECK(grid.back() == doctest::Approx(100.0));
  for (size_t k = 1; k < grid.size(); ++k) CHECK(grid[k] > grid[k - 1]);

  const ReducedModel r = three_generator_reduced();
  const LtiSystem open = closed_loop_system(r, Matrix::Zero(r.m(), r.n()));
  const PsdCurve serial = psd(open, grid, 1);
  const PsdCurve threaded = psd(open, grid, 4);
  CHECK(serial.values == threaded.values);
  for (double v : serial.values) {
    CHECK(v >= 0.0);
    CHECK(std::isfinite(v));
  }
  // Resonant peaks sit next to the lightly damped eigenvalue frequencies.
  REQUIRE(!serial.peaks.empty());
  const ModalTable modes = modal_table(r.A, r.N() - 1, 1.0);
  for (const PsdPeak& p : serial.peaks) {
    double nearest = 1e300;
    for (const auto& m : modes.modes) nearest = std::min(nearest, std::abs(m.eigenvalue.imag() - p.omega));
    CHECK(nearest < 0.1 * p.omega);
  }

  const std::vector<double> w{1, 2, 3, 4, 5, 6, 7};
  const std::vector<double> v{0, 5, 0, 1, 0, 0.01, 0};
  const auto peaks = find_peaks(w, v, 0.01);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].omega == 2.0);
  CHECK(peaks[1].omega == 4.0);
}

TEST_CASE("h2: scalar variance and trace identity") {
  CHECK(h2_norm_sq(scalar_lag()) == doctest::Approx(0.5).epsilon(1e-14));

  const ReducedModel r = pss_reduced();
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix F = 0.05 * oracle::random_matrix(r.m(), r.n(), rng);
    const VarianceReport rep = h2_report(r, F);
    CHECK(std::abs(rep.J - (rep.Z1.trace() + rep.Z2.trace())) <= 1e-8 * rep.J);
    CHECK(std::abs(rep.J - h2_norm_sq(closed_loop_system(r, F))) <= 1e-8 * rep.J);
    CHECK(std::abs(rep.z1_eigenvalues.sum() - rep.Z1.trace()) <= 1e-10 * rep.Z1.trace());
    for (Eigen::Index i = 1; i < rep.z1_eigenvalues.size(); ++i) {
      CHECK(rep.z1_eigenvalues(i) <= rep.z1_eigenvalues(i - 1));
    }
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(rep.Z1).eigenvalues().minCoeff() >= -1e-10 * rep.Z1.trace());
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(rep.Z2).eigenvalues().minCoeff() >= -1e-10 * rep.J);
    CHECK((rep.Z1 - rep.Z1.transpose()).norm() == 0.0);
    // Per-generator contributions are diagonal entries of Z1.
    for (int g = 0; g < 3; ++g) CHECK(rep.frequency_contribution(g) == rep.Z1(3 + g, 3 + g));
  }
  // Positive frequency feedback removes damping and destabilizes the loop.
  CHECK_THROWS_AS(h2_report(r, -5.0 * r.B2.transpose()), Error);
}

TEST_CASE("h2: Parseval agreement with integrated PSD") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + trial;
    LtiSystem s{oracle::random_hurwitz(n, rng, 0.3), oracle::random_matrix(n, 2, rng), oracle::random_matrix(2, n, rng)};
    const FrequencyResponse h(s.A, s.B, s.C);
    const double integrated = oracle::integrated_psd([&](double w) { return hilbert_schmidt_sq(h(w)); },
                                                     spectral_radius(s.A));
    CHECK(std::abs(integrated / h2_norm_sq(s) - 1.0) <= 5e-3);
  }
  const ReducedModel r = three_generator_reduced();
  const LtiSystem open = closed_loop_system(r, Matrix::Zero(r.m(), r.n()));
  const FrequencyResponse h(open.A, open.B, open.C);
  const double integrated = oracle::integrated_psd([&](double w) { return hilbert_schmidt_sq(h(w)); },
                                                   spectral_radius(open.A));
  CHECK(std::abs(integrated / h2_norm_sq(open) - 1.0) <= 5e-3);
}

TEST_CASE("h2: two-generator open loop matches stochastic simulation") {
  const ReducedModel r = fixtures::reduced(build_swing_model(fixtures::two_generator()));
  const LtiSystem open = closed_loop_system(r, Matrix::Zero(r.m(), r.n()));
  const double J = h2_norm_sq(open);
  const double dt = 1e-3 / spectral_radius(open.A);
  const double mc = oracle::euler_maruyama_variance(open.A, open.B, open.C, dt, 100000, 400, 12345);
  CHECK(std::abs(mc / J - 1.0) <= 0.05);
}

TEST_CASE("covariance spectrum") {
  VarianceReport rep;
  rep.Z1 = Matrix::Zero(2, 2);
  rep.Z1(0, 0) = 3.0;
  rep.Z1(1, 1) = 1.0;
  rep.z1_eigenvalues = Vector(2);
  rep.z1_eigenvalues << 3.0, 1.0;
  rep.z1_eigenvectors = Matrix::Identity(2, 2);
  const CovarianceSpectrum c = covariance_spectrum(rep, 5);
  REQUIRE(c.lambda.size() == 2);
  CHECK(c.lambda(0) == 3.0);
  CHECK(c.lambda(1) == 1.0);
  CHECK(c.cumulative_fraction(0) == doctest::Approx(0.75));
  CHECK(c.cumulative_fraction(1) == doctest::Approx(1.0));

  const VarianceReport full = h2_report(pss_reduced(), Matrix::Zero(3, 14));
  const CovarianceSpectrum all = covariance_spectrum(full, 100);
  Matrix rebuilt = Matrix::Zero(full.Z1.rows(), full.Z1.cols());
  for (Eigen::Index i = 0; i < all.lambda.size(); ++i) {
    rebuilt += all.lambda(i) * all.vectors.col(i) * all.vectors.col(i).transpose();
  }
  CHECK((rebuilt - full.Z1).norm() <= 1e-10 * std::max(1.0, full.Z1.norm()));
  CHECK(covariance_spectrum(full, 3).lambda.size() == 3);
}

TEST_CASE("damping ratio and frequency formulas") {
  CHECK(damping_ratio(Complex(-0.5, std::sqrt(7.0) / 2)) == doctest::Approx(0.5 / std::sqrt(2.0)));
  CHECK(std::abs(damping_ratio(Complex(-0.5, std::sqrt(7.0) / 2)) - 0.3536) < 5e-5);
  // Formula checks on lightly damped eigenvalues of the size seen in utility-scale studies.
  CHECK(std::abs(damping_ratio(Complex(-0.0882, 7.3695)) - 0.0120) < 5e-5);
  CHECK(std::abs(frequency_hz(Complex(-0.0882, 7.3695)) - 1.1729) < 5e-5);
  CHECK(std::abs(damping_ratio(Complex(-0.3189, 4.0906)) - 0.0777) < 5e-5);
  CHECK(frequency_hz(Complex(-1, 2 * std::numbers::pi)) == doctest::Approx(1.0));
  CHECK(damping_ratio(Complex(0, 3)) == 0.0);
}

TEST_CASE("modal table: ordering, normalization and participation") {
  const StateSpaceModel model = build_swing_model(fixtures::three_generator());
  const ModalTable t = modal_table(model, 1.0);
  REQUIRE(t.modes.size() == 2);
  CHECK(t.modes[0].damping_ratio <= t.modes[1].damping_ratio);
  for (const ModalEntry& m : t.modes) {
    CHECK(m.eigenvalue.imag() > 0.0);
    CHECK(m.damping_ratio >= 0.0);
    CHECK(m.damping_ratio <= 1.0);
    CHECK(m.mode_shape.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    Eigen::Index ref = 0;
    m.mode_shape.cwiseAbs().maxCoeff(&ref);
    CHECK(std::abs(m.mode_shape(ref).imag()) < 1e-15);
    CHECK((model.A.cast<Complex>() * m.right_vector - m.eigenvalue * m.right_vector).norm() <= 1e-8 * model.A.norm());
    CHECK(m.participation.maxCoeff() == doctest::Approx(1.0));
  }
  CHECK(modal_table(model, 0.0).modes.empty());

  // Symmetric matrices: left and right eigenvectors coincide, so each mode's
  // participation column is |v|^2 normalized; a diagonal matrix gives the identity.
  Matrix diag = Matrix::Zero(3, 3);
  diag.diagonal() << -3.0, -1.0, -2.0;
  const Matrix P = participation_factors(eig(diag));
  for (Eigen::Index c = 0; c < 3; ++c) CHECK(P.col(c).maxCoeff() == doctest::Approx(1.0));
  CHECK(std::abs(P.sum() - 3.0) < 1e-12);
  CHECK(std::abs((P.array() * (1.0 - P.array())).abs().maxCoeff()) < 1e-12);

  std::mt19937_64 rng(6);
  const Matrix G = oracle::random_matrix(4, 4, rng);
  const Matrix S = G + G.transpose();
  const Matrix PS = participation_factors(eig(S));
  Eigen::SelfAdjointEigenSolver<Matrix> sym(S);
  const EigenDecomposition d = eig(S);
  for (Eigen::Index mode = 0; mode < 4; ++mode) {
    Eigen::Index match = 0;
    (sym.eigenvalues().array() - d.values(mode).real()).abs().minCoeff(&match);
    Vector expected = sym.eigenvectors().col(match).array().square();
    expected /= expected.maxCoeff();
    CHECK((PS.col(mode) - expected).norm() < 1e-8);
  }
}

TEST_CASE("simulate: zero state, scalar decay and modal envelopes") {
  const Trajectory zero = simulate(-Matrix::Identity(3, 3), Vector::Zero(3), 5.0, 0.1);
  CHECK(zero.states.norm() == 0.0);
  CHECK(zero.time.size() == 51);

  const Trajectory decay = simulate(Matrix::Constant(1, 1, -1.0), Vector::Ones(1), 5.0, 0.1);
  for (size_t k = 0; k < decay.time.size(); ++k) {
    CHECK(std::abs(decay.states(static_cast<Eigen::Index>(k), 0) - std::exp(-decay.time[k])) <=
          1e-13 * std::exp(-decay.time[k]) * (1.0 + k));
  }

  for (const SwingNetwork& net : {fixtures::two_generator(), fixtures::three_generator()}) {
    const StateSpaceModel model = build_swing_model(net);
    const ModalTable t = modal_table(model, 1.0);
    for (const ModalEntry& mode : t.modes) {
      const Vector x0 = modal_initial_condition(mode);
      CHECK(x0.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
      const double period = 2.0 * std::numbers::pi / mode.eigenvalue.imag();
      const Trajectory traj = simulate(model.A, x0, 6.0 * period, period / 400.0);
      std::vector<double> signal(traj.time.size());
      for (size_t k = 0; k < signal.size(); ++k) signal[k] = traj.states(static_cast<Eigen::Index>(k), 0);
      const double rate = envelope_decay_rate(traj.time, signal);
      CHECK(std::abs(rate / mode.eigenvalue.real() - 1.0) <= 0.02);
    }
  }
  CHECK_THROWS_AS(simulate(-Matrix::Identity(2, 2), Vector::Zero(3), 1.0, 0.1), Error);
  CHECK_THROWS_AS(simulate(-Matrix::Identity(2, 2), Vector::Zero(2), 1.0, 0.0), Error);
}

TEST_CASE("settling time") {
  Trajectory t;
  t.time = {0, 1, 2, 3, 4};
  t.states = Matrix::Zero(5, 2);
  CHECK(settling_time(t, 1) == 0.0);
  t.states(0, 1) = 1.0;
  t.states(2, 1) = -0.5;
  t.states(3, 1) = 0.01;
  // Settled from the first sample after the last excursion beyond 2% of the peak.
  CHECK(settling_time(t, 1) == 3.0);
  // A uniform angle offset is not a deviation.
  t.states.col(0).setConstant(5.0);
  CHECK(settling_time(t, 1) == 3.0);
}
