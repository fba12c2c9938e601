#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "gridosc/error.hpp"
#include "gridosc/symmetry.hpp"
#include "support/oracles.hpp"
#include "support/test_models.hpp"

using namespace gridosc;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Config;
}

// Greedy nearest-neighbour multiset match; returns the worst pairing distance.
double multiset_distance(const CVector& a, const CVector& b) {
  if (a.size() != b.size()) return 1e300;
  std::vector<bool> used(static_cast<size_t>(b.size()), false);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double best = 1e300;
    Eigen::Index arg = -1;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      if (!used[static_cast<size_t>(j)] && std::abs(a(i) - b(j)) < best) {
        best = std::abs(a(i) - b(j));
        arg = j;
      }
    }
    used[static_cast<size_t>(arg)] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

CVector with_zero(const CVector& v) {
  CVector out(v.size() + 1);
  out << v, Complex(0, 0);
  return out;
}

StateSpaceModel pss_model() {
  const std::vector<std::optional<PssParameters>> all(3, PssParameters{});
  return embed_pss(build_swing_model(fixtures::three_generator()), all);
}

}  // namespace

TEST_CASE("transform: orthonormal complement of the ones vector") {
  for (int N = 2; N <= 12; ++N) {
    const SymmetryTransform t = build_transform(N, 2 * N + 3);
    CHECK(t.U.rows() == N);
    CHECK(t.U.cols() == N - 1);
    CHECK((t.U.transpose() * t.U - Matrix::Identity(N - 1, N - 1)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((t.U.transpose() * Vector::Ones(N)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((t.U * t.U.transpose() - angle_deviation_weight(N)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((t.T.transpose() * t.T - Matrix::Identity(t.n - 1, t.n - 1)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((t.T.bottomRightCorner(N + 3, N + 3) - Matrix::Identity(N + 3, N + 3)).norm() == 0.0);
    for (Eigen::Index c = 0; c < t.U.cols(); ++c) {
      Eigen::Index first = 0;
      while (std::abs(t.U(first, c)) < 1e-14) ++first;
      CHECK(t.U(first, c) > 0.0);
    }
    // Deterministic: rebuilding gives bit-identical U.
    CHECK((build_transform(N, 2 * N + 3).U - t.U).norm() == 0.0);
  }
  const SymmetryTransform two = build_transform(2, 4);
  CHECK(two.U(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(two.U(1, 0) == doctest::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(kind_of([] { build_transform(1, 2); }) == ErrorKind::BadDimensions);
  CHECK(kind_of([] { build_transform(4, 3); }) == ErrorKind::BadDimensions);
}

TEST_CASE("reduce: two-generator spectrum loses exactly the zero mode") {
  const StateSpaceModel model = build_swing_model(fixtures::two_generator());
  const ReducedModel r = fixtures::reduced(model);
  CHECK(r.n() == 3);
  const CVector reduced = eigenvalues(r.A);
  CVector expected(3);
  expected << Complex(-1, 0), Complex(-0.5, -std::sqrt(7.0) / 2), Complex(-0.5, std::sqrt(7.0) / 2);
  CHECK(multiset_distance(reduced, expected) <= 1e-8);
  CHECK(multiset_distance(with_zero(reduced), eigenvalues(model.A)) <= 1e-8);
  CHECK(is_hurwitz(r.A));
}

TEST_CASE("reduce: performance output and PSS-embedded models") {
  const StateSpaceModel model = pss_model();
  const PerformanceWeights w = build_weights(model);
  const ReducedModel r = reduce(model, w);
  CHECK(is_hurwitz(r.A));
  CHECK(multiset_distance(with_zero(eigenvalues(r.A)), eigenvalues(model.A)) <= 1e-8);
  CHECK((r.A - r.transform.T.transpose() * model.A * r.transform.T).norm() == 0.0);
  CHECK((r.Q() - r.transform.T.transpose() * w.Q * r.transform.T).norm() <= 1e-12);

  std::mt19937_64 rng(4);
  Vector ones = Vector::Zero(model.n());
  ones.head(model.N).setOnes();
  for (int trial = 0; trial < 10; ++trial) {
    Vector x = oracle::random_matrix(model.n(), 1, rng);
    x -= ones * (ones.dot(x) / ones.squaredNorm());
    CHECK((w.Qsqrt * x - r.Qsqrt * (r.transform.T.transpose() * x)).norm() <= 1e-12 * x.norm());
  }
}

TEST_CASE("reduce: asymmetric models are rejected unless absolute") {
  StateSpaceModel model = build_swing_model(fixtures::three_generator());
  model.A(3, 0) -= 0.5;
  const PerformanceWeights w = build_weights(model);
  CHECK(kind_of([&] { reduce(model, w); }) == ErrorKind::SymmetryViolated);
  const ReducedModel abs = reduce(model, w, absolute_transform(model.N, model.n()));
  CHECK(abs.n() == model.n());
  CHECK((abs.A - model.A).norm() == 0.0);
}

TEST_CASE("gain maps") {
  const SymmetryTransform t = build_transform(2, 4);
  CHECK(gain_to_physical(Matrix::Zero(2, 3), t).norm() == 0.0);
  Matrix F = Matrix::Zero(1, 3);
  F(0, 0) = 1.0;
  const Matrix K = gain_to_physical(F, t);
  CHECK(K(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(K(0, 1) == doctest::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(K(0, 2) == 0.0);

  std::mt19937_64 rng(8);
  const SymmetryTransform big = build_transform(5, 14);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix Fr = oracle::random_matrix(4, 13, rng);
    const Matrix Kr = gain_to_physical(Fr, big);
    CHECK(angle_sum_residual(Kr, 5) <= 1e-12 * Kr.norm());
    CHECK((gain_to_reduced(Kr, big) - Fr).cwiseAbs().maxCoeff() <= 1e-12);
  }
  Matrix absolute = Matrix::Zero(1, 4);
  absolute(0, 0) = 1.0;
  CHECK(kind_of([&] { gain_to_reduced(absolute, t); }) == ErrorKind::NotRelativeGain);
  // Roundoff below the relative tolerance is accepted.
  Matrix nearly = gain_to_physical(F, t);
  nearly(0, 0) += 1e-10;
  CHECK_NOTHROW(gain_to_reduced(nearly, t));
  CHECK(kind_of([&] { gain_to_physical(Matrix::Zero(1, 2), t); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("closed-loop spectra correspond between coordinates") {
  const StateSpaceModel model = pss_model();
  const ReducedModel r = reduce(model, build_weights(model));
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix F = 0.2 * oracle::random_matrix(r.m(), r.n(), rng);
    const Matrix K = gain_to_physical(F, r.transform);
    const CVector reduced = eigenvalues(r.A - r.B2 * F);
    const CVector full = eigenvalues(model.A - model.B2 * K);
    CHECK(multiset_distance(with_zero(reduced), full) <= 1e-8 * std::max(1.0, spectral_radius(model.A)));
  }
}
