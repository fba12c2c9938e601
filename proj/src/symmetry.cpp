#include "gridosc/symmetry.hpp"

#include <cmath>
#include <string>

#include "gridosc/error.hpp"

namespace gridosc {

namespace {

constexpr double kModelSymmetryTol = 1e-10;
constexpr double kRelativeGainTol = 1e-8;

void check_transform_shape(const Matrix& gain, Eigen::Index expected_cols, const char* what) {
  if (gain.cols() != expected_cols) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " has " + std::to_string(gain.cols()) +
                                                  " columns, expected " + std::to_string(expected_cols));
  }
}

}  // namespace

SymmetryTransform build_transform(int N, int n) {
  if (N < 2 || N > n) {
    throw Error(ErrorKind::BadDimensions, "symmetry transform needs 2 <= N <= n (N=" + std::to_string(N) +
                                              ", n=" + std::to_string(n) + ")");
  }
  // Householder reflector H = I - 2 v v^T / (v^T v) mapping e1 onto 1/sqrt(N);
  // its remaining N-1 columns are orthonormal and orthogonal to 1.
  Vector v = Vector::Constant(N, -1.0 / std::sqrt(static_cast<double>(N)));
  v(0) += 1.0;
  Matrix H = Matrix::Identity(N, N) - (2.0 / v.squaredNorm()) * v * v.transpose();

  SymmetryTransform t;
  t.N = N;
  t.n = n;
  t.U = H.rightCols(N - 1);
  for (Eigen::Index c = 0; c < t.U.cols(); ++c) {
    for (Eigen::Index r = 0; r < t.U.rows(); ++r) {
      if (std::abs(t.U(r, c)) > 1e-14) {
        if (t.U(r, c) < 0.0) t.U.col(c) *= -1.0;
        break;
      }
    }
  }
  t.T = Matrix::Zero(n, n - 1);
  t.T.topLeftCorner(N, N - 1) = t.U;
  t.T.bottomRightCorner(n - N, n - N).setIdentity();
  return t;
}

SymmetryTransform absolute_transform(int N, int n) {
  if (N < 1 || N > n) throw Error(ErrorKind::BadDimensions, "absolute transform needs 1 <= N <= n");
  SymmetryTransform t;
  t.N = N;
  t.n = n;
  t.absolute = true;
  t.U = Matrix::Identity(N, N);
  t.T = Matrix::Identity(n, n);
  return t;
}

ReducedModel reduce(const StateSpaceModel& model, const PerformanceWeights& weights, const SymmetryTransform& transform) {
  model.validate();
  if (transform.n != model.n() || transform.N != model.N) {
    throw Error(ErrorKind::DimensionMismatch, "transform does not match the model dimensions");
  }
  if (weights.Qsqrt.rows() != model.n() || weights.Qsqrt.cols() != model.n() || weights.R.rows() != model.m()) {
    throw Error(ErrorKind::DimensionMismatch, "weights do not match the model dimensions");
  }
  if (!transform.absolute && !model.rotationally_symmetric()) {
    throw Error(ErrorKind::SymmetryViolated, "A [1; 0] != 0 (relative residual " +
                                                 std::to_string(model.symmetry_residual()) + ")");
  }
  const Matrix& T = transform.T;
  ReducedModel out;
  out.A = T.transpose() * model.A * T;
  out.B1 = T.transpose() * model.B1;
  out.B2 = T.transpose() * model.B2;
  out.Qsqrt = weights.Qsqrt * T;
  out.R = weights.R;
  out.Rsqrt = weights.Rsqrt;
  out.transform = transform;
  out.generator_state_map = model.generator_state_map;
  out.input_generator = model.input_generator;
  return out;
}

ReducedModel reduce(const StateSpaceModel& model, const PerformanceWeights& weights) {
  return reduce(model, weights, build_transform(model.N, model.n()));
}

Matrix gain_to_physical(const Matrix& F, const SymmetryTransform& transform) {
  check_transform_shape(F, transform.T.cols(), "reduced gain F");
  return F * transform.T.transpose();
}

double angle_sum_residual(const Matrix& K, int N) {
  if (N < 1 || N > K.cols()) return 0.0;
  return K.leftCols(N).rowwise().sum().norm();
}

Matrix gain_to_reduced(const Matrix& K, const SymmetryTransform& transform) {
  check_transform_shape(K, transform.T.rows(), "physical gain K");
  if (!transform.absolute) {
    const double residual = angle_sum_residual(K, transform.N);
    if (residual > kRelativeGainTol * K.norm()) {
      throw Error(ErrorKind::NotRelativeGain, "gain reacts to the mean angle (||K [1;0]|| = " +
                                                  std::to_string(residual) + ")");
    }
  }
  return K * transform.T;
}

}  // namespace gridosc
