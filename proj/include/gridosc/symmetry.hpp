#pragma once

#include "gridosc/grid_model.hpp"

namespace gridosc {

// Coordinates xi = T^T x with T = blockdiag(U, I), U an orthonormal basis of the
// complement of span(1) in angle space.
struct SymmetryTransform {
  Matrix U;  // N x (N-1)
  Matrix T;  // n x (n-1)
  int N = 0;
  int n = 0;
  // Absolute-coordinate mode: T = I, no state is removed.
  bool absolute = false;

  int reduced_dim() const { return static_cast<int>(T.cols()); }
};

/// Deterministic U: Householder complement of 1, each column's first nonzero entry positive.
SymmetryTransform build_transform(int N, int n);

/// T = I for imported models without rotational symmetry.
SymmetryTransform absolute_transform(int N, int n);

struct ReducedModel {
  Matrix A;      // T^T A T
  Matrix B1;     // T^T B1
  Matrix B2;     // T^T B2
  Matrix Qsqrt;  // Q^{1/2} T, n x (n-1)
  Matrix R;
  Matrix Rsqrt;
  SymmetryTransform transform;
  // Bookkeeping copied from the full model (indices into r, and input owners).
  std::vector<std::vector<int>> generator_state_map;
  std::vector<int> input_generator;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B2.cols()); }
  int p() const { return static_cast<int>(B1.cols()); }
  int N() const { return transform.N; }
  /// Qsqrt^T Qsqrt.
  Matrix Q() const { return Qsqrt.transpose() * Qsqrt; }
};

/// Throws SymmetryViolated if A[1;0] != 0 (unless the transform is absolute).
ReducedModel reduce(const StateSpaceModel& model, const PerformanceWeights& weights, const SymmetryTransform& transform);
ReducedModel reduce(const StateSpaceModel& model, const PerformanceWeights& weights);

/// K = F T^T.
Matrix gain_to_physical(const Matrix& F, const SymmetryTransform& transform);
/// F = K T; throws NotRelativeGain when K [1;0] exceeds 1e-8 ||K||.
Matrix gain_to_reduced(const Matrix& K, const SymmetryTransform& transform);

/// ||K [1;0]|| (absolute).
double angle_sum_residual(const Matrix& K, int N);

}  // namespace gridosc
