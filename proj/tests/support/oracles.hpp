#pragma once

// Independent reference computations used to check the library. None of these
// share code paths with the solvers they validate.

#include <cstdint>
#include <functional>
#include <random>

#include "gridosc/lti_core.hpp"

namespace oracle {

using gridosc::Matrix;
using gridosc::Vector;

/// Dense n^2 x n^2 solve of (I kron A + A kron I) vec(X) = -vec(Q).
Matrix kron_lyapunov(const Matrix& A, const Matrix& Q);

/// Dense solve of (I kron A1 + A2^T kron I) vec(X) = -vec(C).
Matrix kron_sylvester(const Matrix& A1, const Matrix& A2, const Matrix& C);

/// Five-point central difference of f along direction D at X.
double directional_fd(const std::function<double(const Matrix&)>& f, const Matrix& X, const Matrix& D, double h);

/// argmin_k  t |k| + (k - v)^2 / 2 by golden-section search (convex, bracketed).
double scalar_l1_minimizer(double v, double t);

/// argmin_k  t ||k|| + ||k - v||^2 / 2: reduce to k = s v/||v||, search s >= 0.
Vector radial_group_minimizer(const Vector& v, double t);

/// (1/pi) int_0^inf psd(w) dw: adaptive trapezoid over [0, 1e3 rho] plus a c/w^2 tail.
double integrated_psd(const std::function<double(double)>& psd, double spectral_radius);

/// Steady-state E[z^T z] for dx = A x dt + B dW, z = C x, over `paths`
/// Euler-Maruyama paths of `steps` steps each after a burn-in.
double euler_maruyama_variance(const Matrix& A, const Matrix& B, const Matrix& C, double dt, int steps, int paths,
                               std::uint64_t seed);

/// Random Hurwitz matrix: a random matrix shifted so its spectral abscissa is -margin.
Matrix random_hurwitz(int n, std::mt19937_64& rng, double margin = 0.5);
Matrix random_matrix(int rows, int cols, std::mt19937_64& rng);

}  // namespace oracle
