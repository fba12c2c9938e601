#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace oracle {

Matrix kron_lyapunov(const Matrix& A, const Matrix& Q) {
  const Eigen::Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  Matrix L = Matrix::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      // vec(A X) = (I kron A) vec X, vec(X A^T) = (A kron I) vec X
      L.block(i * n, j * n, n, n) += I(i, j) * A;
      L.block(i * n, j * n, n, n) += A(i, j) * I;
    }
  }
  const Vector q = Eigen::Map<const Vector>(Q.data(), n * n);
  const Vector x = L.fullPivLu().solve(-q);
  return Eigen::Map<const Matrix>(x.data(), n, n);
}

Matrix kron_sylvester(const Matrix& A1, const Matrix& A2, const Matrix& C) {
  const Eigen::Index m = A1.rows();
  const Eigen::Index n = A2.rows();
  Matrix L = Matrix::Zero(m * n, m * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) L.block(i * m, j * m, m, m) += A1;
      L.block(i * m, j * m, m, m) += A2(j, i) * Matrix::Identity(m, m);
    }
  }
  const Vector c = Eigen::Map<const Vector>(C.data(), m * n);
  const Vector x = L.fullPivLu().solve(-c);
  return Eigen::Map<const Matrix>(x.data(), m, n);
}

double directional_fd(const std::function<double(const Matrix&)>& f, const Matrix& X, const Matrix& D, double h) {
  return (-f(X + 2.0 * h * D) + 8.0 * f(X + h * D) - 8.0 * f(X - h * D) + f(X - 2.0 * h * D)) / (12.0 * h);
}

namespace {

// Brute-force scan of a 1-D objective, then bisection on its right derivative
// inside the bracket around the best grid point.
double scan_and_bisect(const std::function<double(double)>& objective, const std::function<double(double)>& slope,
                       double lo, double hi) {
  constexpr int kGrid = 20000;
  double best_x = lo;
  double best_f = objective(lo);
  for (int k = 1; k <= kGrid; ++k) {
    const double x = lo + (hi - lo) * k / kGrid;
    const double f = objective(x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  const double step = (hi - lo) / kGrid;
  double a = std::max(lo, best_x - step);
  double b = std::min(hi, best_x + step);
  if (slope(a) >= 0.0) return a;  // minimum at the lower end of the bracket
  for (int it = 0; it < 200 && b - a > 0.0; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if (slope(mid) >= 0.0) b = mid;
    else a = mid;
  }
  return b;
}

}  // namespace

double scalar_l1_minimizer(double v, double t) {
  auto objective = [&](double k) { return t * std::abs(k) + 0.5 * (k - v) * (k - v); };
  auto slope = [&](double k) { return k - v + (k >= 0.0 ? t : -t); };
  const double span = std::abs(v) + t + 1.0;
  return scan_and_bisect(objective, slope, -span, span);
}

Vector radial_group_minimizer(const Vector& v, double t) {
  const double r = v.norm();
  if (r == 0.0) return Vector::Zero(v.size());
  auto objective = [&](double s) { return t * s + 0.5 * (s - r) * (s - r); };
  auto slope = [&](double s) { return s - r + t; };
  const double s = scan_and_bisect(objective, slope, 0.0, r + 1.0);
  return (s / r) * v;
}

double integrated_psd(const std::function<double(double)>& psd, double spectral_radius) {
  const double lo = 1e-3 * spectral_radius;
  const double hi = 1e3 * spectral_radius;
  constexpr int kPanels = 2000;

  // Coarse estimate for the adaptive tolerance.
  std::vector<double> w(kPanels + 1), f(kPanels + 1);
  for (int k = 0; k <= kPanels; ++k) {
    w[k] = lo * std::pow(hi / lo, static_cast<double>(k) / kPanels);
    f[k] = psd(w[k]);
  }
  double coarse = 0.5 * (psd(0.0) + f[0]) * lo;
  for (int k = 0; k < kPanels; ++k) coarse += 0.5 * (f[k] + f[k + 1]) * (w[k + 1] - w[k]);
  const double tol = 1e-8 * std::abs(coarse);

  std::function<double(double, double, double, double, double, int)> adapt =
      [&](double a, double b, double fa, double fb, double whole, int depth) {
        const double m = 0.5 * (a + b);
        const double fm = psd(m);
        const double left = 0.5 * (fa + fm) * (m - a);
        const double right = 0.5 * (fm + fb) * (b - m);
        if (depth > 40 || std::abs(left + right - whole) <= tol) return left + right;
        return adapt(a, m, fa, fm, left, depth + 1) + adapt(m, b, fm, fb, right, depth + 1);
      };

  const double f0 = psd(0.0);
  double total = adapt(0.0, lo, f0, f[0], 0.5 * (f0 + f[0]) * lo, 0);
  for (int k = 0; k < kPanels; ++k) {
    total += adapt(w[k], w[k + 1], f[k], f[k + 1], 0.5 * (f[k] + f[k + 1]) * (w[k + 1] - w[k]), 0);
  }
  // psd ~ c / w^2 beyond the last panel for strictly proper systems.
  total += f[kPanels] * hi;
  return total / std::numbers::pi;
}

double euler_maruyama_variance(const Matrix& A, const Matrix& B, const Matrix& C, double dt, int steps, int paths,
                               std::uint64_t seed) {
  const Eigen::Index n = A.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Slowest decaying nonzero mode sets the burn-in.
  const Eigen::VectorXcd lambda = Eigen::EigenSolver<Matrix>(A, false).eigenvalues();
  double slowest = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k).real() < -1e-9) slowest = std::min(slowest, -lambda(k).real());
  }
  const int burn = static_cast<int>(std::ceil(20.0 / slowest / dt));

  const Matrix step = Matrix::Identity(n, n) + dt * A;
  const double sq = std::sqrt(dt);
  Matrix X = Matrix::Zero(n, paths);
  Matrix W(B.cols(), paths);
  double accum = 0.0;
  for (int k = 0; k < burn + steps; ++k) {
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = normal(rng);
    X = step * X + sq * (B * W);
    if (k >= burn) accum += (C * X).squaredNorm();
  }
  return accum / (static_cast<double>(steps) * paths);
}

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
  return M;
}

Matrix random_hurwitz(int n, std::mt19937_64& rng, double margin) {
  Matrix M = random_matrix(n, n, rng);
  const Eigen::VectorXcd lambda = Eigen::EigenSolver<Matrix>(M, false).eigenvalues();
  double abscissa = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < lambda.size(); ++k) abscissa = std::max(abscissa, lambda(k).real());
  M -= (abscissa + margin) * Matrix::Identity(n, n);
  return M;
}

}  // namespace oracle
