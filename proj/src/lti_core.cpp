#include "gridosc/lti_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "gridosc/error.hpp"

namespace gridosc {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Solves (T + shift*I) y = b for upper-triangular T by back substitution.
// Returns false if a diagonal of the shifted system is below `tol` in magnitude.
bool shifted_back_substitute(const CMatrix& T, Complex shift, CVector& b, double tol) {
  const Eigen::Index n = T.rows();
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    Complex acc = b(i);
    if (i + 1 < n) {
      acc -= T.row(i).segment(i + 1, n - i - 1).transpose().cwiseProduct(b.segment(i + 1, n - i - 1)).sum();
    }
    const Complex d = T(i, i) + shift;
    if (std::abs(d) < tol) return false;
    b(i) = acc / d;
  }
  return true;
}

Eigen::ComplexSchur<Matrix> schur_of(const Matrix& A) {
  Eigen::ComplexSchur<Matrix> schur(A);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorKind::ConvergenceFailure, "complex Schur decomposition did not converge");
  }
  return schur;
}

void sort_spectrum(CVector& values, std::vector<Eigen::Index>& order) {
  order.resize(static_cast<size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (values(a).real() != values(b).real()) return values(a).real() < values(b).real();
    return values(a).imag() < values(b).imag();
  });
}

}  // namespace

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::NonFiniteEntry, std::string(what) + " contains NaN or Inf");
  }
}

void require_square(const Matrix& m, std::string_view what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " must be square and nonempty, got " + dims(m));
  }
}

void require_nonempty(const Matrix& m, std::string_view what) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " must be nonempty, got " + dims(m));
  }
}

Matrix solve_lyapunov(const Matrix& Acl, const Matrix& Qrhs) {
  require_square(Acl, "Lyapunov matrix");
  if (Qrhs.rows() != Acl.rows() || Qrhs.cols() != Acl.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "Lyapunov right-hand side " + dims(Qrhs) + " vs " + dims(Acl));
  }
  require_finite(Acl, "Lyapunov matrix");
  require_finite(Qrhs, "Lyapunov right-hand side");

  const auto schur = schur_of(Acl);
  const CMatrix& T = schur.matrixT();
  const CMatrix& U = schur.matrixU();
  const Eigen::Index n = T.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (T(i, i).real() >= -kHurwitzMargin) {
      throw Error(ErrorKind::NotHurwitz, "Lyapunov matrix has eigenvalue with real part " +
                                             std::to_string(T(i, i).real()));
    }
  }

  // A = U T U^*, A^T = U T^* U^*  =>  T Y + Y T^* = -U^* Q U with Y = U^* X U.
  const CMatrix rhs = -(U.adjoint() * Qrhs.cast<Complex>() * U);
  CMatrix Y(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    CVector b = rhs.col(j);
    const Eigen::Index tail = n - j - 1;
    if (tail > 0) {
      b.noalias() -= Y.rightCols(tail) * T.row(j).tail(tail).conjugate().transpose();
    }
    if (!shifted_back_substitute(T, std::conj(T(j, j)), b, 0.0)) {
      throw Error(ErrorKind::NotHurwitz, "singular Lyapunov operator");
    }
    Y.col(j) = b;
  }
  Matrix X = (U * Y * U.adjoint()).real();
  return 0.5 * (X + X.transpose());
}

Matrix solve_sylvester(const Matrix& A1, const Matrix& A2, const Matrix& C) {
  require_square(A1, "Sylvester A1");
  require_square(A2, "Sylvester A2");
  if (C.rows() != A1.rows() || C.cols() != A2.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "Sylvester C " + dims(C) + " vs A1 " + dims(A1) + ", A2 " + dims(A2));
  }
  require_finite(A1, "Sylvester A1");
  require_finite(A2, "Sylvester A2");
  require_finite(C, "Sylvester C");

  const auto s1 = schur_of(A1);
  const auto s2 = schur_of(A2);
  const CMatrix& T1 = s1.matrixT();
  const CMatrix& T2 = s2.matrixT();
  const CMatrix& U1 = s1.matrixU();
  const CMatrix& U2 = s2.matrixU();

  // T1 Y + Y T2 = -U1^* C U2, T2 upper triangular: sweep columns left to right.
  const CMatrix rhs = -(U1.adjoint() * C.cast<Complex>() * U2);
  const Eigen::Index m = T1.rows();
  const Eigen::Index n = T2.rows();
  CMatrix Y(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    CVector b = rhs.col(j);
    if (j > 0) b.noalias() -= Y.leftCols(j) * T2.col(j).head(j);
    if (!shifted_back_substitute(T1, T2(j, j), b, 1e-10)) {
      throw Error(ErrorKind::SingularPencil, "spectra of A1 and -A2 overlap");
    }
    Y.col(j) = b;
  }
  return (U1 * Y * U2.adjoint()).real();
}

EigenDecomposition eig(const Matrix& A, bool with_left) {
  require_square(A, "eig input");
  require_finite(A, "eig input");
  Eigen::EigenSolver<Matrix> solver(A, true);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::ConvergenceFailure, "eigenvalue iteration did not converge");
  }
  CVector raw_values = solver.eigenvalues();
  const CMatrix raw_vectors = solver.eigenvectors();
  std::vector<Eigen::Index> order;
  sort_spectrum(raw_values, order);

  const Eigen::Index n = A.rows();
  EigenDecomposition out;
  out.values.resize(n);
  out.right.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = raw_values(order[static_cast<size_t>(k)]);
    out.right.col(k) = raw_vectors.col(order[static_cast<size_t>(k)]);
  }
  if (with_left) {
    Eigen::FullPivLU<CMatrix> lu(out.right);
    // Defective (or nearly so) matrices have no usable left basis.
    if (lu.isInvertible() && lu.rcond() > 1e-13) {
      out.left = lu.inverse();
    }
  }
  return out;
}

CVector eigenvalues(const Matrix& A) {
  require_square(A, "eigenvalue input");
  require_finite(A, "eigenvalue input");
  Eigen::EigenSolver<Matrix> solver(A, false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::ConvergenceFailure, "eigenvalue iteration did not converge");
  }
  CVector values = solver.eigenvalues();
  std::vector<Eigen::Index> order;
  sort_spectrum(values, order);
  CVector sorted(values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k) sorted(k) = values(order[static_cast<size_t>(k)]);
  return sorted;
}

double spectral_abscissa(const Matrix& A) {
  return eigenvalues(A).real().maxCoeff();
}

double spectral_radius(const Matrix& A) {
  return eigenvalues(A).cwiseAbs().maxCoeff();
}

bool is_hurwitz(const Matrix& A) {
  if (!A.allFinite()) return false;
  try {
    return spectral_abscissa(A) < -kHurwitzMargin;
  } catch (const Error&) {
    return false;
  }
}

void require_hurwitz(const Matrix& A, std::string_view what) {
  const double alpha = spectral_abscissa(A);
  if (!(alpha < -kHurwitzMargin)) {
    throw Error(ErrorKind::NotHurwitz, std::string(what) + " is not Hurwitz (spectral abscissa " +
                                           std::to_string(alpha) + ")");
  }
}

FrequencyResponse::FrequencyResponse(Matrix A, Matrix B, Matrix C)
    : a_(std::move(A)), b_(std::move(B)), c_(std::move(C)) {
  require_square(a_, "A");
  require_nonempty(b_, "B");
  require_nonempty(c_, "C");
  if (b_.rows() != a_.rows() || c_.cols() != a_.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "frequency response shapes A " + dims(a_) + ", B " + dims(b_) +
                                                  ", C " + dims(c_));
  }
  require_finite(a_, "A");
  require_finite(b_, "B");
  require_finite(c_, "C");
  spectrum_ = eigenvalues(a_);
}

CMatrix FrequencyResponse::operator()(double omega) const {
  const Complex jw(0.0, omega);
  for (Eigen::Index k = 0; k < spectrum_.size(); ++k) {
    if (std::abs(jw - spectrum_(k)) <= 1e-12) {
      throw Error(ErrorKind::SingularAtFrequency, "jw = j" + std::to_string(omega) + " is an eigenvalue of A");
    }
  }
  CMatrix resolvent = -a_.cast<Complex>();
  resolvent.diagonal().array() += jw;
  const CMatrix solved = resolvent.partialPivLu().solve(b_.cast<Complex>());
  return c_.cast<Complex>() * solved;
}

CMatrix frequency_response(const Matrix& A, const Matrix& B, const Matrix& C, double omega) {
  return FrequencyResponse(A, B, C)(omega);
}

double hilbert_schmidt_sq(const CMatrix& h) {
  return h.squaredNorm();
}

Matrix psd_sqrt(const Matrix& s) {
  require_square(s, "PSD square-root input");
  require_finite(s, "PSD square-root input");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (s + s.transpose()));
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::ConvergenceFailure, "symmetric eigensolver did not converge");
  }
  const Vector root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix& V = solver.eigenvectors();
  Matrix out = V * root.asDiagonal() * V.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace gridosc
