#pragma once

#include <complex>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace gridosc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Eigenvalue real parts must sit strictly left of this for a matrix to count as Hurwitz.
inline constexpr double kHurwitzMargin = 1e-12;

// Validation helpers used at every public boundary. They throw
// Error{NonFiniteEntry} / Error{DimensionMismatch}.
void require_finite(const Matrix& m, std::string_view what);
void require_square(const Matrix& m, std::string_view what);
void require_nonempty(const Matrix& m, std::string_view what);

/// Solves Acl*X + X*Acl^T + Qrhs = 0 for Hurwitz Acl (complex Schur back-substitution).
/// The returned X is exactly symmetric.
Matrix solve_lyapunov(const Matrix& Acl, const Matrix& Qrhs);

/// Solves A1*X + X*A2 + C = 0. Throws SingularPencil when spec(A1) and spec(-A2)
/// come within 1e-10 of each other.
Matrix solve_sylvester(const Matrix& A1, const Matrix& A2, const Matrix& C);

struct EigenDecomposition {
  CVector values;                 // ascending real part, then ascending imaginary part
  CMatrix right;                  // column i pairs with values(i)
  std::optional<CMatrix> left;    // row i is the left eigenvector, scaled so left*right = I
};

/// Real nonsymmetric eigendecomposition with deterministic ordering. Left
/// eigenvectors are omitted when the eigenvector matrix is numerically singular.
EigenDecomposition eig(const Matrix& A, bool with_left = true);

/// Sorted eigenvalues only.
CVector eigenvalues(const Matrix& A);

double spectral_abscissa(const Matrix& A);
double spectral_radius(const Matrix& A);
bool is_hurwitz(const Matrix& A);

/// Throws Error{NotHurwitz} naming `what` when A is not Hurwitz.
void require_hurwitz(const Matrix& A, std::string_view what);

/// H(jw) = C (jwI - A)^{-1} B. Throws SingularAtFrequency when jw is within 1e-12
/// of an eigenvalue of A.
CMatrix frequency_response(const Matrix& A, const Matrix& B, const Matrix& C, double omega);

// Evaluates H(jw) on many frequencies; the spectrum is computed once at construction.
class FrequencyResponse {
public:
  FrequencyResponse(Matrix A, Matrix B, Matrix C);

  CMatrix operator()(double omega) const;

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }

private:
  Matrix a_, b_, c_;
  CVector spectrum_;
};

/// trace(H H^*), i.e. the sum of squared singular values.
double hilbert_schmidt_sq(const CMatrix& h);

/// Principal square root of a symmetric PSD matrix (negative eigenvalues from
/// roundoff are clamped to zero).
Matrix psd_sqrt(const Matrix& s);

}  // namespace gridosc
