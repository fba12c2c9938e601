#include "gridosc/sparse_lqr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "gridosc/error.hpp"
#include "gridosc/log.hpp"
#include "gridosc/parallel.hpp"

namespace gridosc {

namespace {

constexpr double kZeroTolScale = 1e-6;
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;
constexpr double kRhoMin = 1e-4;
constexpr double kRhoMax = 1e8;

void check_reduced_gain(const ReducedModel& reduced, const Matrix& F) {
  if (F.rows() != reduced.m() || F.cols() != reduced.n()) {
    throw Error(ErrorKind::DimensionMismatch, "reduced gain must be " + std::to_string(reduced.m()) + " x " +
                                                  std::to_string(reduced.n()));
  }
  require_finite(F, "reduced gain");
}

struct Gramians {
  Matrix X;
  double J = 0.0;
};

Gramians controllability(const ReducedModel& reduced, const Matrix& F) {
  const Matrix Acl = reduced.A - reduced.B2 * F;
  Gramians g;
  g.X = solve_lyapunov(Acl, reduced.B1 * reduced.B1.transpose());
  const Matrix RF = reduced.Rsqrt * F;
  g.J = (reduced.Qsqrt * g.X * reduced.Qsqrt.transpose()).trace() + (RF * g.X * RF.transpose()).trace();
  return g;
}

// Minimizes f by descent with Armijo backtracking. Without a preconditioner the
// direction is -g with Barzilai-Borwein trial steps; with one it is the
// preconditioned direction (a positive-definite metric), tried at unit step.
// eval returns false where f is undefined (closed loop unstable).
using Evaluator = std::function<bool(const Matrix& x, bool need_gradient, double& f, Matrix& g)>;
using Preconditioner = std::function<Matrix(const Matrix& x, const Matrix& g)>;

struct DescentResult {
  Matrix x;
  double f = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

DescentResult descend(Matrix x, const Evaluator& eval, double tol, int max_iter, const char* what,
                      const Preconditioner& precondition = nullptr) {
  DescentResult out;
  double f = 0.0;
  Matrix g;
  if (!eval(x, true, f, g)) {
    throw Error(ErrorKind::StabilizationLost, std::string(what) + ": starting point is not stabilizing");
  }
  Matrix x_prev, g_prev;
  double alpha = 1.0 / std::max(1.0, g.norm());
  int it = 0;
  for (; it < max_iter; ++it) {
    const double gn2 = g.squaredNorm();
    if (std::sqrt(gn2) <= tol) {
      out.converged = true;
      break;
    }
    Matrix direction;
    double slope = -gn2;
    if (precondition) {
      direction = precondition(x, g);
      slope = (g.array() * direction.array()).sum();
      alpha = 1.0;
    }
    if (!precondition || !(slope < 0.0) || !direction.allFinite()) {
      direction = -g;
      slope = -gn2;
      if (it > 0 && !precondition) {
        const Matrix s = x - x_prev;
        const Matrix y = g - g_prev;
        const double sy = (s.array() * y.array()).sum();
        if (sy > 0.0) alpha = s.squaredNorm() / sy;
        else alpha *= 2.0;
      } else if (precondition) {
        alpha = 1.0 / std::max(1.0, g.norm());
      }
    }
    alpha = std::clamp(alpha, 1e-14, 1e14);

    bool accepted = false;
    bool any_feasible = false;
    double f_trial = 0.0;
    Matrix x_trial, unused;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      x_trial = x + alpha * direction;
      if (eval(x_trial, false, f_trial, unused)) {
        any_feasible = true;
        // Strict decrease: at roundoff level alpha * slope underflows against f.
        if (f_trial < f && f_trial <= f + kArmijo * alpha * slope) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!any_feasible) {
        throw Error(ErrorKind::StabilizationLost,
                    std::string(what) + ": no backtracking step keeps the closed loop Hurwitz");
      }
      // Sufficient decrease is below roundoff; the iterate is as good as it gets.
      break;
    }
    x_prev = std::move(x);
    g_prev = std::move(g);
    x = std::move(x_trial);
    if (!eval(x, true, f, g)) {
      throw Error(ErrorKind::StabilizationLost, std::string(what) + ": accepted step lost stability");
    }
  }
  out.x = std::move(x);
  out.f = f;
  out.gradient_norm = g.norm();
  out.iterations = it;
  if (!out.converged && out.gradient_norm <= tol) out.converged = true;
  return out;
}

// Solves 2 R D X + rho D = -G for D: the metric of the linearized stationarity
// condition, which makes -D a descent direction scaled to the problem.
class GramianMetric {
public:
  explicit GramianMetric(const Matrix& R) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (R + R.transpose()));
    r_values_ = es.eigenvalues();
    r_vectors_ = es.eigenvectors();
    diagonal_ = (R - Matrix(R.diagonal().asDiagonal())).norm() == 0.0;
  }

  Matrix direction(const Matrix& G, const Matrix& X, double rho) const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (X + X.transpose()));
    const Matrix& V = es.eigenvectors();
    Matrix C = r_vectors_.transpose() * G * V;
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
      for (Eigen::Index j = 0; j < C.cols(); ++j) {
        C(i, j) /= 2.0 * r_values_(i) * std::max(es.eigenvalues()(j), 0.0) + rho;
      }
    }
    return -(r_vectors_ * C * V.transpose());
  }

  bool diagonal() const { return diagonal_; }

private:
  Vector r_values_;
  Matrix r_vectors_;
  bool diagonal_ = false;
};

bool relative_mode(const ReducedModel& reduced) { return !reduced.transform.absolute; }

double max_abs(const Matrix& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

Mask nonzero_mask(const Matrix& K) {
  const double tol = kZeroTolScale * max_abs(K);
  return (K.array().abs() > tol);
}

double column_gamma(const PenaltySpec& spec, Eigen::Index col) {
  if (spec.kind == PenaltyKind::Elementwise || col < spec.N) return spec.gamma_theta;
  return spec.gamma_r;
}

// gamma-scaled elementwise weights, zero on entries the elementwise term does not touch.
Matrix effective_weights(const PenaltySpec& spec) {
  Matrix w = Matrix::Zero(spec.W.rows(), spec.W.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    const double gamma = column_gamma(spec, j);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      if (spec.elementwise_penalized(i, j)) w(i, j) = gamma * spec.W(i, j);
    }
  }
  return w;
}

double group_norm(const Matrix& K, const PenaltyGroup& group) {
  double s = 0.0;
  for (int c : group.cols) s += K(group.row, c) * K(group.row, c);
  return std::sqrt(s);
}

void check_spec(const PenaltySpec& spec, Eigen::Index rows, Eigen::Index cols) {
  if (spec.W.rows() != rows || spec.W.cols() != cols || spec.elementwise_penalized.rows() != rows ||
      spec.elementwise_penalized.cols() != cols) {
    throw Error(ErrorKind::DimensionMismatch, "penalty weights do not match the gain shape");
  }
  if (spec.gamma_theta < 0.0 || spec.gamma_r < 0.0 || !std::isfinite(spec.gamma_theta) ||
      !std::isfinite(spec.gamma_r)) {
    throw Error(ErrorKind::Config, "penalty gammas must be finite and nonnegative");
  }
  if ((spec.W.array() < 0.0).any()) throw Error(ErrorKind::Config, "penalty weights must be nonnegative");
}

}  // namespace

// ---- gains --------------------------------------------------------------------

int gain_cardinality(const Matrix& K) {
  return static_cast<int>(nonzero_mask(K).count());
}

Mask FeedbackGain::pattern() const { return nonzero_mask(K); }

FeedbackGain FeedbackGain::from_reduced(const Matrix& F, const SymmetryTransform& transform) {
  FeedbackGain g;
  g.F = F;
  g.K = gain_to_physical(F, transform);
  g.N = transform.N;
  g.card = gain_cardinality(g.K);
  return g;
}

FeedbackGain FeedbackGain::from_physical(const Matrix& K, const SymmetryTransform& transform) {
  FeedbackGain g;
  g.F = gain_to_reduced(K, transform);
  g.K = K;
  g.N = transform.N;
  g.card = gain_cardinality(K);
  return g;
}

// ---- H2 objective -------------------------------------------------------------

double h2_cost(const ReducedModel& reduced, const Matrix& F) {
  check_reduced_gain(reduced, F);
  return controllability(reduced, F).J;
}

H2Evaluation h2_cost_and_gradient(const ReducedModel& reduced, const Matrix& F) {
  check_reduced_gain(reduced, F);
  const Gramians g = controllability(reduced, F);
  const Matrix Acl = reduced.A - reduced.B2 * F;
  const Matrix P = solve_lyapunov(Acl.transpose(), reduced.Q() + F.transpose() * reduced.R * F);
  H2Evaluation out;
  out.J = g.J;
  out.gradient = 2.0 * (reduced.R * F - reduced.B2.transpose() * P) * g.X;
  out.X = g.X;
  return out;
}

Matrix h2_gradient(const ReducedModel& reduced, const Matrix& F) {
  return h2_cost_and_gradient(reduced, F).gradient;
}

Matrix solve_riccati(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  require_square(A, "Riccati A");
  require_finite(A, "Riccati A");
  require_finite(B, "Riccati B");
  require_finite(Q, "Riccati Q");
  require_finite(R, "Riccati R");
  const Eigen::Index n = A.rows();
  if (B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() || R.cols() != B.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "Riccati data have inconsistent shapes");
  }
  Eigen::LLT<Matrix> r_llt(R);
  if (r_llt.info() != Eigen::Success) throw Error(ErrorKind::RiccatiFailure, "R is not positive definite");
  const Matrix G = B * r_llt.solve(B.transpose());

  // Hamiltonian matrix sign function with determinant scaling.
  Matrix Z(2 * n, 2 * n);
  Z << A, -G, -Q, -A.transpose();
  // Pivot ratios are a poor axis test for badly scaled Hamiltonians (stiff
  // stabilizer realizations), so check the spectrum directly.
  const CVector hamiltonian = eigenvalues(Z);
  if (hamiltonian.real().cwiseAbs().minCoeff() <= 1e-10 * std::max(1.0, Z.norm())) {
    throw Error(ErrorKind::NotStabilizable, "Hamiltonian has eigenvalues on the imaginary axis");
  }
  const double dim = static_cast<double>(2 * n);
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Matrix> lu(Z);
    const Matrix U = lu.matrixLU();
    double log_det = 0.0;
    for (Eigen::Index k = 0; k < U.rows(); ++k) log_det += std::log(std::abs(U(k, k)));
    if (!std::isfinite(log_det)) throw Error(ErrorKind::RiccatiFailure, "sign iteration hit a singular iterate");
    const double c = std::exp(log_det / dim);
    const Matrix Z_next = 0.5 * (Z / c + c * lu.inverse());
    if (!Z_next.allFinite()) throw Error(ErrorKind::RiccatiFailure, "sign iteration diverged");
    const double change = (Z_next - Z).lpNorm<1>();
    Z = Z_next;
    if (change <= 1e-13 * Z.lpNorm<1>()) {
      converged = true;
      break;
    }
  }
  if (!converged) log::debug("Riccati sign iteration hit its cap; relying on Newton refinement");

  // Stable invariant subspace ker(sign(H) + I) = span [I; P].
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + Matrix::Identity(n, n);
  rhs << Z.topLeftCorner(n, n) + Matrix::Identity(n, n), Z.bottomLeftCorner(n, n);
  Matrix P = -lhs.colPivHouseholderQr().solve(rhs);
  P = (0.5 * (P + P.transpose())).eval();

  auto residual = [&](const Matrix& X) {
    return (A.transpose() * X + X * A - X * G * X + Q).norm();
  };
  const double scale = std::max({1.0, Q.norm(), A.norm() * P.norm()});

  // Newton-Kleinman refinement from the sign-function estimate.
  double res = residual(P);
  for (int it = 0; it < 20 && res > 1e-14 * scale; ++it) {
    const Matrix Acl = A - G * P;
    if (!is_hurwitz(Acl)) break;
    const Matrix K = r_llt.solve(B.transpose() * P);
    Matrix next = solve_lyapunov(Acl.transpose(), Q + K.transpose() * R * K);
    const double next_res = residual(next);
    if (!(next_res < res)) break;
    P = std::move(next);
    res = next_res;
  }
  if (!P.allFinite()) throw Error(ErrorKind::RiccatiFailure, "Riccati solution is not finite");
  if (!is_hurwitz(A - G * P)) {
    throw Error(ErrorKind::NotStabilizable, "no stabilizing Riccati solution (closed loop not Hurwitz)");
  }
  if (res > 1e-6 * scale) {
    throw Error(ErrorKind::RiccatiFailure, "Riccati residual " + std::to_string(res) + " too large");
  }
  return P;
}

FeedbackGain centralized_h2(const ReducedModel& reduced) {
  const Matrix P = solve_riccati(reduced.A, reduced.B2, reduced.Q(), reduced.R);
  const Matrix F = reduced.R.llt().solve(reduced.B2.transpose() * P);
  return FeedbackGain::from_reduced(F, reduced.transform);
}

// ---- penalties ----------------------------------------------------------------

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::Elementwise: return "elementwise";
    case PenaltyKind::BlockElementwise: return "block-gr1";
    case PenaltyKind::BlockGenerator: return "block-gr2";
    case PenaltyKind::BlockRow: return "block-gr3";
  }
  return "unknown";
}

PenaltyKind penalty_kind_from_string(const std::string& name) {
  if (name == "elementwise") return PenaltyKind::Elementwise;
  if (name == "block-gr1") return PenaltyKind::BlockElementwise;
  if (name == "block-gr2") return PenaltyKind::BlockGenerator;
  if (name == "block-gr3") return PenaltyKind::BlockRow;
  throw Error(ErrorKind::Config, "unknown penalty '" + name + "'");
}

Mask PenaltySpec::penalized() const {
  Mask out = elementwise_penalized;
  for (const auto& g : groups) {
    for (int c : g.cols) out(g.row, c) = true;
  }
  return out;
}

Mask structural_identity(const ReducedModel& reduced) {
  const int m = reduced.m();
  const int N = reduced.N();
  const int nr = reduced.transform.n - N;
  Mask is = Mask::Constant(m, nr, true);
  for (int i = 0; i < m; ++i) {
    const int owner = i < static_cast<int>(reduced.input_generator.size()) ? reduced.input_generator[i] : -1;
    if (owner < 0 || owner >= static_cast<int>(reduced.generator_state_map.size())) continue;
    for (int s : reduced.generator_state_map[static_cast<size_t>(owner)]) {
      if (s >= 0 && s < nr) is(i, s) = false;
    }
  }
  return is;
}

Vector structural_vector(const ReducedModel& reduced, int k) {
  const int nr = reduced.transform.n - reduced.N();
  if (k < 0 || k >= static_cast<int>(reduced.generator_state_map.size())) {
    throw Error(ErrorKind::BadDimensions, "generator index out of range");
  }
  Vector v = Vector::Zero(nr);
  for (int s : reduced.generator_state_map[static_cast<size_t>(k)]) {
    if (s >= 0 && s < nr) v(s) = 1.0;
  }
  return v;
}

PenaltySpec make_penalty(PenaltyKind kind, double gamma_theta, double gamma_r, const ReducedModel& reduced) {
  const int m = reduced.m();
  const int n = reduced.transform.n;
  const int N = reduced.N();
  const int nr = n - N;
  PenaltySpec spec;
  spec.kind = kind;
  spec.gamma_theta = gamma_theta;
  spec.gamma_r = kind == PenaltyKind::Elementwise ? gamma_theta : gamma_r;
  spec.N = N;
  spec.W = Matrix::Ones(m, n);
  spec.structure = structural_identity(reduced);
  spec.elementwise_penalized = Mask::Constant(m, n, false);

  if (kind == PenaltyKind::Elementwise) {
    spec.elementwise_penalized.setConstant(true);
  } else {
    spec.elementwise_penalized.leftCols(N).setConstant(true);
  }
  if (kind == PenaltyKind::BlockElementwise) {
    spec.elementwise_penalized.rightCols(nr) = spec.structure;
  }
  if (kind == PenaltyKind::BlockGenerator) {
    for (int i = 0; i < m; ++i) {
      std::vector<bool> covered(static_cast<size_t>(nr), false);
      for (size_t k = 0; k < reduced.generator_state_map.size(); ++k) {
        PenaltyGroup group;
        group.row = i;
        for (int s : reduced.generator_state_map[k]) {
          if (s < 0 || s >= nr || !spec.structure(i, s)) continue;
          group.cols.push_back(N + s);
          covered[static_cast<size_t>(s)] = true;
        }
        if (!group.cols.empty()) spec.groups.push_back(std::move(group));
      }
      // States owned by no generator form singleton groups.
      for (int s = 0; s < nr; ++s) {
        if (spec.structure(i, s) && !covered[static_cast<size_t>(s)]) {
          bool owned = false;
          for (const auto& states : reduced.generator_state_map) {
            owned = owned || std::find(states.begin(), states.end(), s) != states.end();
          }
          if (!owned) spec.groups.push_back({i, {N + s}, 1.0, 1.0});
        }
      }
    }
  }
  if (kind == PenaltyKind::BlockRow) {
    for (int i = 0; i < m; ++i) {
      PenaltyGroup group;
      group.row = i;
      for (int s = 0; s < nr; ++s) {
        if (spec.structure(i, s)) group.cols.push_back(N + s);
      }
      if (!group.cols.empty()) spec.groups.push_back(std::move(group));
    }
  }
  for (auto& g : spec.groups) g.beta = static_cast<double>(g.cols.size());
  check_spec(spec, m, n);
  return spec;
}

double penalty_value(const Matrix& K, const PenaltySpec& spec) {
  check_spec(spec, K.rows(), K.cols());
  double value = (effective_weights(spec).array() * K.array().abs()).sum();
  for (const auto& g : spec.groups) value += spec.gamma_r * g.beta * g.weight * group_norm(K, g);
  return value;
}

Matrix prox_elementwise(const Matrix& V, double tau, const Matrix& W) {
  if (W.rows() != V.rows() || W.cols() != V.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "prox weights do not match the argument");
  }
  Matrix out(V.rows(), V.cols());
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
      const double v = V(i, j);
      const double shrunk = std::abs(v) - tau * W(i, j);
      out(i, j) = shrunk > 0.0 ? std::copysign(shrunk, v) : 0.0;
    }
  }
  return out;
}

Matrix prox_group(const Matrix& V, double tau, const PenaltySpec& spec) {
  Matrix out = V;
  for (const auto& g : spec.groups) {
    if (g.row < 0 || g.row >= V.rows()) throw Error(ErrorKind::DimensionMismatch, "group row out of range");
    const double norm = group_norm(V, g);
    const double threshold = tau * g.beta * g.weight;
    const double factor = norm > threshold ? 1.0 - threshold / norm : 0.0;
    for (int c : g.cols) out(g.row, c) = factor * V(g.row, c);
  }
  return out;
}

Matrix prox_penalty(const Matrix& V, double rho, const PenaltySpec& spec) {
  check_spec(spec, V.rows(), V.cols());
  if (!(rho > 0.0)) throw Error(ErrorKind::Config, "rho must be positive");
  // Elementwise and group terms act on disjoint entries, so the prox separates.
  Matrix out = prox_elementwise(V, 1.0 / rho, effective_weights(spec));
  if (!spec.groups.empty()) {
    const Matrix grouped = prox_group(V, spec.gamma_r / rho, spec);
    for (const auto& g : spec.groups) {
      for (int c : g.cols) out(g.row, c) = grouped(g.row, c);
    }
  }
  return out;
}

PenaltySpec reweight(const Matrix& K, const PenaltySpec& spec) {
  check_spec(spec, K.rows(), K.cols());
  PenaltySpec out = spec;
  out.W = (K.array().abs() + spec.epsilon).inverse().matrix();
  for (auto& g : out.groups) {
    g.weight = 1.0 / (group_norm(K, g) + spec.epsilon);
    g.beta = static_cast<double>(g.cols.size());
  }
  return out;
}

// ---- ADMM ---------------------------------------------------------------------

std::string to_string(AdmmStatus status) {
  return status == AdmmStatus::Converged ? "converged" : "max_iter";
}

AdmmResult admm_solve(const ReducedModel& reduced, const PenaltySpec& spec_in, const AdmmOptions& options,
                      const std::optional<AdmmState>& warm) {
  const Matrix& T = reduced.transform.T;
  check_spec(spec_in, reduced.m(), T.rows());
  if (!(options.rho > 0.0) || options.max_iter < 1 || options.reweight_rounds < 1 || options.inner_max_iter < 1) {
    throw Error(ErrorKind::Config, "ADMM options need rho > 0 and positive iteration counts");
  }

  const FeedbackGain centralized = centralized_h2(reduced);
  AdmmState state;
  if (warm && warm->F.rows() == reduced.m() && warm->F.cols() == reduced.n()) {
    state = *warm;
    if (!(state.rho > 0.0)) state.rho = options.rho;
    if (state.K.size() == 0) state.K = state.F * T.transpose();
    if (state.Lambda.size() == 0) state.Lambda = Matrix::Zero(state.K.rows(), state.K.cols());
    if (!is_hurwitz(reduced.A - reduced.B2 * state.F)) {
      log::warn("warm start is not stabilizing; restarting from the centralized gain");
      state = {};
    }
  }
  if (state.F.size() == 0) {
    state.F = centralized.F;
    state.K = centralized.K;
    state.Lambda = Matrix::Zero(centralized.K.rows(), centralized.K.cols());
    state.rho = options.rho;
  }

  const GramianMetric metric(reduced.R);
  AdmmResult result;
  PenaltySpec spec = spec_in;
  spec.epsilon = std::max(options.reweight_eps_scale * max_abs(centralized.K), 1e-12);

  for (int round = 0; round < options.reweight_rounds; ++round) {
    if (round > 0) spec = reweight(state.K, spec);
    bool converged = false;
    for (int it = 0; it < options.max_iter; ++it) {
      // F-step: J(F) + rho/2 ||F T^T - V||^2 equals J(F) + rho/2 ||F - V T||^2 up to a constant.
      const double rho = state.rho;
      const Matrix target = (state.K - state.Lambda / rho) * T;
      Matrix X;  // Gramian at the last gradient evaluation
      const Evaluator f_step = [&](const Matrix& F, bool need_gradient, double& f, Matrix& g) {
        try {
          if (need_gradient) {
            H2Evaluation e = h2_cost_and_gradient(reduced, F);
            f = e.J;
            g = e.gradient + rho * (F - target);
            X = std::move(e.X);
          } else {
            f = h2_cost(reduced, F);
          }
          f += 0.5 * rho * (F - target).squaredNorm();
          return std::isfinite(f);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::NotHurwitz) return false;
          throw;
        }
      };
      const Preconditioner metric_step = [&](const Matrix&, const Matrix& g) { return metric.direction(g, X, rho); };
      state.F = descend(state.F, f_step, options.inner_tol, options.inner_max_iter, "ADMM F-step", metric_step).x;

      const Matrix FT = state.F * T.transpose();
      const Matrix K_next = prox_penalty(FT + state.Lambda / rho, rho, spec);
      state.Lambda += rho * (FT - K_next);
      const double primal = (FT - K_next).norm();
      const double dual = rho * (K_next - state.K).norm();
      state.K = K_next;

      const double primal_tol = options.eps_abs + options.eps_rel * std::max(FT.norm(), state.K.norm());
      const double dual_tol = options.eps_abs + options.eps_rel * state.Lambda.norm();

      AdmmIteration rec;
      rec.round = round;
      rec.iteration = it;
      rec.primal_residual = primal;
      rec.dual_residual = dual;
      rec.J = h2_cost(reduced, state.F);
      rec.penalty = penalty_value(state.K, spec);
      rec.rho = rho;
      result.report.history.push_back(rec);
      result.report.final_primal = primal;
      result.report.final_dual = dual;
      result.report.primal_tolerance = primal_tol;
      result.report.dual_tolerance = dual_tol;

      if (primal <= primal_tol && dual <= dual_tol) {
        converged = true;
        break;
      }
      if (options.adaptive_rho) {
        if (primal > 10.0 * dual) state.rho = std::min(2.0 * rho, kRhoMax);
        else if (dual > 10.0 * primal) state.rho = std::max(0.5 * rho, kRhoMin);
      }
    }
    result.report.card_per_round.push_back(gain_cardinality(state.K));
    result.report.rounds = round + 1;
    result.report.status = converged ? AdmmStatus::Converged : AdmmStatus::MaxIterations;
    if (!converged) log::warn("ADMM round " + std::to_string(round) + " hit the iteration cap");
  }

  result.F = state.F;
  result.K = state.K;
  result.state = state;
  result.spec = spec;
  return result;
}

Matrix project_structure(const Matrix& K, const Mask& free, int N, bool relative) {
  if (free.rows() != K.rows() || free.cols() != K.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "structure mask does not match the gain shape");
  }
  Matrix out = (free).select(K, Matrix::Zero(K.rows(), K.cols()));
  if (!relative) return out;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    int count = 0;
    double sum = 0.0;
    for (int j = 0; j < N; ++j) {
      if (free(i, j)) {
        ++count;
        sum += out(i, j);
      }
    }
    if (count == 0) continue;
    const double mean = sum / count;
    for (int j = 0; j < N; ++j) {
      if (free(i, j)) out(i, j) -= mean;
    }
  }
  return out;
}

namespace {

// Row-wise metric step on a sparsity pattern (diagonal R): for each row i,
// minimize g_i d + r_ii d (T X T^T) d^T over d supported on the free entries,
// with free angle entries summing to zero in relative mode.
Matrix structured_direction(const Matrix& G, const Matrix& S, const Matrix& R, const Mask& free, int N,
                            bool relative) {
  Matrix D = Matrix::Zero(G.rows(), G.cols());
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      if (free(i, j)) idx.push_back(j);
    }
    if (idx.empty()) continue;
    const auto k = static_cast<Eigen::Index>(idx.size());
    const bool constrained = relative && std::any_of(idx.begin(), idx.end(), [&](Eigen::Index j) { return j < N; });
    const Eigen::Index dim = k + (constrained ? 1 : 0);
    Matrix kkt = Matrix::Zero(dim, dim);
    Vector rhs = Vector::Zero(dim);
    double trace = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) trace += S(idx[a], idx[a]);
    const double shift = 1e-12 * std::max(trace / k, std::numeric_limits<double>::min());
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) kkt(a, b) = 2.0 * R(i, i) * S(idx[a], idx[b]);
      kkt(a, a) += shift;
      rhs(a) = -G(i, idx[a]);
      if (constrained && idx[a] < N) kkt(a, k) = kkt(k, a) = 1.0;
    }
    const Vector sol = kkt.fullPivLu().solve(rhs);
    for (Eigen::Index a = 0; a < k; ++a) D(i, idx[a]) = sol(a);
  }
  return D;
}

}  // namespace

PolishResult polish(const Mask& free, const ReducedModel& reduced, const Matrix& F_start, const AdmmOptions& options) {
  check_reduced_gain(reduced, F_start);
  const SymmetryTransform& transform = reduced.transform;
  const Matrix& T = transform.T;
  const int N = transform.N;
  const bool relative = relative_mode(reduced);
  if (free.rows() != reduced.m() || free.cols() != T.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "structure mask must be m x n");
  }

  Matrix X;  // Gramian at the last gradient evaluation
  const Evaluator objective = [&](const Matrix& K, bool need_gradient, double& f, Matrix& g) {
    try {
      const Matrix F = K * T;
      if (need_gradient) {
        H2Evaluation e = h2_cost_and_gradient(reduced, F);
        f = e.J;
        g = project_structure(e.gradient * T.transpose(), free, N, relative);
        X = std::move(e.X);
      } else {
        f = h2_cost(reduced, F);
      }
      return std::isfinite(f);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NotHurwitz) return false;
      throw;
    }
  };

  std::vector<Matrix> starts;
  starts.push_back(project_structure(F_start * T.transpose(), free, N, relative));
  starts.push_back(Matrix::Zero(reduced.m(), T.rows()));
  const Matrix* start = nullptr;
  for (const auto& candidate : starts) {
    double f = 0.0;
    Matrix g;
    if (objective(candidate, false, f, g)) {
      start = &candidate;
      break;
    }
  }
  if (start == nullptr) {
    throw Error(ErrorKind::StructureNotStabilizing, "no stabilizing gain found on the requested structure");
  }

  DescentResult d;
  try {
    Preconditioner metric_step;
    if (GramianMetric(reduced.R).diagonal()) {
      metric_step = [&](const Matrix&, const Matrix& g) {
        return structured_direction(g, T * X * T.transpose(), reduced.R, free, N, relative);
      };
    }
    d = descend(*start, objective, options.polish_tol, options.polish_max_iter, "polish", metric_step);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::StabilizationLost) throw Error(ErrorKind::StructureNotStabilizing, e.what());
    throw;
  }
  if (!d.converged) {
    log::info("polish stopped at projected gradient " + std::to_string(d.gradient_norm));
  }
  // Re-project to remove roundoff from the last step.
  const Matrix K = project_structure(d.x, free, N, relative);
  PolishResult out;
  out.gain.K = K;
  out.gain.F = K * T;
  out.gain.N = N;
  out.gain.card = gain_cardinality(K);
  out.J = h2_cost(reduced, out.gain.F);
  out.gradient_norm = d.gradient_norm;
  out.iterations = d.iterations;
  return out;
}

Mask decentralized_mask(const ReducedModel& reduced) {
  const int N = reduced.N();
  Mask free = Mask::Constant(reduced.m(), reduced.transform.n, false);
  free.rightCols(reduced.transform.n - N) = !structural_identity(reduced);
  return free;
}

DesignResult design(const ReducedModel& reduced, const PenaltySpec& spec, const AdmmOptions& options) {
  DesignResult out;
  out.centralized = centralized_h2(reduced);
  out.J_centralized = h2_cost(reduced, out.centralized.F);
  out.admm_result = admm_solve(reduced, spec, options);
  const Mask free = nonzero_mask(out.admm_result.K);
  const Matrix K_admm = project_structure(out.admm_result.K, free, reduced.N(), relative_mode(reduced));
  out.admm.K = K_admm;
  out.admm.F = K_admm * reduced.transform.T;
  out.admm.N = reduced.N();
  out.admm.card = gain_cardinality(K_admm);
  out.J_admm = h2_cost(reduced, out.admm_result.F);
  const PolishResult polished = polish(free, reduced, out.admm_result.F, options);
  out.polished = polished.gain;
  out.J_polished = polished.J;
  out.degradation_percent = 100.0 * (out.J_polished / out.J_centralized - 1.0);
  return out;
}

// ---- sweeps -------------------------------------------------------------------

std::vector<int> SweepTable::card_increases() const {
  std::vector<int> out;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].status != "ok" && rows[i].status != "max_iter") continue;
    if (rows[i].card > rows[i - 1].card) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<double> gamma_grid(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw Error(ErrorKind::Config, "gamma grid needs 0 < min <= max and count >= 1");
  }
  if (count == 1) return {lo};
  std::vector<double> grid(static_cast<size_t>(count));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int k = 0; k < count; ++k) grid[static_cast<size_t>(k)] = std::pow(10.0, a + (b - a) * k / (count - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

SweepTable gamma_sweep(const ReducedModel& reduced, PenaltyKind kind, const std::vector<double>& grid,
                       const AdmmOptions& options, const SweepOptions& sweep) {
  for (size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw Error(ErrorKind::Config, "gamma grid must be ascending");
  }
  SweepTable table;
  const FeedbackGain centralized = centralized_h2(reduced);
  table.J_centralized = h2_cost(reduced, centralized.F);
  table.rows.resize(grid.size());

  auto solve_point = [&](size_t k, std::optional<AdmmState>& warm) {
    SweepRow& row = table.rows[k];
    row.gamma = grid[k];
    try {
      const PenaltySpec spec = make_penalty(kind, grid[k], sweep.gamma_r_ratio * grid[k], reduced);
      const AdmmResult admm = admm_solve(reduced, spec, options, warm);
      warm = admm.state;
      const PolishResult polished = polish(nonzero_mask(admm.K), reduced, admm.F, options);
      row.gain = polished.gain;
      row.card = polished.gain.card;
      row.J = polished.J;
      row.J_admm = h2_cost(reduced, admm.F);
      row.degradation_percent = 100.0 * (row.J / table.J_centralized - 1.0);
      row.status = admm.report.status == AdmmStatus::Converged ? "ok" : "max_iter";
    } catch (const Error& e) {
      log::warn("sweep point gamma=" + std::to_string(grid[k]) + " failed: " + e.what());
      row.status = std::string(to_string(e.kind()));
      row.J = row.J_admm = row.degradation_percent = std::numeric_limits<double>::quiet_NaN();
    }
  };

  if (sweep.warm_start) {
    std::optional<AdmmState> warm;
    for (size_t k = 0; k < grid.size(); ++k) solve_point(k, warm);
  } else {
    parallel_for(grid.size(), resolve_jobs(sweep.jobs), [&](size_t k) {
      std::optional<AdmmState> cold;
      solve_point(k, cold);
    });
  }
  return table;
}

}  // namespace gridosc
