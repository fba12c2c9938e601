#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridosc/symmetry.hpp"

namespace gridosc {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Feedback u = -K x = -F xi, with K = [K_theta | K_r] split at column N.
struct FeedbackGain {
  Matrix K;  // m x n
  Matrix F;  // m x (n-1)
  int N = 0;
  int card = 0;

  /// Nonzero pattern |K_ij| > 1e-6 max|K|.
  Mask pattern() const;

  static FeedbackGain from_reduced(const Matrix& F, const SymmetryTransform& transform);
  static FeedbackGain from_physical(const Matrix& K, const SymmetryTransform& transform);
};

int gain_cardinality(const Matrix& K);

// ---- H2 objective -------------------------------------------------------------

/// J(F) = trace(X (Qbar + F^T R F)). Throws NotHurwitz if Abar - B2bar F is not Hurwitz.
double h2_cost(const ReducedModel& reduced, const Matrix& F);

/// grad J(F) = 2 (R F - B2bar^T P) X with X, P the closed-loop Gramians.
Matrix h2_gradient(const ReducedModel& reduced, const Matrix& F);

struct H2Evaluation {
  double J = 0.0;
  Matrix gradient;
  Matrix X;  // closed-loop controllability Gramian
};
H2Evaluation h2_cost_and_gradient(const ReducedModel& reduced, const Matrix& F);

/// Stabilizing solution of Abar^T P + P Abar - P B2bar R^{-1} B2bar^T P + Qbar = 0.
Matrix solve_riccati(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

/// Optimal unstructured gain F = R^{-1} B2bar^T P.
FeedbackGain centralized_h2(const ReducedModel& reduced);

// ---- Penalties ----------------------------------------------------------------

enum class PenaltyKind { Elementwise, BlockElementwise, BlockGenerator, BlockRow };

std::string to_string(PenaltyKind kind);
PenaltyKind penalty_kind_from_string(const std::string& name);  // elementwise, block-gr1, block-gr2, block-gr3

// One group of K entries shrunk together: row `row`, absolute K columns `cols`.
struct PenaltyGroup {
  int row = 0;
  std::vector<int> cols;
  double weight = 1.0;  // reweighted W_ik or W_i
  double beta = 1.0;    // group size scaling
};

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::Elementwise;
  double gamma_theta = 0.0;  // elementwise kind: the single gamma for every entry
  double gamma_r = 0.0;
  int N = 0;
  Matrix W;                        // m x n elementwise weights
  Mask structure;                  // I_s: m x (n-N), true where a K_r entry is inter-generator
  Mask elementwise_penalized;      // m x n, entries shrunk by the elementwise prox
  std::vector<PenaltyGroup> groups;
  double epsilon = 1e-3;           // reweighting offset

  int rows() const { return static_cast<int>(W.rows()); }
  int cols() const { return static_cast<int>(W.cols()); }
  /// Every entry touched by some penalty term.
  Mask penalized() const;
};

/// I_s: ones where r-column j does not belong to the generator that owns input i.
Mask structural_identity(const ReducedModel& reduced);

/// v_k: indicator over r of generator k's states.
Vector structural_vector(const ReducedModel& reduced, int k);

/// Initial spec (unit weights) for the reduced model.
PenaltySpec make_penalty(PenaltyKind kind, double gamma_theta, double gamma_r, const ReducedModel& reduced);
inline PenaltySpec make_penalty(PenaltyKind kind, double gamma, const ReducedModel& reduced) {
  return make_penalty(kind, gamma, gamma, reduced);
}

/// gamma-weighted penalty value gamma_theta g_theta + gamma_r g_r (or gamma g for elementwise).
double penalty_value(const Matrix& K, const PenaltySpec& spec);

/// sign(V) max(|V| - tau W, 0) entrywise; ties map to zero.
Matrix prox_elementwise(const Matrix& V, double tau, const Matrix& W);

/// Group shrinkage V_g max(1 - tau beta_g W_g / ||V_g||, 0) over spec.groups; other entries pass through.
Matrix prox_group(const Matrix& V, double tau, const PenaltySpec& spec);

/// Minimizer of penalty_value(K) + (rho/2) ||K - V||_F^2.
Matrix prox_penalty(const Matrix& V, double rho, const PenaltySpec& spec);

/// W_ij = 1/(|K_ij| + eps), W_g = 1/(||K_g|| + eps); beta recomputed.
PenaltySpec reweight(const Matrix& K, const PenaltySpec& spec);

// ---- ADMM ---------------------------------------------------------------------

struct AdmmOptions {
  double rho = 100.0;
  bool adaptive_rho = true;
  double eps_abs = 1e-4;
  double eps_rel = 1e-3;
  int max_iter = 1000;
  int reweight_rounds = 5;
  // Reweighting offset as a fraction of max|K_c|.
  double reweight_eps_scale = 1e-3;
  double inner_tol = 1e-6;
  int inner_max_iter = 500;
  double polish_tol = 1e-6;
  int polish_max_iter = 20000;
};

enum class AdmmStatus { Converged, MaxIterations };
std::string to_string(AdmmStatus status);

struct AdmmIteration {
  int round = 0;
  int iteration = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double J = 0.0;
  double penalty = 0.0;
  double rho = 0.0;
};

struct AdmmReport {
  std::vector<AdmmIteration> history;
  AdmmStatus status = AdmmStatus::Converged;
  int rounds = 0;
  std::vector<int> card_per_round;
  double final_primal = 0.0;
  double final_dual = 0.0;
  double primal_tolerance = 0.0;
  double dual_tolerance = 0.0;
};

// Iterates carried between solves (warm starts across a gamma grid).
struct AdmmState {
  Matrix F;
  Matrix K;
  Matrix Lambda;
  double rho = 0.0;
};

struct AdmmResult {
  Matrix F;  // last F-step iterate
  Matrix K;  // last K-step iterate (exact zeros from the prox)
  AdmmState state;
  AdmmReport report;
  PenaltySpec spec;  // weights after the final round
};

/// Solves min J(F) + gamma g(K) s.t. F T^T = K with reweighting rounds.
/// `warm` defaults to the centralized gain with zero multipliers.
/// Throws StabilizationLost if no descent step keeps the closed loop Hurwitz.
AdmmResult admm_solve(const ReducedModel& reduced, const PenaltySpec& spec, const AdmmOptions& options,
                      const std::optional<AdmmState>& warm = std::nullopt);

struct PolishResult {
  FeedbackGain gain;
  double J = 0.0;
  double gradient_norm = 0.0;  // projected gradient at return
  int iterations = 0;
};

/// Minimizes J over gains K = F T^T that vanish where free(i,j) is false.
/// Throws StructureNotStabilizing if no stabilizing start exists on the mask.
PolishResult polish(const Mask& free, const ReducedModel& reduced, const Matrix& F_start, const AdmmOptions& options);

/// Orthogonal projection onto {K : K = 0 off `free`, K_theta 1 = 0}.
Matrix project_structure(const Matrix& K, const Mask& free, int N, bool relative);

/// Fully decentralized mask: each input uses its own generator's non-angle states only.
Mask decentralized_mask(const ReducedModel& reduced);

struct DesignResult {
  FeedbackGain centralized;
  FeedbackGain admm;  // ADMM K-step iterate mapped onto the relative-gain subspace
  FeedbackGain polished;
  double J_centralized = 0.0;
  double J_admm = 0.0;
  double J_polished = 0.0;
  double degradation_percent = 0.0;
  AdmmResult admm_result;
};

/// centralized_h2 -> admm_solve -> polish on the identified pattern.
DesignResult design(const ReducedModel& reduced, const PenaltySpec& spec, const AdmmOptions& options);

// ---- gamma sweeps -------------------------------------------------------------

struct SweepRow {
  double gamma = 0.0;
  int card = 0;
  double J = 0.0;       // polished
  double J_admm = 0.0;  // raw ADMM F-iterate
  double degradation_percent = 0.0;
  std::string status;   // "ok", "max_iter", or an error kind
  FeedbackGain gain;
};

struct SweepTable {
  double J_centralized = 0.0;
  std::vector<SweepRow> rows;
  /// Indices i where card(rows[i]) > card(rows[i-1]).
  std::vector<int> card_increases() const;
};

std::vector<double> gamma_grid(double lo, double hi, int count);

struct SweepOptions {
  // gamma_r = gamma_r_ratio * gamma; gamma_theta = gamma.
  double gamma_r_ratio = 1.0;
  // Cold starts are independent and may run on `jobs` workers, but can land in
  // different local patterns than the sequential warm-started path.
  bool warm_start = true;
  int jobs = 1;
};

/// Sweep over an ascending gamma grid; per-point failures become status markers.
SweepTable gamma_sweep(const ReducedModel& reduced, PenaltyKind kind, const std::vector<double>& grid,
                       const AdmmOptions& options, const SweepOptions& sweep = {});

}  // namespace gridosc
