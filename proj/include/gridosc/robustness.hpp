#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridosc/grid_model.hpp"
#include "gridosc/sparse_lqr.hpp"

namespace gridosc {

// Coupling matrix with every edge (i, j) scaled by factors(e); the diagonal is
// rebuilt so rows still sum to zero.
Matrix perturb_laplacian(const Matrix& laplacian, const std::vector<double>& factors);

/// Number of edges (nonzero upper off-diagonal entries) of a coupling matrix.
int edge_count(const Matrix& laplacian);

struct PerturbationSummary {
  double nominal = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double spread = 0.0;                   // (max - min) / nominal over stable samples
  double max_degradation_percent = 0.0;  // 100 (max / nominal - 1)
  int unstable = 0;
};

struct PerturbationStudy {
  double magnitude = 0.0;
  int samples = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> names;             // "open", then one per controller
  std::vector<double> nominal;                // nominal J per column
  Matrix J;                                   // samples x columns; NaN where unstable
  std::vector<std::vector<int>> unstable;     // per column, sample indices with an unstable closed loop
  std::vector<PerturbationSummary> summaries; // per column
};

/// Monte Carlo over coupling strengths: each edge scaled by an independent
/// U[1 - magnitude, 1 + magnitude] factor, every fixed physical gain in `gains`
/// scored on the rebuilt model. Deterministic for a fixed seed regardless of `jobs`.
PerturbationStudy perturb_and_score(const SwingStudy& study, const std::vector<Matrix>& gains,
                                    const std::vector<std::string>& names, double magnitude, int samples,
                                    std::uint64_t seed, int jobs = 1, double R_scale = 1.0);

struct PhaseMargin {
  double degrees = 0.0;
  double alpha = 0.0;  // min_w sigma_min(I + L(jw))
  double omega = 0.0;  // argmin; +inf when attained at infinite frequency
  bool loop_closed = true;
};

/// Symmetric guaranteed margin 2 asin(min(alpha, 2)/2) of the loop broken at
/// the plant input, L(jw) = F (jwI - Abar)^{-1} B2bar. Throws NotHurwitz.
PhaseMargin phase_margin(const ReducedModel& reduced, const Matrix& F, const std::vector<double>& grid);
PhaseMargin phase_margin(const ReducedModel& reduced, const Matrix& F);

struct MarginCurve {
  std::vector<double> gamma;
  std::vector<double> margin_deg;
  std::vector<bool> loop_closed;
};

/// Phase margin of every solved sweep point (rows with a gain).
MarginCurve margin_curve(const ReducedModel& reduced, const SweepTable& table);

}  // namespace gridosc
