#include "gridosc/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/SVD>

#include "gridosc/error.hpp"
#include "gridosc/io_analysis.hpp"
#include "gridosc/parallel.hpp"
#include "gridosc/symmetry.hpp"

namespace gridosc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::pair<int, int>> edges_of(const Matrix& L) {
  std::vector<std::pair<int, int>> edges;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < L.cols(); ++j) {
      if (L(i, j) != 0.0) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return edges;
}

// J of the fixed gain on one rebuilt model; NaN when the closed loop is unstable.
double score(const ReducedModel& reduced, const Matrix& K) {
  const Matrix F = gain_to_reduced(K, reduced.transform);
  if (!is_hurwitz(reduced.A - reduced.B2 * F)) return kNaN;
  return h2_cost(reduced, F);
}

double sigma_min_return_difference(const CMatrix& loop) {
  const CMatrix rd = CMatrix::Identity(loop.rows(), loop.cols()) + loop;
  Eigen::JacobiSVD<CMatrix> svd(rd);
  return svd.singularValues().minCoeff();
}

}  // namespace

int edge_count(const Matrix& laplacian) { return static_cast<int>(edges_of(laplacian).size()); }

Matrix perturb_laplacian(const Matrix& laplacian, const std::vector<double>& factors) {
  require_square(laplacian, "coupling matrix");
  const auto edges = edges_of(laplacian);
  if (factors.size() != edges.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one perturbation factor per edge is required");
  }
  Matrix L = laplacian;
  for (size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    L(i, j) = laplacian(i, j) * factors[e];
    L(j, i) = L(i, j);
  }
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < L.cols(); ++j) {
      if (j != i) off += L(i, j);
    }
    L(i, i) = -off;
  }
  return L;
}

PerturbationStudy perturb_and_score(const SwingStudy& study, const std::vector<Matrix>& gains,
                                    const std::vector<std::string>& names, double magnitude, int samples,
                                    std::uint64_t seed, int jobs, double R_scale) {
  if (!(magnitude >= 0.0) || magnitude >= 1.0) {
    throw Error(ErrorKind::Config, "perturbation magnitude must lie in [0, 1)");
  }
  if (samples < 0) throw Error(ErrorKind::Config, "sample count must be nonnegative");
  if (!names.empty() && names.size() != gains.size()) {
    throw Error(ErrorKind::Config, "controller names must match the gain list");
  }
  study.network.validate();
  const Matrix& L0 = study.network.laplacian;
  const size_t n_edges = edges_of(L0).size();

  PerturbationStudy out;
  out.magnitude = magnitude;
  out.samples = samples;
  out.seed = seed;
  out.names.push_back("open");
  for (size_t k = 0; k < gains.size(); ++k) {
    out.names.push_back(names.empty() ? "K" + std::to_string(k + 1) : names[k]);
  }
  const size_t columns = out.names.size();

  auto evaluate = [&](const std::vector<double>& factors, double* row) {
    const StateSpaceModel model = study.build_with(perturb_laplacian(L0, factors));
    const ReducedModel reduced = reduce(model, build_weights(model, R_scale));
    row[0] = score(reduced, Matrix::Zero(model.m(), model.n()));
    for (size_t k = 0; k < gains.size(); ++k) {
      if (gains[k].rows() != model.m() || gains[k].cols() != model.n()) {
        throw Error(ErrorKind::IncompatibleGain, "gain " + out.names[k + 1] + " does not match the model");
      }
      row[k + 1] = score(reduced, gains[k]);
    }
  };

  // Nominal values go through the same rebuild path, so magnitude 0 reproduces them exactly.
  out.nominal.assign(columns, 0.0);
  evaluate(std::vector<double>(n_edges, 1.0), out.nominal.data());
  for (size_t c = 0; c < columns; ++c) {
    if (std::isnan(out.nominal[c])) {
      throw Error(ErrorKind::NotHurwitz, "nominal closed loop " + out.names[c] + " is not stable");
    }
  }

  // All random factors are drawn up front, in sample order, from one stream.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> factors(static_cast<size_t>(samples), std::vector<double>(n_edges));
  for (auto& sample : factors) {
    for (auto& f : sample) f = 1.0 + magnitude * (2.0 * unit(rng) - 1.0);
  }

  Matrix J(samples, static_cast<Eigen::Index>(columns));
  std::vector<std::vector<double>> rows(static_cast<size_t>(samples), std::vector<double>(columns));
  parallel_for(static_cast<size_t>(samples), resolve_jobs(jobs),
               [&](size_t s) { evaluate(factors[s], rows[s].data()); });
  for (int s = 0; s < samples; ++s) {
    for (size_t c = 0; c < columns; ++c) J(s, static_cast<Eigen::Index>(c)) = rows[static_cast<size_t>(s)][c];
  }
  out.J = J;

  out.unstable.assign(columns, {});
  out.summaries.assign(columns, {});
  for (size_t c = 0; c < columns; ++c) {
    PerturbationSummary& sum = out.summaries[c];
    sum.nominal = out.nominal[c];
    double total = 0.0;
    int stable = 0;
    sum.min = std::numeric_limits<double>::infinity();
    sum.max = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
      const double v = J(s, static_cast<Eigen::Index>(c));
      if (std::isnan(v)) {
        out.unstable[c].push_back(s);
        continue;
      }
      ++stable;
      total += v;
      sum.min = std::min(sum.min, v);
      sum.max = std::max(sum.max, v);
    }
    sum.unstable = static_cast<int>(out.unstable[c].size());
    if (stable == 0) {
      sum.mean = sum.min = sum.max = sum.spread = sum.max_degradation_percent = kNaN;
      continue;
    }
    sum.mean = total / stable;
    sum.spread = (sum.max - sum.min) / sum.nominal;
    sum.max_degradation_percent = 100.0 * (sum.max / sum.nominal - 1.0);
  }
  return out;
}

PhaseMargin phase_margin(const ReducedModel& reduced, const Matrix& F, const std::vector<double>& grid) {
  if (F.rows() != reduced.m() || F.cols() != reduced.n()) {
    throw Error(ErrorKind::DimensionMismatch, "reduced gain must be m x (n-1)");
  }
  require_finite(F, "reduced gain");
  require_hurwitz(reduced.A - reduced.B2 * F, "closed-loop matrix");

  PhaseMargin out;
  out.loop_closed = F.cwiseAbs().maxCoeff() > 0.0;
  // L(jw) -> 0 as w -> infinity, so alpha <= 1 always.
  out.alpha = 1.0;
  out.omega = std::numeric_limits<double>::infinity();
  if (out.loop_closed) {
    const FrequencyResponse loop(reduced.A, reduced.B2, F);
    auto evaluate = [&](double w) {
      try {
        return sigma_min_return_difference(loop(w));
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::SingularAtFrequency) return std::numeric_limits<double>::infinity();
        throw;
      }
    };
    std::vector<double> points;
    points.push_back(0.0);
    points.insert(points.end(), grid.begin(), grid.end());
    size_t best = points.size();
    for (size_t k = 0; k < points.size(); ++k) {
      const double a = evaluate(points[k]);
      if (a < out.alpha) {
        out.alpha = a;
        out.omega = points[k];
        best = k;
      }
    }
    // Refine x4 across the neighbouring intervals of the grid minimum.
    if (best < points.size()) {
      const double lo = points[best > 0 ? best - 1 : 0];
      const double hi = points[std::min(best + 1, points.size() - 1)];
      const int sub = 4 * 2;
      for (int k = 1; k < sub; ++k) {
        const double w = lo + (hi - lo) * k / sub;
        const double a = evaluate(w);
        if (a < out.alpha) {
          out.alpha = a;
          out.omega = w;
        }
      }
    }
  }
  const double clipped = std::clamp(out.alpha, 0.0, 2.0);
  out.degrees = 2.0 * std::asin(clipped / 2.0) * 180.0 / std::numbers::pi;
  return out;
}

PhaseMargin phase_margin(const ReducedModel& reduced, const Matrix& F) {
  return phase_margin(reduced, F, default_frequency_grid());
}

MarginCurve margin_curve(const ReducedModel& reduced, const SweepTable& table) {
  MarginCurve curve;
  for (const auto& row : table.rows) {
    if (row.gain.F.size() == 0) continue;
    const PhaseMargin pm = phase_margin(reduced, row.gain.F);
    curve.gamma.push_back(row.gamma);
    curve.margin_deg.push_back(pm.degrees);
    curve.loop_closed.push_back(pm.loop_closed);
  }
  return curve;
}

}  // namespace gridosc
