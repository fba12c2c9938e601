#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gridosc/io_analysis.hpp"
#include "gridosc/robustness.hpp"
#include "gridosc/sparse_lqr.hpp"

// Plot-ready CSV/JSON writers. Every CSV starts with a "# manifest: ..." line
// followed by a header row; numbers use shortest round-trip formatting, so
// identical inputs give byte-identical files.
namespace gridosc::reports {

inline constexpr const char* kManifestName = "manifest.json";

std::string number(double value);

class CsvWriter {
public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);
  void row(const std::vector<double>& cells);
  std::string str() const;

private:
  std::size_t columns_;
  std::string text_;
};

void write_file(const std::filesystem::path& path, const std::string& content);

/// omega, psd, peak (1 on detected peaks).
std::string psd_csv(const PsdCurve& curve);
/// omega, <name>... one PSD column per system on a shared grid.
std::string psd_compare_csv(const std::vector<std::string>& names, const std::vector<PsdCurve>& curves);
/// re, im, zeta, freq_hz, dominant_state.
std::string modal_csv(const ModalTable& table, const std::vector<std::string>& labels);
/// system, re, im, zeta, freq_hz: full spectra for eigenvalue plots.
std::string spectra_csv(const std::vector<std::string>& names, const std::vector<CVector>& spectra);
/// index, lambda, cumfrac.
std::string covariance_csv(const CovarianceSpectrum& spectrum);
/// index, then lambda_<name>, cumfrac_<name> per system.
std::string covariance_compare_csv(const std::vector<std::string>& names,
                                   const std::vector<CovarianceSpectrum>& spectra);
/// generator, angle_variance, frequency_variance.
std::string variance_contributions_csv(const VarianceReport& report);
/// t, theta_1..theta_N, omega_1..omega_N (frequency states per generator).
std::string trajectory_csv(const Trajectory& trajectory, const StateSpaceModel& model,
                           const std::string& system = "");
/// gamma, card, J, degradation_percent, status, J_admm, card_increase.
std::string sweep_csv(const SweepTable& table);
/// round, iteration, primal, dual, J, penalty, rho.
std::string admm_report_csv(const AdmmReport& report);
/// row, col, value for every nonzero of K.
std::string pattern_csv(const Matrix& K);
/// sample, J_open, J_<controller>...; NaN marks an unstable sample.
std::string histogram_csv(const PerturbationStudy& study);
/// bin_lo, bin_hi, count_<column>... over the pooled stable range.
std::string histogram_bins_csv(const PerturbationStudy& study, int bins);
/// gamma, margin_deg.
std::string margin_csv(const MarginCurve& curve);

struct GainFile {
  Matrix K;
  int N = 0;
  double gamma = 0.0;
  std::string penalty;
};

/// {"K": rows, "N": int, "pattern": ["1010", ...], "gamma": float, "penalty": string}.
std::string gain_json(const Matrix& K, int N, double gamma, const std::string& penalty);
GainFile load_gain(const std::filesystem::path& path);

/// {"columns": [...], "rows": [[...]]} mirror of a CSV written by this module.
std::string csv_json_mirror(const std::string& csv);

/// Small axis/series description files consumed by plotting scripts.
std::string plot_metadata(const std::string& title, const std::string& x, const std::string& y,
                          const std::vector<std::string>& series, bool log_x, bool log_y);

}  // namespace gridosc::reports
