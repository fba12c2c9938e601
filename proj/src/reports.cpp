#include "gridosc/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gridosc/error.hpp"
#include "json_support.hpp"

namespace gridosc::reports {

using namespace json_support;

std::string number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  text_ = std::string("# manifest: ") + kManifestName + "\n";
  for (size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
  text_ += "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw Error(ErrorKind::DimensionMismatch, "CSV row has the wrong number of cells");
  for (size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
  text_ += "\n";
}

void CsvWriter::row(const std::vector<double>& cells) {
  std::vector<std::string> text;
  text.reserve(cells.size());
  for (double v : cells) text.push_back(number(v));
  row(text);
}

std::string CsvWriter::str() const { return text_; }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string psd_csv(const PsdCurve& curve) {
  CsvWriter csv({"omega", "psd", "peak"});
  for (size_t k = 0; k < curve.omega.size(); ++k) {
    const bool peak = std::any_of(curve.peaks.begin(), curve.peaks.end(),
                                  [&](const PsdPeak& p) { return p.omega == curve.omega[k]; });
    csv.row(std::vector<double>{curve.omega[k], curve.values[k], peak ? 1.0 : 0.0});
  }
  return csv.str();
}

std::string psd_compare_csv(const std::vector<std::string>& names, const std::vector<PsdCurve>& curves) {
  if (names.size() != curves.size()) throw Error(ErrorKind::DimensionMismatch, "one name per PSD curve");
  std::vector<std::string> header{"omega"};
  header.insert(header.end(), names.begin(), names.end());
  CsvWriter csv(header);
  const size_t n = curves.empty() ? 0 : curves.front().omega.size();
  for (size_t k = 0; k < n; ++k) {
    std::vector<double> row{curves.front().omega[k]};
    for (const auto& c : curves) {
      if (c.values.size() != n) throw Error(ErrorKind::DimensionMismatch, "PSD curves must share a grid");
      row.push_back(c.values[k]);
    }
    csv.row(row);
  }
  return csv.str();
}

std::string modal_csv(const ModalTable& table, const std::vector<std::string>& labels) {
  CsvWriter csv({"re", "im", "zeta", "freq_hz", "dominant_state"});
  for (const auto& mode : table.modes) {
    std::string dominant;
    if (mode.participation.size() > 0) {
      Eigen::Index k = 0;
      mode.participation.maxCoeff(&k);
      dominant = k < static_cast<Eigen::Index>(labels.size()) ? labels[static_cast<size_t>(k)] : std::to_string(k);
    }
    csv.row({number(mode.eigenvalue.real()), number(mode.eigenvalue.imag()), number(mode.damping_ratio),
             number(mode.frequency_hz), dominant});
  }
  return csv.str();
}

std::string spectra_csv(const std::vector<std::string>& names, const std::vector<CVector>& spectra) {
  if (names.size() != spectra.size()) throw Error(ErrorKind::DimensionMismatch, "one name per spectrum");
  CsvWriter csv({"system", "re", "im", "zeta", "freq_hz"});
  for (size_t s = 0; s < spectra.size(); ++s) {
    for (Eigen::Index k = 0; k < spectra[s].size(); ++k) {
      const Complex l = spectra[s](k);
      csv.row({names[s], number(l.real()), number(l.imag()), number(damping_ratio(l)), number(frequency_hz(l))});
    }
  }
  return csv.str();
}

std::string covariance_csv(const CovarianceSpectrum& spectrum) {
  CsvWriter csv({"index", "lambda", "cumfrac"});
  for (Eigen::Index k = 0; k < spectrum.lambda.size(); ++k) {
    csv.row(std::vector<double>{static_cast<double>(k + 1), spectrum.lambda(k), spectrum.cumulative_fraction(k)});
  }
  return csv.str();
}

std::string covariance_compare_csv(const std::vector<std::string>& names,
                                   const std::vector<CovarianceSpectrum>& spectra) {
  if (names.size() != spectra.size()) throw Error(ErrorKind::DimensionMismatch, "one name per covariance spectrum");
  std::vector<std::string> header{"index"};
  Eigen::Index rows = 0;
  for (size_t s = 0; s < names.size(); ++s) {
    header.push_back("lambda_" + names[s]);
    header.push_back("cumfrac_" + names[s]);
    rows = std::max(rows, spectra[s].lambda.size());
  }
  CsvWriter csv(header);
  for (Eigen::Index k = 0; k < rows; ++k) {
    std::vector<std::string> row{std::to_string(k + 1)};
    for (const auto& sp : spectra) {
      row.push_back(k < sp.lambda.size() ? number(sp.lambda(k)) : "");
      row.push_back(k < sp.lambda.size() ? number(sp.cumulative_fraction(k)) : "");
    }
    csv.row(row);
  }
  return csv.str();
}

std::string variance_contributions_csv(const VarianceReport& report) {
  CsvWriter csv({"generator", "angle_variance", "frequency_variance"});
  for (Eigen::Index g = 0; g < report.angle_contribution.size(); ++g) {
    csv.row(std::vector<double>{static_cast<double>(g + 1), report.angle_contribution(g),
                                report.frequency_contribution(g)});
  }
  return csv.str();
}

std::string trajectory_csv(const Trajectory& trajectory, const StateSpaceModel& model, const std::string& system) {
  std::vector<std::string> header;
  if (!system.empty()) header.push_back("system");
  header.push_back("t");
  for (int g = 0; g < model.N; ++g) header.push_back("theta_" + std::to_string(g + 1));
  std::vector<int> freq;
  for (int g = 0; g < model.N; ++g) {
    const int f = model.frequency_state(g);
    if (f >= 0) {
      header.push_back("omega_" + std::to_string(g + 1));
      freq.push_back(f);
    }
  }
  CsvWriter csv(header);
  for (size_t k = 0; k < trajectory.time.size(); ++k) {
    std::vector<std::string> row;
    if (!system.empty()) row.push_back(system);
    row.push_back(number(trajectory.time[k]));
    const auto x = trajectory.states.row(static_cast<Eigen::Index>(k));
    for (int g = 0; g < model.N; ++g) row.push_back(number(x(g)));
    for (int f : freq) row.push_back(number(x(f)));
    csv.row(row);
  }
  return csv.str();
}

std::string sweep_csv(const SweepTable& table) {
  CsvWriter csv({"gamma", "card", "J", "degradation_percent", "status", "J_admm", "card_increase"});
  const auto increases = table.card_increases();
  for (size_t k = 0; k < table.rows.size(); ++k) {
    const auto& r = table.rows[k];
    const bool flagged = std::find(increases.begin(), increases.end(), static_cast<int>(k)) != increases.end();
    csv.row({number(r.gamma), std::to_string(r.card), number(r.J), number(r.degradation_percent), r.status,
             number(r.J_admm), flagged ? "1" : "0"});
  }
  return csv.str();
}

std::string admm_report_csv(const AdmmReport& report) {
  CsvWriter csv({"round", "iteration", "primal", "dual", "J", "penalty", "rho"});
  for (const auto& it : report.history) {
    csv.row(std::vector<double>{static_cast<double>(it.round), static_cast<double>(it.iteration), it.primal_residual,
                                it.dual_residual, it.J, it.penalty, it.rho});
  }
  return csv.str();
}

std::string pattern_csv(const Matrix& K) {
  CsvWriter csv({"row", "col", "value"});
  const double tol = 1e-6 * (K.size() ? K.cwiseAbs().maxCoeff() : 0.0);
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      if (std::abs(K(i, j)) > tol) csv.row({std::to_string(i), std::to_string(j), number(K(i, j))});
    }
  }
  return csv.str();
}

std::string histogram_csv(const PerturbationStudy& study) {
  std::vector<std::string> header{"sample"};
  for (const auto& n : study.names) header.push_back("J_" + n);
  CsvWriter csv(header);
  for (Eigen::Index s = 0; s < study.J.rows(); ++s) {
    std::vector<double> row{static_cast<double>(s)};
    for (Eigen::Index c = 0; c < study.J.cols(); ++c) row.push_back(study.J(s, c));
    csv.row(row);
  }
  return csv.str();
}

std::string histogram_bins_csv(const PerturbationStudy& study, int bins) {
  if (bins < 1) throw Error(ErrorKind::Config, "histogram needs at least one bin");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Eigen::Index i = 0; i < study.J.size(); ++i) {
    const double v = study.J.data()[i];
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::string> header{"bin_lo", "bin_hi"};
  for (const auto& n : study.names) header.push_back("count_" + n);
  CsvWriter csv(header);
  if (!(hi >= lo)) return csv.str();
  // A zero-width range collapses to one bin.
  const int count = hi > lo ? bins : 1;
  const double width = hi > lo ? (hi - lo) / count : 0.0;
  std::vector<std::vector<int>> counts(static_cast<size_t>(count), std::vector<int>(study.names.size(), 0));
  for (Eigen::Index c = 0; c < study.J.cols(); ++c) {
    for (Eigen::Index s = 0; s < study.J.rows(); ++s) {
      const double v = study.J(s, c);
      if (std::isnan(v)) continue;
      int b = width > 0.0 ? static_cast<int>((v - lo) / width) : 0;
      b = std::clamp(b, 0, count - 1);
      ++counts[static_cast<size_t>(b)][static_cast<size_t>(c)];
    }
  }
  for (int b = 0; b < count; ++b) {
    std::vector<std::string> row{number(lo + b * width), number(b + 1 == count ? hi : lo + (b + 1) * width)};
    for (int n : counts[static_cast<size_t>(b)]) row.push_back(std::to_string(n));
    csv.row(row);
  }
  return csv.str();
}

std::string margin_csv(const MarginCurve& curve) {
  CsvWriter csv({"gamma", "margin_deg"});
  for (size_t k = 0; k < curve.gamma.size(); ++k) csv.row(std::vector<double>{curve.gamma[k], curve.margin_deg[k]});
  return csv.str();
}

std::string gain_json(const Matrix& K, int N, double gamma, const std::string& penalty) {
  json j;
  j["K"] = matrix_to_json(K);
  j["N"] = N;
  j["gamma"] = gamma;
  j["penalty"] = penalty;
  j["manifest"] = kManifestName;
  const double tol = 1e-6 * (K.size() ? K.cwiseAbs().maxCoeff() : 0.0);
  json pattern = json::array();
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    std::string bits;
    for (Eigen::Index c = 0; c < K.cols(); ++c) bits += std::abs(K(i, c)) > tol ? '1' : '0';
    pattern.push_back(bits);
  }
  j["pattern"] = pattern;
  return j.dump(1) + "\n";
}

GainFile load_gain(const std::filesystem::path& path) {
  const json j = parse_json(read_file(path));
  if (!j.is_object()) schema("gain file must be a JSON object");
  if (!j.contains("K") || !j.at("K").is_array() || j.at("K").empty() || !j.at("K")[0].is_array()) {
    schema("gain file needs a non-empty \"K\" matrix");
  }
  GainFile g;
  const auto rows = static_cast<Eigen::Index>(j.at("K").size());
  const auto cols = static_cast<Eigen::Index>(j.at("K")[0].size());
  g.K = matrix_at(j, "K", rows, cols);
  g.N = int_at(j, "N");
  if (j.contains("gamma")) g.gamma = number_at(j.at("gamma"), "gamma");
  if (j.contains("penalty") && j.at("penalty").is_string()) g.penalty = j.at("penalty").get<std::string>();
  return g;
}

std::string csv_json_mirror(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  json columns = json::array();
  json rows = json::array();
  auto split = [](const std::string& text) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(text);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!text.empty() && text.back() == ',') cells.emplace_back();
    return cells;
  };
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    if (header) {
      for (const auto& c : cells) columns.push_back(c);
      header = false;
      continue;
    }
    json row = json::array();
    for (const auto& c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (!c.empty() && res.ec == std::errc() && res.ptr == c.data() + c.size()) row.push_back(v);
      else if (c == "nan" || c == "inf" || c == "-inf") row.push_back(nullptr);
      else row.push_back(c);
    }
    rows.push_back(std::move(row));
  }
  json j{{"columns", columns}, {"rows", rows}, {"manifest", kManifestName}};
  return j.dump(1) + "\n";
}

std::string plot_metadata(const std::string& title, const std::string& x, const std::string& y,
                          const std::vector<std::string>& series, bool log_x, bool log_y) {
  json j;
  j["title"] = title;
  j["x"] = {{"column", x}, {"scale", log_x ? "log" : "linear"}};
  j["y"] = {{"label", y}, {"scale", log_y ? "log" : "linear"}};
  j["series"] = series;
  j["manifest"] = kManifestName;
  return j.dump(1) + "\n";
}

}  // namespace gridosc::reports
