#include "gridosc/cli/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "gridosc/io_analysis.hpp"
#include "gridosc/log.hpp"
#include "gridosc/parallel.hpp"
#include "gridosc/reports.hpp"
#include "gridosc/robustness.hpp"

namespace gridosc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kDampingLines[] = {0.05, 0.1};

struct Context {
  StateSpaceModel model;
  std::optional<SwingStudy> study;
  ReducedModel reduced;
};

Context load_context(const RunConfig& config) {
  if (config.model.has_value() == config.swing.has_value()) {
    throw Error(ErrorKind::Config, "exactly one of --model or --swing is required");
  }
  Context ctx;
  if (config.swing) {
    ctx.study = load_swing_study(*config.swing);
    ctx.model = ctx.study->build();
  } else {
    ctx.model = load_model(*config.model);
  }
  const PerformanceWeights weights = build_weights(ctx.model, config.r_scale);
  if (ctx.model.rotationally_symmetric()) {
    ctx.reduced = reduce(ctx.model, weights, build_transform(ctx.model.N, ctx.model.n()));
  } else {
    log::warn("model is not rotationally symmetric; working in absolute coordinates");
    ctx.reduced = reduce(ctx.model, weights, absolute_transform(ctx.model.N, ctx.model.n()));
  }
  return ctx;
}

// Collects outputs in config.out and finishes with the manifest.
class Output {
public:
  explicit Output(const RunConfig& config) : config_(config) {
    std::error_code ec;
    fs::create_directories(config.out, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + config.out.string());
  }

  void write(const std::string& name, const std::string& content) {
    reports::write_file(config_.out / name, content);
    files_.push_back(name);
  }

  // CSV plus its JSON mirror (same stem).
  void write_table(const std::string& name, const std::string& csv) {
    write(name, csv);
    write(fs::path(name).replace_extension(".json").string(), reports::csv_json_mirror(csv));
  }

  std::vector<std::string> finish() {
    std::vector<std::string> files = files_;
    files.push_back(reports::kManifestName);
    reports::write_file(config_.out / reports::kManifestName, manifest_json(config_, files));
    return files;
  }

private:
  const RunConfig& config_;
  std::vector<std::string> files_;
};

struct NamedGain {
  std::string name;
  FeedbackGain gain;
};

NamedGain load_named_gain(const fs::path& path, const Context& ctx) {
  const reports::GainFile file = reports::load_gain(path);
  if (file.K.rows() != ctx.model.m() || file.K.cols() != ctx.model.n() || file.N != ctx.model.N) {
    throw Error(ErrorKind::IncompatibleGain, path.string() + " is " + std::to_string(file.K.rows()) + "x" +
                                                 std::to_string(file.K.cols()) + " with N=" + std::to_string(file.N) +
                                                 ", model needs " + std::to_string(ctx.model.m()) + "x" +
                                                 std::to_string(ctx.model.n()) + " with N=" +
                                                 std::to_string(ctx.model.N));
  }
  return {path.stem().string(), FeedbackGain::from_physical(file.K, ctx.reduced.transform)};
}

std::vector<NamedGain> load_gains(const RunConfig& config, const Context& ctx) {
  std::vector<NamedGain> gains;
  for (const auto& p : config.gains) {
    NamedGain g = load_named_gain(p, ctx);
    std::string base = g.name;
    for (int k = 2; std::any_of(gains.begin(), gains.end(), [&](const NamedGain& o) { return o.name == g.name; });
         ++k) {
      g.name = base + "_" + std::to_string(k);
    }
    gains.push_back(std::move(g));
  }
  return gains;
}

PenaltySpec penalty_for(const RunConfig& config, const ReducedModel& reduced, double gamma) {
  return make_penalty(config.penalty, config.gamma_theta.value_or(gamma), config.gamma_r.value_or(gamma), reduced);
}

SweepOptions sweep_options(const RunConfig& config) {
  SweepOptions s;
  if (config.gamma_theta && config.gamma_r && *config.gamma_theta > 0.0) {
    s.gamma_r_ratio = *config.gamma_r / *config.gamma_theta;
  }
  s.warm_start = !config.cold_start;
  s.jobs = config.jobs;
  return s;
}

std::vector<double> resolved_grid(const RunConfig& config) {
  return gamma_grid(config.gamma_grid.min, config.gamma_grid.max, config.gamma_grid.count);
}

Matrix closed_loop_full(const StateSpaceModel& model, const Matrix& K) { return model.A - model.B2 * K; }

json summary_of(const PerturbationSummary& s) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"nominal", num(s.nominal)},
              {"mean", num(s.mean)},
              {"min", num(s.min)},
              {"max", num(s.max)},
              {"spread", num(s.spread)},
              {"max_degradation_percent", num(s.max_degradation_percent)},
              {"unstable", s.unstable}};
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

}  // namespace

GammaGrid parse_gamma_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 3) throw Error(ErrorKind::Config, "--gamma-grid expects MIN,MAX,COUNT");
  GammaGrid g;
  try {
    size_t used = 0;
    g.min = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("min");
    g.max = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("max");
    g.count = std::stoi(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("count");
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Config, "--gamma-grid expects MIN,MAX,COUNT, got '" + text + "'");
  }
  if (!(g.min > 0.0) || !(g.max >= g.min) || g.count < 1) {
    throw Error(ErrorKind::Config, "--gamma-grid needs 0 < MIN <= MAX and COUNT >= 1");
  }
  return g;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::Config:
    case ErrorKind::SchemaViolation:
    case ErrorKind::NonFiniteEntry:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::BadDimensions:
    case ErrorKind::InvalidLaplacian:
    case ErrorKind::MissingFrequencyState:
    case ErrorKind::IncompatibleGain:
      return 2;
    default:
      return 1;
  }
}

std::string error_slug(ErrorKind kind) {
  const std::string_view name = to_string(kind);
  std::string out;
  for (size_t i = 0; i < name.size(); ++i) {
    const char c = name[i];
    if (std::isupper(static_cast<unsigned char>(c))) {
      if (i > 0) out += '_';
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      out += c;
    }
  }
  return out;
}

std::string error_json(ErrorKind kind, const std::string& message) {
  json j{{"error", {{"kind", error_slug(kind)}, {"message", message}}}, {"exit_code", exit_code_for(kind)}};
  return j.dump() + "\n";
}

std::string manifest_json(const RunConfig& c, const std::vector<std::string>& outputs) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  auto opt_path = [](const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); };
  json gains = json::array();
  for (const auto& g : c.gains) gains.push_back(g.string());
  json j;
  j["tool"] = "gridosc";
  j["subcommand"] = c.subcommand;
  j["model"] = opt_path(c.model);
  j["swing"] = opt_path(c.swing);
  j["penalty"] = to_string(c.penalty);
  j["gamma"] = opt(c.gamma);
  j["gamma_grid"] = {{"min", c.gamma_grid.min}, {"max", c.gamma_grid.max}, {"count", c.gamma_grid.count},
                     {"spacing", "log"}};
  j["gamma_theta"] = opt(c.gamma_theta);
  j["gamma_r"] = opt(c.gamma_r);
  j["solver"] = {{"rho", c.admm.rho},
                 {"adaptive_rho", c.admm.adaptive_rho},
                 {"eps_abs", c.admm.eps_abs},
                 {"eps_rel", c.admm.eps_rel},
                 {"max_iter", c.admm.max_iter},
                 {"reweight_rounds", c.admm.reweight_rounds},
                 {"reweight_eps_scale", c.admm.reweight_eps_scale},
                 {"inner_tol", c.admm.inner_tol},
                 {"inner_max_iter", c.admm.inner_max_iter},
                 {"polish_tol", c.admm.polish_tol},
                 {"polish_max_iter", c.admm.polish_max_iter}};
  j["out"] = c.out.string();
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["r_scale"] = c.r_scale;
  j["gains"] = gains;
  j["robustness"] = {{"magnitude", c.magnitude}, {"samples", c.samples}, {"bins", c.bins}};
  j["analysis"] = {{"zeta_max", c.zeta_max}, {"top_k", c.top_k}};
  j["simulation"] = {{"mode", c.mode}, {"horizon", c.horizon}, {"dt", c.dt}};
  j["cold_start"] = c.cold_start;
  j["phase_margin"] = "2 asin(min(alpha,2)/2), alpha = min_w sigma_min(I + F (jwI - A)^-1 B2) at the plant input";
  j["outputs"] = outputs;
  return dump(j);
}

std::vector<std::string> cmd_analyze(const RunConfig& config) {
  const Context ctx = load_context(config);
  Output out(config);
  const int N = ctx.model.N;
  const ModalTable table = modal_table(ctx.model.A, N, config.zeta_max);
  out.write_table("modal_table.csv", reports::modal_csv(table, ctx.model.labels));

  const Matrix F0 = Matrix::Zero(ctx.reduced.m(), ctx.reduced.n());
  const PsdCurve curve = psd(closed_loop_system(ctx.reduced, F0), default_frequency_grid(), resolve_jobs(config.jobs));
  out.write_table("psd.csv", reports::psd_csv(curve));
  out.write("psd.meta.json",
            reports::plot_metadata("Open-loop power spectral density", "omega", "psd", {"psd"}, true, true));

  const VarianceReport variance = h2_report(ctx.reduced, F0);
  const CovarianceSpectrum spectrum = covariance_spectrum(variance, config.top_k);
  out.write_table("covariance_spectrum.csv", reports::covariance_csv(spectrum));
  out.write_table("variance_contributions.csv", reports::variance_contributions_csv(variance));

  json summary;
  summary["J_open"] = variance.J;
  const PsdPeak dom = curve.dominant();
  summary["psd_dominant_peak"] = {{"omega", dom.omega}, {"value", dom.value}};
  summary["top3_fraction"] = spectrum.cumulative_fraction.size() > 0
                                 ? spectrum.cumulative_fraction(std::min<Eigen::Index>(2, spectrum.lambda.size() - 1))
                                 : 0.0;
  summary["oscillatory_modes"] = table.modes.size();
  summary["symmetric"] = !ctx.reduced.transform.absolute;
  out.write("analysis_summary.json", dump(summary));
  return out.finish();
}

std::vector<std::string> cmd_design(const RunConfig& config) {
  const Context ctx = load_context(config);
  Output out(config);
  const double gamma = config.gamma.value_or(0.0);
  const DesignResult d = design(ctx.reduced, penalty_for(config, ctx.reduced, gamma), config.admm);
  const std::string pen = to_string(config.penalty);
  out.write("gain.json", reports::gain_json(d.polished.K, ctx.model.N, gamma, pen));
  out.write("gain_centralized.json", reports::gain_json(d.centralized.K, ctx.model.N, 0.0, "none"));
  out.write("pattern.csv", reports::pattern_csv(d.polished.K));
  out.write("admm_report.csv", reports::admm_report_csv(d.admm_result.report));
  json summary{{"gamma", gamma},
               {"penalty", pen},
               {"card", d.polished.card},
               {"card_admm", d.admm.card},
               {"J_centralized", d.J_centralized},
               {"J_admm", d.J_admm},
               {"J_polished", d.J_polished},
               {"degradation_percent", d.degradation_percent},
               {"status", to_string(d.admm_result.report.status)},
               {"iterations", d.admm_result.report.history.size()},
               {"card_per_round", d.admm_result.report.card_per_round}};
  out.write("design_summary.json", dump(summary));
  return out.finish();
}

std::vector<std::string> cmd_sweep(const RunConfig& config) {
  const Context ctx = load_context(config);
  Output out(config);
  const SweepTable table =
      gamma_sweep(ctx.reduced, config.penalty, resolved_grid(config), config.admm, sweep_options(config));
  out.write_table("sweep.csv", reports::sweep_csv(table));
  out.write("sweep.meta.json", reports::plot_metadata("Performance vs sparsity", "gamma", "degradation_percent",
                                                      {"degradation_percent", "card"}, true, false));
  for (size_t k = 0; k < table.rows.size(); ++k) {
    const auto& row = table.rows[k];
    if (row.gain.K.size() == 0) continue;
    char name[32];
    std::snprintf(name, sizeof(name), "gains/gamma_%03zu.json", k);
    out.write(name, reports::gain_json(row.gain.K, ctx.model.N, row.gamma, to_string(config.penalty)));
  }
  for (int idx : table.card_increases()) {
    log::warn("card(K) increased at gamma=" + reports::number(table.rows[static_cast<size_t>(idx)].gamma) +
              " (local minimum)");
  }
  return out.finish();
}

std::vector<std::string> cmd_compare(const RunConfig& config) {
  const Context ctx = load_context(config);
  Output out(config);
  std::vector<NamedGain> gains = load_gains(config, ctx);
  if (gains.empty()) gains.push_back({"centralized", centralized_h2(ctx.reduced)});

  std::vector<std::string> names{"open"};
  std::vector<Matrix> full{ctx.model.A};
  std::vector<Matrix> reduced_F{Matrix::Zero(ctx.reduced.m(), ctx.reduced.n())};
  for (const auto& g : gains) {
    names.push_back(g.name);
    full.push_back(closed_loop_full(ctx.model, g.gain.K));
    reduced_F.push_back(g.gain.F);
  }

  std::vector<CVector> spectra;
  std::vector<PsdCurve> curves;
  std::vector<CovarianceSpectrum> cov;
  json summary = json::object();
  const ModalTable open_modes = modal_table(ctx.model.A, ctx.model.N, 1.0);
  if (open_modes.modes.empty()) throw Error(ErrorKind::Config, "open loop has no oscillatory mode to start from");
  const size_t mode = std::min<size_t>(static_cast<size_t>(std::max(config.mode, 0)), open_modes.modes.size() - 1);
  const Vector x0 = modal_initial_condition(open_modes.modes[mode]);

  std::string trajectories;
  for (size_t s = 0; s < names.size(); ++s) {
    spectra.push_back(eigenvalues(full[s]));
    const PsdCurve c =
        psd(closed_loop_system(ctx.reduced, reduced_F[s]), default_frequency_grid(), resolve_jobs(config.jobs));
    curves.push_back(c);
    const VarianceReport v = h2_report(ctx.reduced, reduced_F[s]);
    cov.push_back(covariance_spectrum(v, config.top_k));
    const Trajectory traj = simulate(full[s], x0, config.horizon, config.dt);
    std::string csv = reports::trajectory_csv(traj, ctx.model, names[s]);
    if (s > 0) csv = csv.substr(csv.find('\n', csv.find('\n') + 1) + 1);  // keep one manifest line and header
    trajectories += csv;

    double min_zeta = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < spectra.back().size(); ++k) {
      if (spectra.back()(k).imag() > 1e-9) min_zeta = std::min(min_zeta, damping_ratio(spectra.back()(k)));
    }
    summary[names[s]] = {{"J", v.J},
                         {"min_zeta", std::isfinite(min_zeta) ? json(min_zeta) : json(nullptr)},
                         {"settling_time", settling_time(traj, ctx.model.N)}};
  }
  out.write_table("spectra.csv", reports::spectra_csv(names, spectra));
  json meta = json::parse(reports::plot_metadata("Closed-loop spectra", "re", "im", names, false, false));
  meta["damping_lines"] = std::vector<double>(std::begin(kDampingLines), std::end(kDampingLines));
  out.write("spectra.meta.json", dump(meta));
  out.write_table("psd_compare.csv", reports::psd_compare_csv(names, curves));
  out.write_table("covariance_compare.csv", reports::covariance_compare_csv(names, cov));
  out.write("simulate.csv", trajectories);
  summary["initial_mode"] = {{"re", open_modes.modes[mode].eigenvalue.real()},
                             {"im", open_modes.modes[mode].eigenvalue.imag()}};
  out.write("compare_summary.json", dump(summary));
  return out.finish();
}

std::vector<std::string> cmd_robustness(const RunConfig& config) {
  if (!config.swing) throw Error(ErrorKind::Config, "robustness needs --swing (the coupling matrix is perturbed)");
  const Context ctx = load_context(config);
  Output out(config);
  std::vector<NamedGain> gains = load_gains(config, ctx);
  if (gains.empty()) {
    gains.push_back({"centralized", centralized_h2(ctx.reduced)});
    const PolishResult dec = polish(decentralized_mask(ctx.reduced), ctx.reduced, gains.front().gain.F, config.admm);
    gains.push_back({"decentralized", dec.gain});
  }
  std::vector<Matrix> K;
  std::vector<std::string> names;
  for (const auto& g : gains) {
    K.push_back(g.gain.K);
    names.push_back(g.name);
  }
  const PerturbationStudy study = perturb_and_score(*ctx.study, K, names, config.magnitude, config.samples,
                                                    config.seed, resolve_jobs(config.jobs), config.r_scale);
  out.write_table("histogram.csv", reports::histogram_csv(study));
  out.write("histogram_bins.csv", reports::histogram_bins_csv(study, config.bins));
  json summary = json::object();
  for (size_t c = 0; c < study.names.size(); ++c) {
    summary[study.names[c]] = summary_of(study.summaries[c]);
    summary[study.names[c]]["unstable_samples"] = study.unstable[c];
  }
  summary["magnitude"] = study.magnitude;
  summary["samples"] = study.samples;
  summary["seed"] = study.seed;
  out.write("histogram_summary.json", dump(summary));

  const SweepTable table =
      gamma_sweep(ctx.reduced, config.penalty, resolved_grid(config), config.admm, sweep_options(config));
  out.write_table("margins.csv", reports::margin_csv(margin_curve(ctx.reduced, table)));
  out.write("margins.meta.json",
            reports::plot_metadata("Multivariable phase margin", "gamma", "margin_deg", {"margin_deg"}, true, false));
  return out.finish();
}

std::vector<std::string> cmd_simulate(const RunConfig& config) {
  const Context ctx = load_context(config);
  Output out(config);
  const ModalTable modes = modal_table(ctx.model.A, ctx.model.N, 1.0);
  if (modes.modes.empty()) throw Error(ErrorKind::Config, "open loop has no oscillatory mode to start from");
  if (config.mode < 0 || config.mode >= static_cast<int>(modes.modes.size())) {
    throw Error(ErrorKind::Config, "--mode must index one of the " + std::to_string(modes.modes.size()) +
                                       " oscillatory open-loop modes");
  }
  const Vector x0 = modal_initial_condition(modes.modes[static_cast<size_t>(config.mode)]);
  const std::vector<NamedGain> gains = load_gains(config, ctx);
  const Trajectory open = simulate(ctx.model.A, x0, config.horizon, config.dt);
  json summary{{"open", {{"settling_time", settling_time(open, ctx.model.N)}}}};
  out.write("trajectory.csv", reports::trajectory_csv(open, ctx.model));
  for (const auto& g : gains) {
    const Trajectory closed = simulate(closed_loop_full(ctx.model, g.gain.K), x0, config.horizon, config.dt);
    out.write("trajectory_" + g.name + ".csv", reports::trajectory_csv(closed, ctx.model));
    summary[g.name] = {{"settling_time", settling_time(closed, ctx.model.N)}};
  }
  out.write("simulate_summary.json", dump(summary));
  return out.finish();
}

int run(const RunConfig& config) {
  try {
    if (config.subcommand == "analyze") cmd_analyze(config);
    else if (config.subcommand == "design") cmd_design(config);
    else if (config.subcommand == "sweep") cmd_sweep(config);
    else if (config.subcommand == "compare") cmd_compare(config);
    else if (config.subcommand == "robustness") cmd_robustness(config);
    else if (config.subcommand == "simulate") cmd_simulate(config);
    else throw Error(ErrorKind::Config, "unknown subcommand '" + config.subcommand + "'");
    std::error_code ec;
    fs::remove(config.out / "error.json", ec);  // stale from an earlier failed run
    return 0;
  } catch (const Error& e) {
    const std::string text = error_json(e.kind(), e.what());
    std::cerr << text;
    std::error_code ec;
    if (fs::is_directory(config.out, ec)) {
      try {
        reports::write_file(config.out / "error.json", text);
      } catch (const Error&) {
      }
    }
    return exit_code_for(e.kind());
  }
}

}  // namespace gridosc::cli
