// gridosc: input-output analysis and sparse wide-area control design for swing-equation grid models.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gridosc/cli/commands.hpp"

namespace {

using gridosc::cli::RunConfig;

struct RawFlags {
  std::string model;
  std::string swing;
  std::string penalty = "elementwise";
  std::string gamma_grid;
  std::string out = "out";
};

void add_common(CLI::App* sub, RunConfig& cfg, RawFlags& raw, std::optional<double>& gamma,
                std::optional<double>& gamma_theta, std::optional<double>& gamma_r) {
  sub->add_option("--model", raw.model, "State-space model JSON");
  sub->add_option("--swing", raw.swing, "Swing-network JSON");
  sub->add_option("--out", raw.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  sub->add_option("--jobs", cfg.jobs, "Worker threads (0 = available parallelism)")->capture_default_str();
  sub->add_option("--r-scale", cfg.r_scale, "Control weight R = r I")->capture_default_str();
  sub->add_option("--penalty", raw.penalty, "elementwise | block-gr1 | block-gr2 | block-gr3")
      ->check(CLI::IsMember({"elementwise", "block-gr1", "block-gr2", "block-gr3"}))
      ->capture_default_str();
  sub->add_option("--gamma", gamma, "Sparsity emphasis");
  sub->add_option("--gamma-grid", raw.gamma_grid, "MIN,MAX,COUNT (log-spaced; default 1e-4,0.25,50)");
  sub->add_option("--gamma-theta", gamma_theta, "Angle-block gamma");
  sub->add_option("--gamma-r", gamma_r, "Non-angle-block gamma");
  sub->add_option("--rho", cfg.admm.rho, "Initial ADMM penalty parameter")->capture_default_str();
  sub->add_option("--eps-abs", cfg.admm.eps_abs, "ADMM absolute tolerance")->capture_default_str();
  sub->add_option("--eps-rel", cfg.admm.eps_rel, "ADMM relative tolerance")->capture_default_str();
  sub->add_option("--reweight-rounds", cfg.admm.reweight_rounds, "Reweighting rounds")->capture_default_str();
  sub->add_option("--max-iter", cfg.admm.max_iter, "ADMM iteration cap per round")->capture_default_str();
  sub->add_flag("--cold-start", cfg.cold_start, "Solve sweep points independently (parallel)");
  sub->add_option("--gain", cfg.gains, "Gain JSON (repeatable)");
  sub->add_option("--magnitude", cfg.magnitude, "Coupling perturbation fraction")->capture_default_str();
  sub->add_option("--samples", cfg.samples, "Monte Carlo samples")->capture_default_str();
  sub->add_option("--bins", cfg.bins, "Histogram bins")->capture_default_str();
  sub->add_option("--zeta-max", cfg.zeta_max, "Modal table damping cut")->capture_default_str();
  sub->add_option("--top-k", cfg.top_k, "Covariance modes to report")->capture_default_str();
  sub->add_option("--mode", cfg.mode, "Open-loop mode index for initial conditions")->capture_default_str();
  sub->add_option("--horizon", cfg.horizon, "Simulation horizon (s)")->capture_default_str();
  sub->add_option("--dt", cfg.dt, "Simulation step (s)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Input-output analysis and sparse wide-area control of power-grid swing models"};
  app.require_subcommand(1);
  RunConfig cfg;
  RawFlags raw;
  std::optional<double> gamma, gamma_theta, gamma_r;
  const char* names[] = {"analyze", "design", "sweep", "compare", "robustness", "simulate"};
  const char* help[] = {"Modal table, PSD, covariance spectrum of the open loop",
                        "Sparse controller at one gamma (ADMM + polishing)",
                        "Performance-vs-sparsity sweep over a gamma grid",
                        "Open loop vs gains: spectra, PSD, covariance, trajectories",
                        "Coupling-perturbation Monte Carlo and phase margins vs gamma",
                        "Trajectories from a modal initial condition"};
  for (int k = 0; k < 6; ++k) add_common(app.add_subcommand(names[k], help[k]), cfg, raw, gamma, gamma_theta, gamma_r);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << gridosc::cli::error_json(gridosc::ErrorKind::Config, e.what());
    return 2;
  }

  try {
    cfg.subcommand = app.get_subcommands().front()->get_name();
    if (!raw.model.empty()) cfg.model = raw.model;
    if (!raw.swing.empty()) cfg.swing = raw.swing;
    cfg.out = raw.out;
    cfg.penalty = gridosc::penalty_kind_from_string(raw.penalty);
    cfg.gamma = gamma;
    cfg.gamma_theta = gamma_theta;
    cfg.gamma_r = gamma_r;
    if (!raw.gamma_grid.empty()) cfg.gamma_grid = gridosc::cli::parse_gamma_grid(raw.gamma_grid);
  } catch (const gridosc::Error& e) {
    std::cerr << gridosc::cli::error_json(e.kind(), e.what());
    return gridosc::cli::exit_code_for(e.kind());
  }
  return gridosc::cli::run(cfg);
}
