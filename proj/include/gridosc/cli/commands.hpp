#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridosc/error.hpp"
#include "gridosc/sparse_lqr.hpp"

namespace gridosc::cli {

struct GammaGrid {
  double min = 1e-4;
  double max = 0.25;
  int count = 50;
};

/// Parses "MIN,MAX,COUNT"; throws Error{Config}.
GammaGrid parse_gamma_grid(const std::string& text);

struct RunConfig {
  std::string subcommand;
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> swing;
  PenaltyKind penalty = PenaltyKind::Elementwise;
  std::optional<double> gamma;
  GammaGrid gamma_grid;
  std::optional<double> gamma_theta;
  std::optional<double> gamma_r;
  AdmmOptions admm;
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;
  int jobs = 0;  // 0: available parallelism
  double r_scale = 1.0;

  std::vector<std::filesystem::path> gains;  // compare / robustness / simulate
  double magnitude = 0.2;
  int samples = 200;
  int bins = 20;
  double zeta_max = 1.0;  // modal table cut
  int top_k = 10;
  int mode = 0;           // modal initial condition: index into the open-loop modal table
  double horizon = 20.0;
  double dt = 0.01;
  bool cold_start = false;
};

/// Exit codes: 0 success, 1 numerical failure, 2 I/O or configuration error.
int exit_code_for(ErrorKind kind);
/// snake_case name used in error JSON ("io", "not_hurwitz", ...).
std::string error_slug(ErrorKind kind);
std::string error_json(ErrorKind kind, const std::string& message);

// Each command writes its files plus manifest.json into config.out and returns
// the file names it wrote (relative to config.out).
std::vector<std::string> cmd_analyze(const RunConfig& config);
std::vector<std::string> cmd_design(const RunConfig& config);
std::vector<std::string> cmd_sweep(const RunConfig& config);
std::vector<std::string> cmd_compare(const RunConfig& config);
std::vector<std::string> cmd_robustness(const RunConfig& config);
std::vector<std::string> cmd_simulate(const RunConfig& config);

/// Dispatches on config.subcommand, converting errors into an exit code and an
/// error JSON on stderr (also written to config.out/error.json when possible).
int run(const RunConfig& config);

/// Manifest text echoing the resolved configuration and the output list.
std::string manifest_json(const RunConfig& config, const std::vector<std::string>& outputs);

}  // namespace gridosc::cli
