#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridosc/lti_core.hpp"

namespace gridosc {

// Linearized swing-equation network: M_i th_i'' + D_i th_i' + sum_j L_ij (th_i - th_j) = 0.
struct SwingNetwork {
  Vector inertia;  // M_i > 0
  Vector damping;  // D_i >= 0
  Matrix laplacian;  // symmetric, zero row sums, nonpositive off-diagonals

  int generators() const { return static_cast<int>(inertia.size()); }

  struct Edge {
    int i = 0;
    int j = 0;
    double susceptance = 0.0;
  };
  static SwingNetwork from_edges(Vector inertia, Vector damping, const std::vector<Edge>& edges);

  /// Throws InvalidLaplacian / BadDimensions when an invariant fails.
  void validate() const;
};

// Local stabilizer k * Tw s/(1+Tw s) * (1+Tn1 s)/(1+Td1 s) * (1+Tn2 s)/(1+Td2 s) on a generator frequency.
struct PssParameters {
  double gain = 3.0;
  double washout = 5.0;
  double lead1 = 0.1;
  double lead2 = 0.1;
  double lag1 = 0.01;
  double lag2 = 0.01;

  void validate() const;
};

// Cascade realization (washout, two lead-lag sections) of one stabilizer, input th_i', output y.
struct PssRealization {
  Matrix A;  // 3x3
  Matrix B;  // 3x1
  Matrix C;  // 1x3
  double D = 0.0;
};
PssRealization pss_realization(const PssParameters& params);

// Full-coordinate model x = [theta; r], dx/dt = A x + B1 d + B2 u.
struct StateSpaceModel {
  Matrix A;
  Matrix B1;
  Matrix B2;
  int N = 0;  // angle count; angles are states 0..N-1
  // Per generator, indices into r (state index minus N) of its non-angle states.
  // The first entry of each list is the generator's frequency state.
  std::vector<std::vector<int>> generator_state_map;
  // Generator driven by each control input, or -1 when the input is not local to one.
  std::vector<int> input_generator;
  // Per-generator inertia, used for the kinetic-energy weight. May be empty for imported models.
  Vector inertia;
  std::vector<std::string> labels;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B2.cols()); }
  int p() const { return static_cast<int>(B1.cols()); }

  /// Absolute state index of generator g's frequency, or -1 if it has none.
  int frequency_state(int g) const;

  /// ||A [1;0]|| / max(||A||, 1): zero for rotationally symmetric models.
  double symmetry_residual() const;
  bool rotationally_symmetric() const;

  /// Shape and content checks; throws DimensionMismatch / NonFiniteEntry / SchemaViolation.
  void validate() const;
};

struct SwingInputs {
  // Generators receiving a control input, one input each (default: every generator).
  std::optional<std::vector<int>> actuated;
  // Generators receiving a disturbance channel (default: same as actuated, i.e. B1 = B2).
  std::optional<std::vector<int>> disturbed;
};

StateSpaceModel build_swing_model(const SwingNetwork& net, const SwingInputs& inputs = {});

/// Appends a 3-state stabilizer per equipped generator (nullopt = not equipped).
StateSpaceModel embed_pss(const StateSpaceModel& model, const std::vector<std::optional<PssParameters>>& pss);

// Q = blockdiag(Q_theta, 1/2 diag(M) on frequency states, 0 elsewhere), R = r I.
struct PerformanceWeights {
  Matrix Q_theta;
  Matrix Q;
  Matrix R;
  Matrix Qsqrt;
  Matrix Rsqrt;
};

PerformanceWeights build_weights(const StateSpaceModel& model, double R_scale = 1.0);

/// I - (1/N) 1 1^T.
Matrix angle_deviation_weight(int N);

// A swing-network study as stored in the swing JSON file.
struct SwingStudy {
  SwingNetwork network;
  std::vector<std::optional<PssParameters>> pss;  // empty or one slot per generator
  SwingInputs inputs;

  StateSpaceModel build() const;
  /// Same study with a different coupling matrix (used by perturbation studies).
  StateSpaceModel build_with(const Matrix& laplacian) const;
};

StateSpaceModel load_model(const std::filesystem::path& path);
void save_model(const StateSpaceModel& model, const std::filesystem::path& path);
std::string model_to_json(const StateSpaceModel& model);
StateSpaceModel model_from_json(const std::string& text);

SwingStudy load_swing_study(const std::filesystem::path& path);
SwingStudy swing_study_from_json(const std::string& text);

}  // namespace gridosc
