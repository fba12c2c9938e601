#include "gridosc/grid_model.hpp"

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "gridosc/error.hpp"
#include "gridosc/log.hpp"
#include "json_support.hpp"

namespace gridosc {

using nlohmann::json;

using namespace json_support;

namespace {

constexpr double kSymmetryTol = 1e-10;

std::vector<int> all_generators(int N) {
  std::vector<int> out(static_cast<size_t>(N));
  for (int g = 0; g < N; ++g) out[static_cast<size_t>(g)] = g;
  return out;
}

Matrix generator_input_matrix(const SwingNetwork& net, const std::vector<int>& gens) {
  const int N = net.generators();
  Matrix B = Matrix::Zero(2 * N, static_cast<Eigen::Index>(gens.size()));
  for (size_t k = 0; k < gens.size(); ++k) {
    const int g = gens[k];
    if (g < 0 || g >= N) {
      throw Error(ErrorKind::BadDimensions, "input generator index " + std::to_string(g) + " out of range");
    }
    B(N + g, static_cast<Eigen::Index>(k)) = 1.0 / net.inertia(g);
  }
  return B;
}

PssParameters pss_from_json(const json& obj, const PssParameters& base) {
  PssParameters p = base;
  auto read = [&](const char* key, double& field) {
    if (obj.contains(key)) field = number_at(obj.at(key), std::string("pss.") + key);
  };
  read("k", p.gain);
  read("Tw", p.washout);
  read("Tn1", p.lead1);
  read("Tn2", p.lead2);
  read("Td1", p.lag1);
  read("Td2", p.lag2);
  p.validate();
  return p;
}

std::vector<int> index_list(const json& v, const std::string& where) {
  if (!v.is_array()) schema(where + " must be an array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) schema(where + " must contain integers");
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace

// ---- SwingNetwork -----------------------------------------------------------

SwingNetwork SwingNetwork::from_edges(Vector inertia, Vector damping, const std::vector<Edge>& edges) {
  SwingNetwork net;
  const auto N = inertia.size();
  net.inertia = std::move(inertia);
  net.damping = std::move(damping);
  net.laplacian = Matrix::Zero(N, N);
  for (const auto& e : edges) {
    if (e.i < 0 || e.j < 0 || e.i >= N || e.j >= N || e.i == e.j) {
      throw Error(ErrorKind::InvalidLaplacian, "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ") is invalid");
    }
    if (!(e.susceptance >= 0.0) || !std::isfinite(e.susceptance)) {
      throw Error(ErrorKind::InvalidLaplacian, "edge susceptance must be finite and nonnegative");
    }
    net.laplacian(e.i, e.j) -= e.susceptance;
    net.laplacian(e.j, e.i) -= e.susceptance;
    net.laplacian(e.i, e.i) += e.susceptance;
    net.laplacian(e.j, e.j) += e.susceptance;
  }
  net.validate();
  return net;
}

void SwingNetwork::validate() const {
  const auto N = inertia.size();
  if (N < 1 || damping.size() != N || laplacian.rows() != N || laplacian.cols() != N) {
    throw Error(ErrorKind::BadDimensions, "swing network needs matching inertia, damping and Laplacian sizes");
  }
  require_finite(laplacian, "Laplacian");
  if (!inertia.allFinite() || !damping.allFinite()) {
    throw Error(ErrorKind::NonFiniteEntry, "inertia and damping must be finite");
  }
  if ((inertia.array() <= 0.0).any()) throw Error(ErrorKind::BadDimensions, "inertia must be positive");
  if ((damping.array() < 0.0).any()) throw Error(ErrorKind::BadDimensions, "damping must be nonnegative");
  const double scale = std::max(1.0, laplacian.cwiseAbs().maxCoeff());
  if ((laplacian - laplacian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::InvalidLaplacian, "Laplacian is not symmetric");
  }
  if (laplacian.rowwise().sum().cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::InvalidLaplacian, "Laplacian rows do not sum to zero");
  }
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) {
      if (i != j && laplacian(i, j) > 0.0) {
        throw Error(ErrorKind::InvalidLaplacian, "Laplacian has a positive off-diagonal entry");
      }
    }
  }
}

// ---- PSS --------------------------------------------------------------------

void PssParameters::validate() const {
  for (double t : {washout, lead1, lead2, lag1, lag2}) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw Error(ErrorKind::BadDimensions, "stabilizer time constants must be positive");
    }
  }
  if (!std::isfinite(gain)) throw Error(ErrorKind::NonFiniteEntry, "stabilizer gain is not finite");
}

PssRealization pss_realization(const PssParameters& p) {
  p.validate();
  // Cascade of first-order sections, each state on the scale of its input:
  //   washout   x1' = (u - x1)/Tw,    y1 = u - x1
  //   lead-lag  x2' = (y1 - x2)/Td1,  y2 = a1 y1 + (1 - a1) x2,  a1 = Tn1/Td1
  //   lead-lag  x3' = (y2 - x3)/Td2,  y3 = a2 y2 + (1 - a2) x3,  a2 = Tn2/Td2
  //   y = k y3.
  // A companion form of the same transfer function has state scales spread by
  // ~1e10, which cripples gain synthesis on the embedded model.
  const double a1 = p.lead1 / p.lag1;
  const double a2 = p.lead2 / p.lag2;
  PssRealization r;
  r.A = Matrix::Zero(3, 3);
  r.A(0, 0) = -1.0 / p.washout;
  r.A(1, 0) = -1.0 / p.lag1;
  r.A(1, 1) = -1.0 / p.lag1;
  r.A(2, 0) = -a1 / p.lag2;
  r.A(2, 1) = (1.0 - a1) / p.lag2;
  r.A(2, 2) = -1.0 / p.lag2;
  r.B = Matrix(3, 1);
  r.B << 1.0 / p.washout, 1.0 / p.lag1, a1 / p.lag2;
  r.C = Matrix(1, 3);
  r.C << -p.gain * a1 * a2, p.gain * a2 * (1.0 - a1), p.gain * (1.0 - a2);
  r.D = p.gain * a1 * a2;
  return r;
}

// ---- StateSpaceModel --------------------------------------------------------

int StateSpaceModel::frequency_state(int g) const {
  if (g < 0 || g >= static_cast<int>(generator_state_map.size())) return -1;
  const auto& states = generator_state_map[static_cast<size_t>(g)];
  if (states.empty()) return -1;
  return N + states.front();
}

double StateSpaceModel::symmetry_residual() const {
  if (N <= 0 || N > A.cols()) return 0.0;
  const double residual = A.leftCols(N).rowwise().sum().norm();
  return residual / std::max(A.norm(), 1.0);
}

bool StateSpaceModel::rotationally_symmetric() const {
  return symmetry_residual() <= kSymmetryTol;
}

void StateSpaceModel::validate() const {
  require_square(A, "A");
  require_finite(A, "A");
  require_finite(B1, "B1");
  require_finite(B2, "B2");
  if (B1.rows() != A.rows() || B2.rows() != A.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "B1/B2 row count must equal the state dimension");
  }
  if (B1.cols() < 1 || B2.cols() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "B1 and B2 need at least one column");
  }
  if (N < 1 || N > n()) throw Error(ErrorKind::BadDimensions, "angle count N must lie in [1, n]");
  const int nr = n() - N;
  for (const auto& states : generator_state_map) {
    for (int s : states) {
      if (s < 0 || s >= nr) throw Error(ErrorKind::SchemaViolation, "generator_state_map index out of range");
    }
  }
  if (!input_generator.empty() && static_cast<int>(input_generator.size()) != m()) {
    throw Error(ErrorKind::SchemaViolation, "input_generator must have one entry per input");
  }
  for (int g : input_generator) {
    if (g < -1 || g >= N) throw Error(ErrorKind::SchemaViolation, "input_generator index out of range");
  }
  if (inertia.size() != 0) {
    if (inertia.size() != N) throw Error(ErrorKind::SchemaViolation, "inertia must have N entries");
    if (!inertia.allFinite()) throw Error(ErrorKind::NonFiniteEntry, "inertia is not finite");
    if ((inertia.array() <= 0.0).any()) throw Error(ErrorKind::SchemaViolation, "inertia must be positive");
  }
  if (!labels.empty() && static_cast<int>(labels.size()) != n()) {
    throw Error(ErrorKind::SchemaViolation, "labels must have n entries");
  }
}

StateSpaceModel build_swing_model(const SwingNetwork& net, const SwingInputs& inputs) {
  net.validate();
  const int N = net.generators();
  const std::vector<int> actuated = inputs.actuated.value_or(all_generators(N));
  const std::vector<int> disturbed = inputs.disturbed.value_or(actuated);
  if (actuated.empty() || disturbed.empty()) {
    throw Error(ErrorKind::BadDimensions, "swing model needs at least one input and one disturbance");
  }

  const Vector inv_m = net.inertia.cwiseInverse();
  StateSpaceModel model;
  model.N = N;
  model.A = Matrix::Zero(2 * N, 2 * N);
  model.A.topRightCorner(N, N).setIdentity();
  model.A.bottomLeftCorner(N, N) = -(inv_m.asDiagonal() * net.laplacian);
  model.A.bottomRightCorner(N, N) = -(inv_m.cwiseProduct(net.damping)).asDiagonal().toDenseMatrix();
  model.B2 = generator_input_matrix(net, actuated);
  model.B1 = generator_input_matrix(net, disturbed);
  model.generator_state_map.resize(static_cast<size_t>(N));
  for (int g = 0; g < N; ++g) model.generator_state_map[static_cast<size_t>(g)] = {g};
  model.input_generator = actuated;
  model.inertia = net.inertia;
  for (int g = 0; g < N; ++g) model.labels.push_back("theta_" + std::to_string(g + 1));
  for (int g = 0; g < N; ++g) model.labels.push_back("omega_" + std::to_string(g + 1));
  return model;
}

StateSpaceModel embed_pss(const StateSpaceModel& model, const std::vector<std::optional<PssParameters>>& pss) {
  model.validate();
  if (static_cast<int>(pss.size()) > model.N) {
    throw Error(ErrorKind::BadDimensions, "more stabilizer slots than generators");
  }
  StateSpaceModel out = model;
  for (size_t g = 0; g < pss.size(); ++g) {
    if (!pss[g]) continue;
    const int gi = static_cast<int>(g);
    const int f = out.frequency_state(gi);
    if (f < 0) {
      throw Error(ErrorKind::MissingFrequencyState, "generator " + std::to_string(gi + 1) + " has no frequency state");
    }
    const PssRealization r = pss_realization(*pss[g]);
    const double inv_m = out.inertia.size() == out.N ? 1.0 / out.inertia(gi) : 1.0;

    const int n0 = out.n();
    Matrix A = Matrix::Zero(n0 + 3, n0 + 3);
    A.topLeftCorner(n0, n0) = out.A;
    A.block(n0, n0, 3, 3) = r.A;
    A.block(n0, f, 3, 1) = r.B;
    // Stabilizer output y = C w + D th_i' opposes the acceleration of generator g.
    A(f, f) -= r.D * inv_m;
    A.block(f, n0, 1, 3) -= r.C * inv_m;
    out.A = std::move(A);
    out.B1.conservativeResize(n0 + 3, Eigen::NoChange);
    out.B1.bottomRows(3).setZero();
    out.B2.conservativeResize(n0 + 3, Eigen::NoChange);
    out.B2.bottomRows(3).setZero();
    auto& states = out.generator_state_map[g];
    for (int k = 0; k < 3; ++k) states.push_back(n0 + k - out.N);
    if (!out.labels.empty()) {
      for (int k = 0; k < 3; ++k) out.labels.push_back("pss_" + std::to_string(gi + 1) + "_" + std::to_string(k + 1));
    }
  }
  return out;
}

// ---- Weights ----------------------------------------------------------------

Matrix angle_deviation_weight(int N) {
  if (N < 1) throw Error(ErrorKind::BadDimensions, "angle count must be positive");
  return Matrix::Identity(N, N) - Matrix::Constant(N, N, 1.0 / N);
}

PerformanceWeights build_weights(const StateSpaceModel& model, double R_scale) {
  model.validate();
  if (!(R_scale > 0.0) || !std::isfinite(R_scale)) {
    throw Error(ErrorKind::Config, "control weight scale must be positive");
  }
  const int N = model.N;
  const int n = model.n();
  if (model.inertia.size() != N) {
    log::warn("model carries no inertia; kinetic-energy weight uses unit inertia");
  }
  PerformanceWeights w;
  w.Q_theta = angle_deviation_weight(N);
  w.Q = Matrix::Zero(n, n);
  w.Qsqrt = Matrix::Zero(n, n);
  w.Q.topLeftCorner(N, N) = w.Q_theta;
  // Q_theta is an orthogonal projector, hence its own square root.
  w.Qsqrt.topLeftCorner(N, N) = w.Q_theta;
  for (int g = 0; g < N; ++g) {
    const int f = model.frequency_state(g);
    if (f < 0) continue;
    const double M = model.inertia.size() == N ? model.inertia(g) : 1.0;
    w.Q(f, f) = 0.5 * M;
    w.Qsqrt(f, f) = std::sqrt(0.5 * M);
  }
  const int m = model.m();
  w.R = R_scale * Matrix::Identity(m, m);
  w.Rsqrt = std::sqrt(R_scale) * Matrix::Identity(m, m);
  return w;
}

// ---- Swing study ------------------------------------------------------------

StateSpaceModel SwingStudy::build() const {
  return build_with(network.laplacian);
}

StateSpaceModel SwingStudy::build_with(const Matrix& laplacian) const {
  SwingNetwork net = network;
  net.laplacian = laplacian;
  StateSpaceModel model = build_swing_model(net, inputs);
  bool any = false;
  for (const auto& p : pss) any = any || p.has_value();
  return any ? embed_pss(model, pss) : model;
}

// ---- Model file -------------------------------------------------------------

std::string model_to_json(const StateSpaceModel& model) {
  model.validate();
  json doc;
  doc["n"] = model.n();
  doc["N"] = model.N;
  doc["m"] = model.m();
  doc["p"] = model.p();
  doc["A"] = matrix_to_json(model.A);
  doc["B1"] = matrix_to_json(model.B1);
  doc["B2"] = matrix_to_json(model.B2);
  doc["generator_state_map"] = model.generator_state_map;
  doc["labels"] = model.labels;
  doc["input_generator"] = model.input_generator;
  if (model.inertia.size() > 0) {
    doc["inertia"] = std::vector<double>(model.inertia.data(), model.inertia.data() + model.inertia.size());
  }
  return doc.dump(1) + "\n";
}

StateSpaceModel model_from_json(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) schema("model file must be a JSON object");
  StateSpaceModel model;
  const int n = int_at(doc, "n");
  model.N = int_at(doc, "N");
  const int m = int_at(doc, "m");
  const int p = int_at(doc, "p");
  if (n < 1 || m < 1 || p < 1) schema("n, m and p must be positive");
  model.A = matrix_at(doc, "A", n, n);
  model.B1 = matrix_at(doc, "B1", n, p);
  model.B2 = matrix_at(doc, "B2", n, m);
  if (doc.contains("generator_state_map")) {
    const json& map = doc.at("generator_state_map");
    if (!map.is_array()) schema("\"generator_state_map\" must be an array");
    for (size_t g = 0; g < map.size(); ++g) {
      model.generator_state_map.push_back(index_list(map[g], "generator_state_map[" + std::to_string(g) + "]"));
    }
  }
  if (doc.contains("labels")) {
    const json& labels = doc.at("labels");
    if (!labels.is_array()) schema("\"labels\" must be an array");
    for (const auto& l : labels) {
      if (!l.is_string()) schema("\"labels\" must contain strings");
      model.labels.push_back(l.get<std::string>());
    }
  }
  if (doc.contains("input_generator")) {
    model.input_generator = index_list(doc.at("input_generator"), "input_generator");
  } else {
    // Default convention: input i actuates generator i.
    for (int i = 0; i < m; ++i) model.input_generator.push_back(i < model.N ? i : -1);
  }
  if (doc.contains("inertia")) {
    const json& inertia = doc.at("inertia");
    if (!inertia.is_array()) schema("\"inertia\" must be an array");
    model.inertia.resize(static_cast<Eigen::Index>(inertia.size()));
    for (size_t g = 0; g < inertia.size(); ++g) {
      model.inertia(static_cast<Eigen::Index>(g)) = number_at(inertia[g], "inertia[" + std::to_string(g) + "]");
    }
  }
  model.validate();
  if (!model.rotationally_symmetric()) {
    log::warn("imported model violates A [1; 0] = 0 (residual " + std::to_string(model.symmetry_residual()) +
              "); symmetry reduction requires an absolute-coordinate override");
  }
  return model;
}

StateSpaceModel load_model(const std::filesystem::path& path) {
  return model_from_json(read_file(path));
}

void save_model(const StateSpaceModel& model, const std::filesystem::path& path) {
  const std::string text = model_to_json(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

SwingStudy swing_study_from_json(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) schema("swing file must be a JSON object");
  if (!doc.contains("generators") || !doc.at("generators").is_array() || doc.at("generators").empty()) {
    schema("swing file needs a nonempty \"generators\" array");
  }
  const json& gens = doc.at("generators");
  const auto N = static_cast<Eigen::Index>(gens.size());
  Vector M(N), D(N);
  for (Eigen::Index g = 0; g < N; ++g) {
    const json& gen = gens[static_cast<size_t>(g)];
    if (!gen.is_object() || !gen.contains("M") || !gen.contains("D")) schema("each generator needs \"M\" and \"D\"");
    M(g) = number_at(gen.at("M"), "generators[" + std::to_string(g) + "].M");
    D(g) = number_at(gen.at("D"), "generators[" + std::to_string(g) + "].D");
  }
  std::vector<SwingNetwork::Edge> edges;
  if (doc.contains("edges")) {
    const json& list = doc.at("edges");
    if (!list.is_array()) schema("\"edges\" must be an array");
    for (const auto& e : list) {
      if (!e.is_object()) schema("each edge must be an object");
      edges.push_back({int_at(e, "i"), int_at(e, "j"), e.contains("b") ? number_at(e.at("b"), "edge.b") : 0.0});
    }
  }
  SwingStudy study;
  study.network = SwingNetwork::from_edges(M, D, edges);

  if (doc.contains("pss") && !doc.at("pss").is_null()) {
    const json& pss = doc.at("pss");
    study.pss.assign(static_cast<size_t>(N), std::nullopt);
    if (pss.is_object()) {
      const PssParameters params = pss_from_json(pss, {});
      const std::vector<int> equipped =
          pss.contains("generators") ? index_list(pss.at("generators"), "pss.generators") : all_generators(static_cast<int>(N));
      for (int g : equipped) {
        if (g < 0 || g >= N) schema("pss.generators index out of range");
        study.pss[static_cast<size_t>(g)] = params;
      }
    } else if (pss.is_array()) {
      if (static_cast<Eigen::Index>(pss.size()) != N) schema("per-generator \"pss\" array needs one slot per generator");
      for (size_t g = 0; g < pss.size(); ++g) {
        if (pss[g].is_null()) continue;
        if (!pss[g].is_object()) schema("pss slots must be objects or null");
        study.pss[g] = pss_from_json(pss[g], {});
      }
    } else {
      schema("\"pss\" must be an object, an array or null");
    }
  }
  if (doc.contains("actuated")) study.inputs.actuated = index_list(doc.at("actuated"), "actuated");
  if (doc.contains("disturbed")) study.inputs.disturbed = index_list(doc.at("disturbed"), "disturbed");
  return study;
}

SwingStudy load_swing_study(const std::filesystem::path& path) {
  return swing_study_from_json(read_file(path));
}

}  // namespace gridosc
