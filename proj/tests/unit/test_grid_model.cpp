#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "gridosc/error.hpp"
#include "gridosc/grid_model.hpp"
#include "support/test_models.hpp"

using namespace gridosc;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Config;
}

Vector ones_on_angles(const StateSpaceModel& model) {
  Vector v = Vector::Zero(model.n());
  v.head(model.N).setOnes();
  return v;
}

int count_near_zero(const CVector& values, double tol) {
  int count = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) count += std::abs(values(i)) < tol ? 1 : 0;
  return count;
}

bool contains(const CVector& values, Complex target, double tol) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (std::abs(values(i) - target) < tol) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("swing model: two identical generators") {
  const StateSpaceModel model = build_swing_model(fixtures::two_generator());
  CHECK(model.n() == 4);
  CHECK(model.N == 2);
  CHECK(model.m() == 2);
  const CVector l = eigenvalues(model.A);
  const double w = std::sqrt(7.0) / 2.0;
  CHECK(contains(l, Complex(0, 0), 1e-10));
  CHECK(contains(l, Complex(-1, 0), 1e-10));
  CHECK(contains(l, Complex(-0.5, w), 1e-10));
  CHECK(contains(l, Complex(-0.5, -w), 1e-10));
  CHECK(std::abs(w - 1.3229) < 5e-5);
  CHECK((model.A * ones_on_angles(model)).norm() <= 1e-10 * model.A.norm());
  CHECK((model.B1 - model.B2).norm() == 0.0);
}

TEST_CASE("swing model: block structure and symmetry on assorted networks") {
  for (const SwingNetwork& net : {fixtures::two_generator(), fixtures::three_generator(), fixtures::ring(3),
                                  fixtures::ring(6)}) {
    const StateSpaceModel model = build_swing_model(net);
    const int N = model.N;
    CHECK(model.A.topLeftCorner(N, N).norm() == 0.0);
    CHECK((model.A.topRightCorner(N, N) - Matrix::Identity(N, N)).norm() == 0.0);
    const Matrix Minv = net.inertia.cwiseInverse().asDiagonal();
    CHECK((model.A.bottomLeftCorner(N, N) + Minv * net.laplacian).norm() < 1e-14);
    CHECK((model.A.bottomRightCorner(N, N) + Minv * Matrix(net.damping.asDiagonal())).norm() < 1e-14);
    CHECK((model.A * ones_on_angles(model)).norm() <= 1e-10 * model.A.norm());
    // Connected graph: exactly one zero eigenvalue.
    CHECK(count_near_zero(eigenvalues(model.A), 1e-8) == 1);
    for (int g = 0; g < N; ++g) CHECK(model.frequency_state(g) == N + g);
  }
}

TEST_CASE("swing model: uniform 3-ring frequencies") {
  // Relative modes s^2 + s + 3 = 0 (Laplacian eigenvalue 3, twice).
  const StateSpaceModel model = build_swing_model(fixtures::ring(3));
  const CVector l = eigenvalues(model.A);
  const Complex pair(-0.5, std::sqrt(11.0) / 2.0);
  int hits = 0;
  for (Eigen::Index i = 0; i < l.size(); ++i) hits += std::abs(l(i) - pair) < 1e-8 ? 1 : 0;
  CHECK(hits == 2);
  CHECK(contains(l, Complex(-1, 0), 1e-10));
}

TEST_CASE("swing model: disconnected network has a second zero eigenvalue") {
  const SwingNetwork net = SwingNetwork::from_edges(Vector::Ones(4), Vector::Ones(4), {{0, 1, 1.0}, {2, 3, 1.0}});
  CHECK(count_near_zero(eigenvalues(build_swing_model(net).A), 1e-8) == 2);
}

TEST_CASE("swing network validation") {
  Matrix bad = Matrix::Zero(2, 2);
  bad << 1, -1, -1, 2;
  SwingNetwork net{Vector::Ones(2), Vector::Ones(2), bad};
  CHECK(kind_of([&] { net.validate(); }) == ErrorKind::InvalidLaplacian);
  CHECK(kind_of([&] { build_swing_model(net); }) == ErrorKind::InvalidLaplacian);
  net.laplacian << 1, -1, -1, 1;
  net.inertia(0) = 0.0;
  CHECK(kind_of([&] { net.validate(); }) == ErrorKind::BadDimensions);
  net.inertia(0) = std::nan("");
  CHECK(kind_of([&] { net.validate(); }) == ErrorKind::NonFiniteEntry);
  net.inertia(0) = 1.0;
  net.laplacian << -1, 1, 1, -1;
  CHECK(kind_of([&] { net.validate(); }) == ErrorKind::InvalidLaplacian);
}

TEST_CASE("actuation and disturbance patterns") {
  SwingInputs inputs;
  inputs.actuated = std::vector<int>{1, 2};
  const StateSpaceModel model = build_swing_model(fixtures::three_generator(), inputs);
  CHECK(model.m() == 2);
  CHECK(model.p() == 2);
  CHECK(model.input_generator == std::vector<int>{1, 2});
  CHECK(model.B2(3 + 1, 0) == doctest::Approx(1.0 / 1.5));
  CHECK(model.B2(3 + 2, 1) == doctest::Approx(1.0 / 2.0));
  CHECK(model.B2.topRows(3).norm() == 0.0);
  inputs.disturbed = std::vector<int>{0};
  const StateSpaceModel d = build_swing_model(fixtures::three_generator(), inputs);
  CHECK(d.p() == 1);
  CHECK(d.B1(3, 0) == doctest::Approx(1.0));
}

TEST_CASE("stabilizer realization: poles, DC gain and transfer function") {
  const PssParameters params;
  const PssRealization r = pss_realization(params);
  const CVector poles = eigenvalues(r.A);
  CHECK(contains(poles, Complex(-0.2, 0), 1e-8));
  int fast = 0;
  for (Eigen::Index i = 0; i < poles.size(); ++i) fast += std::abs(poles(i) + 100.0) < 1e-4 ? 1 : 0;
  CHECK(fast == 2);

  auto tf = [&](double w) { return frequency_response(r.A, r.B, r.C, w)(0, 0) + r.D; };
  CHECK(std::abs(tf(1e-6)) <= 1e-4);
  for (double w : {0.1, 1.0, 7.3, 50.0}) {
    const Complex s(0, w);
    const Complex expected = params.gain * (params.washout * s / (1.0 + params.washout * s)) *
                             ((1.0 + params.lead1 * s) / (1.0 + params.lag1 * s)) *
                             ((1.0 + params.lead2 * s) / (1.0 + params.lag2 * s));
    CHECK(std::abs(tf(w) - expected) <= 1e-9 * std::abs(expected));
  }
}

TEST_CASE("embed_pss: zero gain decouples, defaults keep symmetry and the zero mode") {
  const StateSpaceModel base = build_swing_model(fixtures::three_generator());
  PssParameters off;
  off.gain = 0.0;
  const StateSpaceModel quiet = embed_pss(base, {off, std::nullopt, std::nullopt});
  CHECK(quiet.n() == base.n() + 3);
  CHECK((quiet.A.topLeftCorner(base.n(), base.n()) - base.A).norm() == 0.0);
  const CVector filter = eigenvalues(quiet.A.bottomRightCorner(3, 3));
  CHECK(contains(filter, Complex(-1.0 / off.washout, 0), 1e-8));
  CHECK(spectral_abscissa(quiet.A.bottomRightCorner(3, 3)) < 0.0);

  const std::vector<std::optional<PssParameters>> all(3, PssParameters{});
  const StateSpaceModel full = embed_pss(base, all);
  CHECK(full.n() == base.n() + 9);
  CHECK((full.A * ones_on_angles(full)).norm() <= 1e-10 * full.A.norm());
  CHECK(count_near_zero(eigenvalues(full.A), 1e-8) == 1);
  CHECK(full.generator_state_map[1].size() == 4);
  CHECK(full.generator_state_map[1][0] == 1);
  // Washout: the stabilizer path from frequency to its output vanishes at DC.
  // (The open-loop A has a zero eigenvalue, so the path is evaluated on its own.)
  const PssRealization r = pss_realization(PssParameters{});
  CHECK(std::abs(frequency_response(r.A, r.B, r.C, 1e-6)(0, 0) + r.D) <= 1e-4);

  // Embedded path: frequency of generator 3 into its stabilizer states.
  const Matrix block = full.A.bottomRightCorner(3, 3);
  const Matrix drive = full.A.block(full.n() - 3, 3 + 2, 3, 1);
  CHECK(std::abs(frequency_response(block, drive, r.C, 1e-6)(0, 0) + r.D) <= 1e-4);
}

TEST_CASE("embed_pss: missing frequency state") {
  StateSpaceModel model = build_swing_model(fixtures::two_generator());
  model.generator_state_map[1].clear();
  CHECK(kind_of([&] { embed_pss(model, {std::nullopt, PssParameters{}}); }) == ErrorKind::MissingFrequencyState);
}

TEST_CASE("performance weights") {
  const StateSpaceModel two = build_swing_model(fixtures::two_generator());
  const PerformanceWeights w2 = build_weights(two);
  Matrix expected(2, 2);
  expected << 0.5, -0.5, -0.5, 0.5;
  CHECK((w2.Q_theta - expected).norm() < 1e-15);

  const std::vector<std::optional<PssParameters>> all(3, PssParameters{});
  const StateSpaceModel model = embed_pss(build_swing_model(fixtures::three_generator()), all);
  const PerformanceWeights w = build_weights(model, 2.0);
  CHECK((w.Q_theta * Vector::Ones(3)).norm() <= 1e-12);
  CHECK((w.Qsqrt.transpose() * w.Qsqrt - w.Q).norm() <= 1e-10);
  CHECK((w.Qsqrt * ones_on_angles(model)).norm() <= 1e-12);
  CHECK((w.Q - w.Q.transpose()).norm() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(w.Q).eigenvalues().minCoeff() >= -1e-12);
  CHECK(w.Q(3, 3) == doctest::Approx(0.5));
  CHECK(w.Q(4, 4) == doctest::Approx(0.75));
  CHECK(w.Q(5, 5) == doctest::Approx(1.0));
  CHECK(w.Q.bottomRightCorner(9, 9).norm() == 0.0);
  CHECK((w.R - 2.0 * Matrix::Identity(3, 3)).norm() == 0.0);
  CHECK((w.Rsqrt * w.Rsqrt - w.R).norm() < 1e-14);
}

TEST_CASE("model file: round trip, NaN and schema errors") {
  const auto dir = std::filesystem::temp_directory_path() / "gridosc_test_grid_model";
  std::filesystem::create_directories(dir);
  const StateSpaceModel model = build_swing_model(fixtures::two_generator());
  save_model(model, dir / "model.json");
  const StateSpaceModel back = load_model(dir / "model.json");
  CHECK((back.A - model.A).norm() == 0.0);
  CHECK((back.B1 - model.B1).norm() == 0.0);
  CHECK((back.B2 - model.B2).norm() == 0.0);
  CHECK(back.N == model.N);
  CHECK(back.generator_state_map == model.generator_state_map);
  CHECK(model_to_json(back) == model_to_json(model));

  std::string text = model_to_json(model);
  const auto pos = text.find("-1.0");
  REQUIRE(pos != std::string::npos);
  std::string nan_text = text;
  nan_text.replace(pos, 4, "NaN");
  CHECK(kind_of([&] { model_from_json(nan_text); }) == ErrorKind::NonFiniteEntry);
  std::string quoted = text;
  quoted.replace(pos, 4, "\"nan\"");
  CHECK(kind_of([&] { model_from_json(quoted); }) == ErrorKind::NonFiniteEntry);
  CHECK(kind_of([&] { model_from_json("{\"n\": 2}"); }) == ErrorKind::SchemaViolation);
  CHECK(kind_of([&] { model_from_json("not json"); }) == ErrorKind::SchemaViolation);
  CHECK(kind_of([&] { load_model(dir / "missing.json"); }) == ErrorKind::Io);

  // An asymmetric import loads (with a warning) rather than failing.
  StateSpaceModel slack = model;
  slack.A(2, 0) = -3.0;
  CHECK_FALSE(model_from_json(model_to_json(slack)).rotationally_symmetric());
}

TEST_CASE("swing study file") {
  const std::string text =
      R"({"generators": [{"M": 1, "D": 0.3}, {"M": 1.5, "D": 0.4}, {"M": 2, "D": 0.35}],
          "edges": [{"i": 0, "j": 1, "b": 1.2}, {"i": 1, "j": 2, "b": 0.8}, {"i": 0, "j": 2, "b": 0.5}],
          "pss": {"k": 2.0, "Tw": 4.0, "generators": [2]}})";
  const SwingStudy study = swing_study_from_json(text);
  CHECK((study.network.laplacian - fixtures::three_generator().laplacian).norm() < 1e-15);
  REQUIRE(study.pss.size() == 3);
  CHECK_FALSE(study.pss[0].has_value());
  REQUIRE(study.pss[2].has_value());
  CHECK(study.pss[2]->gain == 2.0);
  CHECK(study.pss[2]->washout == 4.0);
  CHECK(study.pss[2]->lead1 == 0.1);
  CHECK(study.build().n() == 9);
  CHECK(kind_of([&] { swing_study_from_json(R"({"generators": []})"); }) == ErrorKind::SchemaViolation);
  CHECK(kind_of([&] {
          swing_study_from_json(R"({"generators": [{"M": 1, "D": 1}, {"M": 1, "D": 1}], "edges": [{"i": 0, "j": 5, "b": 1}]})");
        }) == ErrorKind::InvalidLaplacian);
}
