#include <cmath>
#include <random>

#include "doctest.h"
#include "segdyn/flow.hpp"

using namespace segdyn;

namespace {

FlowModel rotation2d() {
  QuadraticParams p;
  p.linear = {0.0, -1.0, 1.0, 0.0};
  return FlowModel::quadratic(2, p);
}

}  // namespace

TEST_CASE("linear decay matches exp(-t)") {
  const auto m = FlowModel::linear_diagonal({1.0});
  const auto y = advance(m, {1.0}, 1.0, {});
  CHECK(std::abs(y[0] - std::exp(-1.0)) <= 1e-8);
  CHECK(std::abs(y[0] - 0.3678794) < 1e-7);
}

TEST_CASE("t = 0 returns the input exactly") {
  const StateVector x{0.1234567890123, -7.25, 3.0};
  CHECK(advance(FlowModel::lorenz(), x, 0.0, {}) == x);
  CHECK(advance(FlowModel::linear_diagonal({1, 2, 3}), x, 0.0, {}) == x);
}

TEST_CASE("Lorenz origin is an equilibrium") {
  const auto y = advance(FlowModel::lorenz(), {0, 0, 0}, 5.0, {});
  CHECK(y == StateVector{0, 0, 0});
}

TEST_CASE("sample_trajectory grids and endpoints") {
  const auto m = FlowModel::linear_diagonal({1.0});
  const auto s = sample_trajectory(m, {1.0}, 1.0, 3, {});
  REQUIRE(s.states.size() == 3);
  CHECK(s.times == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(std::abs(s.states[1][0] - std::exp(-0.5)) < 1e-8);
  CHECK(std::abs(s.states[2][0] - std::exp(-1.0)) < 1e-8);

  const auto two = sample_trajectory(m, {2.0}, 0.7, 2, {});
  CHECK(two.states[1] == advance(m, {2.0}, 0.7, {}));

  const auto lz = FlowModel::lorenz();
  const auto traj = sample_trajectory(lz, {1, 1, 1}, 0.5, 51, {});
  const auto end = advance(lz, {1, 1, 1}, 0.5, {});
  for (int i = 0; i < 3; ++i) CHECK(std::abs(traj.states.back()[i] - end[i]) <= 1e-12);
}

TEST_CASE("RK4 error shrinks about 16x per step halving") {
  const auto m = FlowModel::linear_diagonal({1.0});
  const double exact = std::exp(-2.0);
  const auto err = [&](double h) {
    return std::abs(advance(m, {1.0}, 2.0, {h, Scheme::RK4})[0] - exact);
  };
  const double ratio = err(0.1) / err(0.05);
  CHECK(ratio > 8.0);
  CHECK(ratio < 32.0);
  CHECK(err(1e-3) <= 1e-8);
}

TEST_CASE("semigroup property") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 1.0), c(-5.0, 5.0);
  const auto lin = FlowModel::linear_diagonal({1.0, 0.3, 2.0});
  for (int k = 0; k < 20; ++k) {
    const StateVector x{c(rng), c(rng), c(rng)};
    const double s = u(rng), t = u(rng);
    const auto a = advance(lin, advance(lin, x, s, {}), t, {});
    const auto b = advance(lin, x, s + t, {});
    CHECK(distance(a, b) <= 1e-8);
  }
  const auto lz = FlowModel::lorenz();
  for (int k = 0; k < 20; ++k) {
    const StateVector x{c(rng), c(rng), 20.0 + c(rng)};
    const double s = 0.5 * u(rng), t = 0.5 * u(rng);
    const auto a = advance(lz, advance(lz, x, s, {}), t, {});
    const auto b = advance(lz, x, s + t, {});
    CHECK(distance(a, b) <= 1e-6);
  }
}

TEST_CASE("advance is bit-deterministic") {
  const auto lz = FlowModel::lorenz();
  CHECK(advance(lz, {1.1, 2.2, 3.3}, 1.7, {}) == advance(lz, {1.1, 2.2, 3.3}, 1.7, {}));
}

TEST_CASE("window-by-window integration equals one pass") {
  const auto lz = FlowModel::lorenz();
  StateVector x{1, 1, 1};
  for (int j = 0; j < 10; ++j) x = advance(lz, x, 0.5, {});
  CHECK(x == advance(lz, {1, 1, 1}, 5.0, {}));
}

TEST_CASE("blow-up is reported with the time reached") {
  QuadraticParams p;
  p.quadratic = {1.0};  // dx/dt = x^2 explodes at t = 1/x0
  const auto m = FlowModel::quadratic(1, p);
  try {
    advance(m, {10.0}, 1.0, {});
    FAIL("expected blow-up");
  } catch (const NumericsError& e) {
    CHECK(std::string(e.what()).find("blow-up") != std::string::npos);
  }
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(advance(FlowModel::lorenz(), {1.0, 2.0}, 1.0, {}), ValidationError);
  CHECK_THROWS_AS(advance(FlowModel::lorenz(), {1.0, NAN, 2.0}, 1.0, {}), ValidationError);
  CHECK_THROWS_AS(advance(FlowModel::lorenz(), {1, 2, 3}, -1.0, {}), ValidationError);
  CHECK_THROWS_AS(advance(FlowModel::lorenz(), {1, 2, 3}, 1.0, {0.0, Scheme::RK4}), ValidationError);
  CHECK_THROWS_AS(FlowModel::linear_diagonal({}), ValidationError);
  QuadraticParams bad;
  bad.linear = {1.0, 2.0};
  CHECK_THROWS_AS(FlowModel::quadratic(2, bad), ValidationError);
}

TEST_CASE("jacobian norm oracles") {
  const auto lin = FlowModel::linear_diagonal({1.0, 1.0});
  CHECK(std::abs(jacobian_norm(lin, {0.3, -2.0}, 1.0, {}, 1e-5) - std::exp(-1.0)) <= 1e-5);
  CHECK(std::abs(jacobian_norm(FlowModel::lorenz(), {1, 2, 3}, 0.0, {}, 1e-5) - 1.0) <= 1e-9);
  CHECK(std::abs(jacobian_norm(rotation2d(), {1.0, 0.5}, 1.0, {}, 1e-5) - 1.0) <= 1e-5);
  // rotation really rotates: quarter period maps e1 to e2
  const auto y = advance(rotation2d(), {1.0, 0.0}, M_PI / 2, {});
  CHECK(std::abs(y[0]) < 1e-8);
  CHECK(std::abs(y[1] - 1.0) < 1e-8);
}

TEST_CASE("step plan snaps near-integer ratios") {
  CHECK(plan_steps(0.5, 1e-3).full_steps == 500);
  CHECK(plan_steps(0.5, 1e-3).partial == 0.0);
  const auto p = plan_steps(0.0105, 1e-3);
  CHECK(p.full_steps == 10);
  CHECK(std::abs(p.partial - 0.0005) < 1e-12);
}

TEST_CASE("model ids round trip") {
  for (auto id : {ModelId::LinearDiagonal, ModelId::Lorenz, ModelId::QuadraticGeneric})
    CHECK(model_id_from_string(to_string(id)) == id);
  CHECK_THROWS_AS(model_id_from_string("Rossler"), ValidationError);
}
