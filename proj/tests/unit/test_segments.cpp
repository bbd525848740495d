#include <cmath>
#include <random>

#include "doctest.h"
#include "segdyn/segments.hpp"

using namespace segdyn;

namespace {

Cover line_cover(std::vector<double> xs, double r = 0.1) {
  Cover c;
  for (std::size_t k = 0; k < xs.size(); ++k)
    c.balls.push_back({static_cast<CellId>(k + 1), {xs[k]}, r});
  return c;
}

FlowModel frozen(std::size_t d) {
  QuadraticParams p;
  return FlowModel::quadratic(d, p);
}

}  // namespace

TEST_CASE("single linear segment") {
  const auto lib = build_segments(FlowModel::linear_diagonal({1.0}), line_cover({1.0}), 1.0, 3, {});
  REQUIRE(lib.size() == 1);
  const auto& s = lib.segment(1).samples;
  CHECK(s.states[0][0] == 1.0);
  CHECK(std::abs(s.states[1][0] - std::exp(-0.5)) < 1e-8);
  CHECK(std::abs(s.states[2][0] - std::exp(-1.0)) < 1e-8);
  CHECK(lib.start(1) == StateVector{1.0});
}

TEST_CASE("n_t = 2 keeps endpoints") {
  const auto m = FlowModel::lorenz();
  Cover c{{{1, {1, 1, 1}, 0.5}, {2, {-3, 2, 20}, 0.5}}};
  const auto lib = build_segments(m, c, 0.3, 2, {});
  for (CellId n : {1, 2}) {
    CHECK(lib.start(n) == c.balls[n - 1].center);
    CHECK(lib.end(n) == advance(m, c.balls[n - 1].center, 0.3, {}));
  }
}

TEST_CASE("Lorenz origin segment is constant") {
  const auto lib = build_segments(FlowModel::lorenz(), Cover{{{1, {0, 0, 0}, 1.0}}}, 0.5, 11, {});
  for (const auto& x : lib.segment(1).samples.states) CHECK(x == StateVector{0, 0, 0});
}

TEST_CASE("segments share one grid and match the center") {
  const auto lib = build_segments(FlowModel::lorenz(),
                                  Cover{{{1, {1, 2, 3}, 0.5}, {2, {4, 5, 6}, 0.5}}}, 0.5, 21, {});
  CHECK(lib.segment(1).samples.times == lib.segment(2).samples.times);
  CHECK(lib.segment(1).samples.times.back() == 0.5);
  CHECK_NOTHROW(lib.validate());
}

TEST_CASE("blow-up names the cell") {
  QuadraticParams p;
  p.quadratic = {1.0};
  const auto m = FlowModel::quadratic(1, p);
  try {
    build_segments(m, line_cover({0.1, 50.0}), 1.0, 5, {});
    FAIL("expected error");
  } catch (const NumericsError& e) {
    CHECK(std::string(e.what()).find("cell 2") != std::string::npos);
  }
}

TEST_CASE("max_difference oracles") {
  SUBCASE("single segment gives zeros") {
    const auto lib = build_segments(FlowModel::lorenz(), Cover{{{1, {1, 1, 1}, 0.5}}}, 0.5, 11, {});
    for (double v : max_difference(lib)) CHECK(v == 0.0);
  }
  SUBCASE("linear pair decays as exp(-t)") {
    const auto lib = build_segments(FlowModel::linear_diagonal({1.0}), line_cover({0.0, 1.0}), 2.0, 41, {});
    const auto md = max_difference(lib);
    const auto& t = lib.segment(1).samples.times;
    for (std::size_t k = 0; k < md.size(); ++k) CHECK(std::abs(md[k] - std::exp(-t[k])) <= 1e-8);
  }
  SUBCASE("frozen flow is constant") {
    const auto lib = build_segments(frozen(2), Cover{{{1, {0, 0}, 1}, {2, {3, 4}, 1}, {3, {1, 1}, 1}}}, 1.0, 7, {});
    for (double v : max_difference(lib)) CHECK(v == 5.0);
  }
}

TEST_CASE("max_difference invariances") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Cover c;
  for (int k = 1; k <= 6; ++k) c.balls.push_back({k, {u(rng), u(rng)}, 0.1});
  const auto m = FlowModel::linear_diagonal({0.5, 1.5});
  const auto a = max_difference(build_segments(m, c, 1.0, 11, {}));
  Cover shuffled = c;
  std::reverse(shuffled.balls.begin(), shuffled.balls.end());
  for (std::size_t k = 0; k < shuffled.size(); ++k) shuffled.balls[k].index = static_cast<CellId>(k + 1);
  const auto b = max_difference(build_segments(m, shuffled, 1.0, 11, {}));
  CHECK(a == b);
  for (std::size_t k = 1; k < a.size(); ++k) CHECK(a[k] <= a[k - 1] + 1e-12);
  // parallel evaluation matches
  CHECK(max_difference(build_segments(m, c, 1.0, 11, {}, 0.0, 3), 3) == a);
}
