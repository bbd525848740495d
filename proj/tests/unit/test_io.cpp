#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "segdyn/io.hpp"

using namespace segdyn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("segdyn_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("doubles round trip through text") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 20 - 10);
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.5) == "0.5");
}

TEST_CASE("models round trip") {
  for (const auto& m : {FlowModel::lorenz({9.0, 27.0, 2.5}), FlowModel::linear_diagonal({1.0, 0.5})}) {
    const auto back = io::model_from_json(io::to_json(m));
    CHECK(io::to_json(back) == io::to_json(m));
  }
  QuadraticParams p;
  p.linear = {0, -1, 1, 0};
  p.quadratic = {0, 0, 0, 1, 0, 0, 0, 0};
  p.forcing = {0.5, 0};
  const auto q = FlowModel::quadratic(2, p);
  const auto j = io::to_json(q);
  CHECK(j["parameters"]["quadratic"][0][1][1] == 1.0);
  CHECK(io::to_json(io::model_from_json(j)) == j);
  CHECK_THROWS_AS(io::model_from_json(io::json{{"model_id", "Chua"}}), ValidationError);
  CHECK_THROWS(io::model_from_json(io::json::parse(
      R"({"model_id":"QuadraticGeneric","dimension":2,"parameters":{"linear":[[1,2]]}})")));
}

TEST_CASE("cover and domain round trip") {
  const Cover c{{{1, {0.1, 0.2}, 0.3}, {2, {1.0 / 3.0, 2.0}, 0.25}}};
  const auto back = io::cover_from_json(io::to_json(c));
  REQUIRE(back.size() == 2);
  CHECK(back.balls[1].center == c.balls[1].center);
  CHECK(back.balls[1].radius == 0.25);
  BoxDomain d{{0, 0}, {1, 2}, StateVector{0.5, 1.0}, 0.7};
  const auto dd = io::domain_from_json(io::to_json(d));
  CHECK(dd.ball_center == d.ball_center);
  CHECK_THROWS_AS(io::cover_from_json(io::json::parse(R"({"balls":[{"index":2,"center":[0],"radius":1}]})")),
                  ValidationError);
}

TEST_CASE("transitions JSON, dense and sparse") {
  TransitionMatrix g(3);
  g.add_sampled(1, 5);
  g.add_count(1, 2, 3);
  g.add_count(1, 3, 1);
  g.add_escapes(1, 1);
  const auto p = MarkovMatrix::from_counts(g);
  for (std::size_t limit : {512u, 1u}) {
    const auto j = io::transitions_to_json(g, p, limit);
    CHECK(j["format"] == (limit == 1 ? "sparse" : "dense"));
    const auto back = io::transitions_from_json(j);
    CHECK(back.gamma == g);
    CHECK(back.p == p);
    CHECK(j["unsupported_rows"] == io::json::array({2, 3}));
  }
}

TEST_CASE("tensors JSON") {
  const std::vector<TransitionTensor> ts{{2, {{1, 2}, {2, 2}}}, {3, {{1, 2, 2}}}};
  CHECK(io::tensors_from_json(io::tensors_to_json(ts)) == ts);
  CHECK_THROWS_AS(io::tensors_from_json(io::json::parse(R"({"tensors":[{"order":3,"tuples":[[1,2]]}]})")),
                  ValidationError);
}

TEST_CASE("segment library directory round trip") {
  const auto dir = scratch("lib");
  Cover c{{{1, {1.0, 2.0, 3.0}, 0.5}, {2, {-4.0, 0.5, 25.0}, 0.5}}};
  const auto lib = build_segments(FlowModel::lorenz(), c, 0.5, 26, {}, 1.0);
  io::save_library(dir, lib);
  std::ifstream csv(dir / "segments.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "cell,k,t,coord_0,coord_1,coord_2");
  const auto back = io::load_library(dir);
  REQUIRE(back.size() == 2);
  CHECK(back.T == 0.5);
  CHECK(back.n_t == 26);
  CHECK(back.epsilon == 1.0);
  for (CellId n : {1, 2}) {
    CHECK(back.segment(n).samples.states == lib.segment(n).samples.states);
    CHECK(back.segment(n).samples.times == lib.segment(n).samples.times);
  }
  CHECK_THROWS(io::load_library(dir / "nope"));
}

TEST_CASE("points CSV and digests") {
  const auto dir = scratch("pts");
  const std::vector<StateVector> pts{{0.1, 0.2}, {1e-300, -3.5}};
  io::write_points_csv(dir / "p.csv", pts);
  CHECK(io::read_points_csv(dir / "p.csv") == pts);
  {
    std::ofstream out(dir / "abc.txt", std::ios::binary);
    out << "abc";
  }
  CHECK(io::file_digest(dir / "abc.txt") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  {
    std::ofstream out(dir / "bad.csv");
    out << "1,2\n3\n";
  }
  CHECK_THROWS_AS(io::read_points_csv(dir / "bad.csv"), ValidationError);
}
