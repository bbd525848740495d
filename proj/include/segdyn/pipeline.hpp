#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "segdyn/io.hpp"

namespace segdyn {

inline constexpr const char* kToolVersion = "0.3.0";

struct OrbitSpec {
  std::vector<StateVector> initial_points;  // explicit x0 list; random draws when empty
  int count = 100;
  bool require_complete = true;
  std::size_t max_candidates = 200000;
};

struct MeasureSpec {
  std::string source = "uniform";  // uniform | trajectory | csv
  std::size_t count = 20000;
  std::string path;
  double burn_in = 10.0;  // trajectory source: time discarded before sampling
  StateVector start;      // trajectory source: initial point (box center if empty)
};

struct EnumerateSpec {
  std::vector<CellId> starts;  // every cell when empty
  int m = 4;
  std::size_t cap = 100000;
};

/// Everything a run needs, parsed from one JSON document.
struct PipelineConfig {
  FlowModel model = FlowModel::lorenz();
  IntegratorConfig integrator;
  BoxDomain domain;
  double epsilon = 1.0;
  double T = 0.5;
  int n_t = 51;
  std::vector<int> resolution;
  std::size_t collocation_cap = kDefaultCollocationCap;
  CalibrationOptions calibration;
  double delta_cap_fraction = 0.25;
  int samples_per_cell = 200;
  int tensor_order = 3;
  int m_max = 1;
  int word_length = 20;
  double fd_step = 1e-6;
  std::vector<QuantitySpec> quantities;
  OrbitSpec orbits;
  MeasureSpec measure;
  EnumerateSpec enumerate;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  std::filesystem::path output_dir = "segdyn_out";
  io::json raw;  // normalized echo of the document
};

/// Applies dotted-path overrides ("a.b=value", value parsed as JSON when it
/// can be) to the raw document before parsing.
void apply_override(io::json& doc, const std::string& assignment);

/// Parses and validates; a ValidationError lists every offending field.
PipelineConfig parse_config(const io::json& doc);
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});

/// Stage names in pipeline order.
const std::vector<std::string>& stage_names();

struct StageResult {
  std::string stage;
  std::vector<std::filesystem::path> outputs;
  std::string summary;  // one or more human-readable lines
};

/// Runs one stage, writing artifacts into cfg.output_dir and updating the
/// manifest. Throws MissingArtifactError when an upstream artifact is absent.
StageResult run_stage(const std::string& stage, const PipelineConfig& cfg);

/// Re-validates the artifacts of a stage without recomputing them.
StageResult check_stage(const std::string& stage, const PipelineConfig& cfg);

/// Random initial points inside the partition: candidate i draws a cell
/// uniformly, then a uniform point in it, from its own (seed, i) stream.
StateVector draw_partition_point(const Partition& partition, std::uint64_t seed, std::size_t i);

}  // namespace segdyn
