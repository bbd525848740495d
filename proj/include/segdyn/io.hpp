#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "segdyn/quantities.hpp"

namespace segdyn::io {

using nlohmann::json;

/// {"model_id":..., "dimension":..., "parameters":{...}}; QuadraticGeneric
/// takes "linear" (d x d), "quadratic" (d x d x d) and "forcing" (d) as
/// nested row-major arrays.
FlowModel model_from_json(const json& j);
json to_json(const FlowModel& model);

IntegratorConfig integrator_from_json(const json& j);
json to_json(const IntegratorConfig& cfg);

BoxDomain domain_from_json(const json& j);
json to_json(const BoxDomain& domain);

/// {"balls":[{"index":n,"center":[...],"radius":r}, ...]}
Cover cover_from_json(const json& j);
json to_json(const Cover& cover);

QuantitySpec quantity_from_json(const json& j);
json to_json(const QuantitySpec& q);

/// Gamma, counts, p and escape fractions in one document. Dense tables up to
/// `dense_limit` cells, sparse [m, n, value] triplets above.
json transitions_to_json(const TransitionMatrix& gamma, const MarkovMatrix& p,
                         std::size_t dense_limit = 512);
TransitionEstimate transitions_from_json(const json& j);

json tensors_to_json(const std::vector<TransitionTensor>& tensors);
std::vector<TransitionTensor> tensors_from_json(const json& j);

json to_json(const QuantityEnvelope& env);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// One point per row, comma separated, no header.
void write_points_csv(const std::filesystem::path& path, const std::vector<StateVector>& pts);
std::vector<StateVector> read_points_csv(const std::filesystem::path& path);

/// `library.json` metadata plus `segments.csv` (cell,k,t,coord_0..coord_{d-1}).
void save_library(const std::filesystem::path& dir, const SegmentLibrary& lib);
SegmentLibrary load_library(const std::filesystem::path& dir);

/// Columns t,M_d.
void write_max_difference_csv(const std::filesystem::path& path, const std::vector<double>& times,
                              const std::vector<double>& md);

/// Columns orbit,window,k,t,coord_0..; appends when `append` is set.
void write_pseudo_orbit_csv(const std::filesystem::path& path, const PseudoOrbit& orbit,
                            std::size_t orbit_id, bool append);

json read_json_file(const std::filesystem::path& path);
/// Writes j.dump(2) plus a trailing newline.
void write_json_file(const std::filesystem::path& path, const json& j);

/// Hex SHA-256 of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

}  // namespace segdyn::io
