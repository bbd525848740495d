#pragma once

#include <limits>
#include <optional>
#include <random>

#include "segdyn/flow.hpp"

namespace segdyn {

/// Axis-aligned box standing in for the compact absorbing set, optionally
/// intersected with a ball.
struct BoxDomain {
  StateVector lower;
  StateVector upper;
  std::optional<StateVector> ball_center;
  double ball_radius = 0.0;

  std::size_t dimension() const { return lower.size(); }
  bool contains(std::span<const double> x) const;
  double min_side() const;
  double diagonal() const;
  void validate() const;
};

inline constexpr std::size_t kDefaultCollocationCap = 2'000'000;

/// Cell centers of the box split resolution[i] ways along axis i, in
/// row-major order (last axis fastest). Centers outside the optional ball
/// constraint are dropped.
std::vector<StateVector> collocate(const BoxDomain& domain, const std::vector<int>& resolution,
                                   std::size_t cap = kDefaultCollocationCap);

struct CalibrationOptions {
  int boundary_samples = 26;  // random sphere directions on top of the 2d axis points
  int time_samples = 51;      // grid over [0, T] on which diameters are measured
  double max_delta = std::numeric_limits<double>::infinity();
  double min_delta = 1e-6;
  double rel_tol = 0.005;
  std::uint64_t seed = 0;
};

struct DeltaCalibration {
  double delta = 0.0;
  double diameter = 0.0;  // empirical sup-diameter at the returned delta
  int sphere_points = 0;
  bool capped = false;
};

/// Empirical sup over the time grid of the diameter of F^t applied to the
/// center and delta * directions around it.
double evolved_ball_diameter(const FlowModel& model, const StateVector& center, double delta,
                             const std::vector<StateVector>& directions, double T,
                             int time_samples, const IntegratorConfig& cfg);

/// Unit directions used to probe the ball around `center`: +-e_i then
/// `random_count` Gaussian directions from the (seed, stream) stream.
std::vector<StateVector> probe_directions(std::size_t dimension, int random_count,
                                          std::uint64_t seed, std::uint64_t stream);

/// Largest delta (geometric bisection, rel_tol) whose probed evolved ball stays
/// within epsilon in diameter over [0, T]. `stream` decorrelates centers.
DeltaCalibration calibrate_delta(const FlowModel& model, const StateVector& center, double T,
                                 double epsilon, const IntegratorConfig& cfg,
                                 const CalibrationOptions& opts = {}, std::uint64_t stream = 0);

struct CoverBall {
  CellId index = 0;
  StateVector center;
  double radius = 0.0;
};

struct Cover {
  std::vector<CoverBall> balls;

  std::size_t size() const { return balls.size(); }
  std::size_t dimension() const { return balls.empty() ? 0 : balls.front().center.size(); }
  void validate() const;
};

/// Drops balls in descending index order whenever the remaining balls still
/// cover every domain sample, then renumbers 1..N' keeping the order.
Cover minimal_cover(const std::vector<StateVector>& centers, const std::vector<double>& radii,
                    const std::vector<StateVector>& domain_samples);

/// Disjoint cells from an ordered cover: x belongs to the largest-index ball
/// containing it, i.e. A_n = B_n minus every later ball.
class Partition {
 public:
  explicit Partition(Cover cover);

  const Cover& cover() const { return cover_; }
  std::size_t size() const { return cover_.size(); }
  std::size_t dimension() const { return cover_.dimension(); }
  const CoverBall& ball(CellId n) const;

  bool in_ball(CellId n, std::span<const double> x) const;
  std::optional<CellId> assign_cell(std::span<const double> x) const;
  /// Every ball containing x, ascending.
  std::vector<CellId> containing(std::span<const double> x) const;

 private:
  Cover cover_;
  double max_radius_ = 0.0;
  // Ball indices sorted by the first center coordinate for slab pruning.
  std::vector<std::size_t> by_x_;
  std::vector<double> sorted_x_;
};

/// Uniform point in ball n that the partition assigns to cell n, by rejection
/// against assign_cell. nullopt once `max_attempts` draws are used up.
std::optional<StateVector> sample_in_cell(const Partition& partition, CellId n,
                                          std::mt19937_64& rng, int max_attempts);

struct CellMeasure {
  std::vector<double> weights;
  std::size_t covered = 0;
  std::size_t total = 0;
};

CellMeasure cell_measure(const Partition& partition, const std::vector<StateVector>& samples);

/// -sum mu log mu with 0 log 0 = 0.
double metric_entropy(const CellMeasure& mu);

}  // namespace segdyn
