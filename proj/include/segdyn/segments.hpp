#pragma once

#include "segdyn/cover.hpp"

namespace segdyn {

struct Segment {
  CellId cell = 0;
  TrajectorySample samples;
};

/// The N segments s_n(t) = F^t(x_n), t in [0, T], on one shared uniform grid.
struct SegmentLibrary {
  std::vector<Segment> segments;
  double T = 0.0;
  int n_t = 0;
  double epsilon = 0.0;
  ModelId model_id = ModelId::LinearDiagonal;
  IntegratorConfig integrator;

  std::size_t size() const { return segments.size(); }
  const Segment& segment(CellId n) const;
  /// s_n(0), the cover center.
  const StateVector& start(CellId n) const { return segment(n).samples.states.front(); }
  /// s_n(T).
  const StateVector& end(CellId n) const { return segment(n).samples.states.back(); }
  void validate() const;
};

SegmentLibrary build_segments(const FlowModel& model, const Cover& cover, double T, int n_t,
                              const IntegratorConfig& cfg, double epsilon = 0.0,
                              unsigned jobs = 1);

/// M_d(t_k) = max over segment pairs of |s_m(t_k) - s_n(t_k)|.
std::vector<double> max_difference(const SegmentLibrary& lib, unsigned jobs = 1);

}  // namespace segdyn
