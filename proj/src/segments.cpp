#include "segdyn/segments.hpp"

#include "segdyn/parallel.hpp"

namespace segdyn {

const Segment& SegmentLibrary::segment(CellId n) const {
  if (n < 1 || static_cast<std::size_t>(n) > segments.size())
    throw ValidationError("segment " + std::to_string(n) + " out of range 1.." +
                          std::to_string(segments.size()));
  return segments[static_cast<std::size_t>(n - 1)];
}

void SegmentLibrary::validate() const {
  if (segments.empty()) throw ValidationError("segment library is empty");
  if (!(T > 0.0) || n_t < 2) throw ValidationError("segment library needs T > 0 and n_t >= 2");
  const auto& grid = segments.front().samples.times;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& s = segments[k];
    if (s.cell != static_cast<CellId>(k + 1))
      throw ValidationError("segments must be numbered consecutively from 1");
    if (s.samples.times.size() != static_cast<std::size_t>(n_t) ||
        s.samples.states.size() != static_cast<std::size_t>(n_t))
      throw ValidationError("segment " + std::to_string(s.cell) + " does not hold n_t samples");
    if (s.samples.times != grid)
      throw ValidationError("segment " + std::to_string(s.cell) + " has a different time grid");
  }
}

SegmentLibrary build_segments(const FlowModel& model, const Cover& cover, double T, int n_t,
                              const IntegratorConfig& cfg, double epsilon, unsigned jobs) {
  if (!(T > 0.0)) throw ValidationError("build_segments requires T > 0");
  if (n_t < 2) throw ValidationError("build_segments requires n_t >= 2");
  cover.validate();
  SegmentLibrary lib;
  lib.T = T;
  lib.n_t = n_t;
  lib.epsilon = epsilon;
  lib.model_id = model.id();
  lib.integrator = cfg;
  lib.segments.resize(cover.size());
  parallel_for(cover.size(), jobs, [&](std::size_t k) {
    const auto& ball = cover.balls[k];
    try {
      lib.segments[k] = {ball.index, sample_trajectory(model, ball.center, T, n_t, cfg)};
    } catch (const NumericsError& e) {
      throw NumericsError("segment for cell " + std::to_string(ball.index) + ": " + e.what());
    }
  });
  return lib;
}

std::vector<double> max_difference(const SegmentLibrary& lib, unsigned jobs) {
  lib.validate();
  const std::size_t n = lib.size();
  std::vector<double> md(static_cast<std::size_t>(lib.n_t), 0.0);
  parallel_for(md.size(), jobs, [&](std::size_t k) {
    double best = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        best = std::max(best, distance(lib.segments[a].samples.states[k],
                                       lib.segments[b].samples.states[k]));
    md[k] = best;
  });
  return md;
}

}  // namespace segdyn
