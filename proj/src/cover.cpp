#include "segdyn/cover.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "segdyn/parallel.hpp"

namespace segdyn {

namespace {

std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

}  // namespace

bool BoxDomain::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  if (ball_center && distance(x, *ball_center) > ball_radius) return false;
  return true;
}

double BoxDomain::min_side() const {
  double s = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lower.size(); ++i) s = std::min(s, upper[i] - lower[i]);
  return s;
}

double BoxDomain::diagonal() const { return distance(lower, upper); }

void BoxDomain::validate() const {
  if (lower.empty()) throw ValidationError("domain must have at least one axis");
  if (lower.size() != upper.size())
    throw ValidationError("domain lower and upper have different lengths");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      std::ostringstream os;
      os << "domain axis " << i << " needs finite lower < upper, got [" << lower[i] << ", "
         << upper[i] << "]";
      throw ValidationError(os.str());
    }
  }
  if (ball_center) {
    if (ball_center->size() != lower.size())
      throw ValidationError("domain ball center has the wrong dimension");
    if (!(ball_radius > 0.0)) throw ValidationError("domain ball radius must be positive");
  }
}

std::vector<StateVector> collocate(const BoxDomain& domain, const std::vector<int>& resolution,
                                   std::size_t cap) {
  domain.validate();
  const std::size_t d = domain.dimension();
  if (resolution.size() != d)
    throw ValidationError("resolution needs one entry per domain axis");
  double count = 1.0;
  for (int r : resolution) {
    if (r < 1) throw ValidationError("resolution entries must be >= 1");
    count *= r;
  }
  if (count > static_cast<double>(cap)) {
    std::ostringstream os;
    os << "dimension explosion: " << count << " collocation points requested, cap is " << cap
       << " (10 points per axis already means 10^d points)";
    throw ValidationError(os.str());
  }

  std::vector<StateVector> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<int> idx(d, 0);
  StateVector x(d);
  for (std::size_t n = 0; n < static_cast<std::size_t>(count); ++n) {
    for (std::size_t i = 0; i < d; ++i) {
      const double w = (domain.upper[i] - domain.lower[i]) / resolution[i];
      x[i] = domain.lower[i] + w * (idx[i] + 0.5);
    }
    if (!domain.ball_center || distance(x, *domain.ball_center) <= domain.ball_radius)
      out.push_back(x);
    for (std::size_t i = d; i-- > 0;) {
      if (++idx[i] < resolution[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

std::vector<StateVector> probe_directions(std::size_t d, int random_count, std::uint64_t seed,
                                          std::uint64_t stream) {
  std::vector<StateVector> dirs;
  dirs.reserve(2 * d + static_cast<std::size_t>(std::max(random_count, 0)));
  for (std::size_t i = 0; i < d; ++i) {
    StateVector e(d, 0.0);
    e[i] = 1.0;
    dirs.push_back(e);
    e[i] = -1.0;
    dirs.push_back(e);
  }
  auto rng = task_rng(seed, 0xCA11B, stream);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int r = 0; r < random_count; ++r) {
    StateVector v(d);
    double len = 0.0;
    while (len < 1e-12) {
      for (auto& c : v) c = gauss(rng);
      len = norm(v);
    }
    for (auto& c : v) c /= len;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

double evolved_ball_diameter(const FlowModel& model, const StateVector& center, double delta,
                             const std::vector<StateVector>& directions, double T,
                             int time_samples, const IntegratorConfig& cfg) {
  const std::size_t d = model.dimension();
  const std::size_t p = directions.size() + 1;
  std::vector<double> pts(p * d);
  std::copy(center.begin(), center.end(), pts.begin());
  for (std::size_t k = 0; k < directions.size(); ++k)
    for (std::size_t i = 0; i < d; ++i) pts[(k + 1) * d + i] = center[i] + delta * directions[k][i];

  const auto diameter_now = [&] {
    double best = 0.0;
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a + 1; b < p; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double diff = pts[a * d + i] - pts[b * d + i];
          s += diff * diff;
        }
        best = std::max(best, s);
      }
    return std::sqrt(best);
  };

  Rk4Stepper stepper(model, cfg);
  double sup = diameter_now();
  const double dt = T / static_cast<double>(std::max(time_samples, 2) - 1);
  for (int k = 1; k < std::max(time_samples, 2); ++k) {
    for (std::size_t a = 0; a < p; ++a)
      stepper.advance(std::span<double>(pts.data() + a * d, d), dt, dt * (k - 1));
    sup = std::max(sup, diameter_now());
  }
  return sup;
}

DeltaCalibration calibrate_delta(const FlowModel& model, const StateVector& center, double T,
                                 double epsilon, const IntegratorConfig& cfg,
                                 const CalibrationOptions& opts, std::uint64_t stream) {
  validate(model, center);
  if (!(epsilon > 0.0)) throw ValidationError("calibrate_delta requires epsilon > 0");
  if (!(T > 0.0)) throw ValidationError("calibrate_delta requires T > 0");
  if (!(opts.min_delta > 0.0) || !(opts.max_delta > 0.0))
    throw ValidationError("calibration delta bounds must be positive");

  const auto dirs = probe_directions(model.dimension(), opts.boundary_samples, opts.seed, stream);
  const auto diam = [&](double delta) {
    return evolved_ball_diameter(model, center, delta, dirs, T, opts.time_samples, cfg);
  };

  DeltaCalibration out;
  out.sphere_points = static_cast<int>(dirs.size());

  // The initial ball alone has diameter 2 delta.
  const double hi_bound = std::min(opts.max_delta, epsilon / 2.0);
  double hi = hi_bound;
  const double d_hi = diam(hi);
  if (d_hi <= epsilon) {
    out.delta = hi;
    out.diameter = d_hi;
    out.capped = hi == opts.max_delta;
    return out;
  }
  double lo = std::min(opts.min_delta, hi);
  double d_lo = diam(lo);
  if (d_lo > epsilon) {
    std::ostringstream os;
    os << "calibration failure at center " << format_point(center) << ": diameter " << d_lo
       << " exceeds epsilon " << epsilon << " even at the delta floor " << lo;
    throw NumericsError(os.str());
  }
  while (hi / lo > 1.0 + opts.rel_tol) {
    const double mid = std::sqrt(lo * hi);
    const double d_mid = diam(mid);
    if (d_mid <= epsilon) {
      lo = mid;
      d_lo = d_mid;
    } else {
      hi = mid;
    }
  }
  out.delta = lo;
  out.diameter = d_lo;
  return out;
}

void Cover::validate() const {
  const std::size_t d = dimension();
  for (std::size_t k = 0; k < balls.size(); ++k) {
    const auto& b = balls[k];
    if (b.index != static_cast<CellId>(k + 1))
      throw ValidationError("cover ball indices must run consecutively from 1");
    if (b.center.size() != d) throw ValidationError("cover balls have mixed dimensions");
    if (!all_finite(b.center)) throw ValidationError("cover ball center is not finite");
    if (!(b.radius > 0.0) || !std::isfinite(b.radius))
      throw ValidationError("cover ball radius must be positive and finite");
  }
}

Cover minimal_cover(const std::vector<StateVector>& centers, const std::vector<double>& radii,
                    const std::vector<StateVector>& domain_samples) {
  if (centers.size() != radii.size())
    throw ValidationError("minimal_cover needs one radius per center");
  Cover input;
  for (std::size_t k = 0; k < centers.size(); ++k)
    input.balls.push_back({static_cast<CellId>(k + 1), centers[k], radii[k]});
  input.validate();
  const Partition index(input);

  // members[n] = samples inside ball n; coverage[s] = number of live balls holding s.
  const std::size_t n_balls = centers.size();
  std::vector<std::vector<std::size_t>> members(n_balls);
  std::vector<int> coverage(domain_samples.size(), 0);
  for (std::size_t s = 0; s < domain_samples.size(); ++s) {
    if (domain_samples[s].size() != index.dimension())
      throw ValidationError("minimal_cover: sample dimension does not match the balls");
    for (CellId n : index.containing(domain_samples[s])) {
      members[static_cast<std::size_t>(n - 1)].push_back(s);
      ++coverage[s];
    }
    if (coverage[s] == 0)
      throw ValidationError("minimal_cover: sample " + format_point(domain_samples[s]) +
                            " is not covered by any input ball");
  }

  std::vector<bool> keep(n_balls, true);
  for (std::size_t k = n_balls; k-- > 0;) {
    const bool removable = std::all_of(members[k].begin(), members[k].end(),
                                       [&](std::size_t s) { return coverage[s] >= 2; });
    if (!removable) continue;
    keep[k] = false;
    for (std::size_t s : members[k]) --coverage[s];
  }

  Cover out;
  for (std::size_t k = 0; k < n_balls; ++k)
    if (keep[k])
      out.balls.push_back({static_cast<CellId>(out.balls.size() + 1), centers[k], radii[k]});
  return out;
}

Partition::Partition(Cover cover) : cover_(std::move(cover)) {
  cover_.validate();
  by_x_.resize(cover_.size());
  std::iota(by_x_.begin(), by_x_.end(), 0);
  std::stable_sort(by_x_.begin(), by_x_.end(), [&](std::size_t a, std::size_t b) {
    return cover_.balls[a].center[0] < cover_.balls[b].center[0];
  });
  sorted_x_.reserve(by_x_.size());
  for (std::size_t k : by_x_) {
    sorted_x_.push_back(cover_.balls[k].center[0]);
    max_radius_ = std::max(max_radius_, cover_.balls[k].radius);
  }
}

const CoverBall& Partition::ball(CellId n) const {
  if (n < 1 || static_cast<std::size_t>(n) > cover_.size())
    throw ValidationError("cell id " + std::to_string(n) + " out of range 1.." +
                          std::to_string(cover_.size()));
  return cover_.balls[static_cast<std::size_t>(n - 1)];
}

bool Partition::in_ball(CellId n, std::span<const double> x) const {
  const auto& b = cover_.balls[static_cast<std::size_t>(n - 1)];
  return distance(x, b.center) <= b.radius;
}

std::optional<CellId> Partition::assign_cell(std::span<const double> x) const {
  if (cover_.balls.empty()) return std::nullopt;
  const auto first = std::lower_bound(sorted_x_.begin(), sorted_x_.end(), x[0] - max_radius_);
  const auto last = std::upper_bound(first, sorted_x_.end(), x[0] + max_radius_);
  std::size_t best = 0;
  bool found = false;
  for (auto it = first; it != last; ++it) {
    const std::size_t k = by_x_[static_cast<std::size_t>(it - sorted_x_.begin())];
    if ((!found || k > best) && in_ball(static_cast<CellId>(k + 1), x)) {
      best = k;
      found = true;
    }
  }
  if (!found) return std::nullopt;
  return static_cast<CellId>(best + 1);
}

std::vector<CellId> Partition::containing(std::span<const double> x) const {
  std::vector<CellId> out;
  const auto first = std::lower_bound(sorted_x_.begin(), sorted_x_.end(), x[0] - max_radius_);
  const auto last = std::upper_bound(first, sorted_x_.end(), x[0] + max_radius_);
  for (auto it = first; it != last; ++it) {
    const auto n = static_cast<CellId>(by_x_[static_cast<std::size_t>(it - sorted_x_.begin())] + 1);
    if (in_ball(n, x)) out.push_back(n);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<StateVector> sample_in_cell(const Partition& partition, CellId n,
                                          std::mt19937_64& rng, int max_attempts) {
  const CoverBall& b = partition.ball(n);
  const std::size_t d = b.center.size();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  StateVector x(d);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    double len = 0.0;
    for (auto& c : x) c = gauss(rng);
    len = norm(x);
    if (len < 1e-300) continue;
    const double r = b.radius * std::pow(unif(rng), 1.0 / static_cast<double>(d));
    for (std::size_t i = 0; i < d; ++i) x[i] = b.center[i] + r * x[i] / len;
    const auto cell = partition.assign_cell(x);
    if (cell && *cell == n) return x;
  }
  return std::nullopt;
}

CellMeasure cell_measure(const Partition& partition, const std::vector<StateVector>& samples) {
  if (samples.empty()) throw ValidationError("cell_measure needs at least one sample");
  CellMeasure mu;
  mu.total = samples.size();
  std::vector<std::size_t> counts(partition.size(), 0);
  for (const auto& x : samples) {
    if (x.size() != partition.dimension())
      throw ValidationError("sample dimension does not match the partition");
    if (const auto cell = partition.assign_cell(x)) {
      ++counts[static_cast<std::size_t>(*cell - 1)];
      ++mu.covered;
    }
  }
  if (mu.covered == 0) throw NumericsError("cell_measure: no sample falls in any cell");
  mu.weights.resize(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k)
    mu.weights[k] = static_cast<double>(counts[k]) / static_cast<double>(mu.covered);
  return mu;
}

double metric_entropy(const CellMeasure& mu) {
  double total = 0.0;
  for (double w : mu.weights) {
    if (w < 0.0 || !std::isfinite(w)) throw ValidationError("cell weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("cell weights are not normalized (sum " + std::to_string(total) + ")");
  CompensatedSum h;
  for (double w : mu.weights)
    if (w > 0.0) h.add(-w * std::log(w));
  return h.value();
}

}  // namespace segdyn
