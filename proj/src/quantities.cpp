#include "segdyn/quantities.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <limits>

namespace segdyn {

std::string to_string(QuantityKind kind) {
  switch (kind) {
    case QuantityKind::Energy:
      return "Energy";
    case QuantityKind::Norm:
      return "Norm";
    case QuantityKind::Coordinate:
      return "Coordinate";
    case QuantityKind::WeightedQuadratic:
      return "WeightedQuadratic";
  }
  return "?";
}

QuantityKind quantity_kind_from_string(const std::string& name) {
  if (name == "Energy") return QuantityKind::Energy;
  if (name == "Norm") return QuantityKind::Norm;
  if (name == "Coordinate") return QuantityKind::Coordinate;
  if (name == "WeightedQuadratic") return QuantityKind::WeightedQuadratic;
  throw ValidationError("unknown quantity kind '" + name + "'");
}

double QuantitySpec::operator()(std::span<const double> x) const {
  switch (kind) {
    case QuantityKind::Energy: {
      const double r = norm(x);
      return 0.5 * r * r;
    }
    case QuantityKind::Norm:
      return norm(x);
    case QuantityKind::Coordinate:
      return x[index];
    case QuantityKind::WeightedQuadratic: {
      const std::size_t d = x.size();
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) acc += x[i] * weights[i * d + j] * x[j];
      return acc;
    }
  }
  return 0.0;
}

void QuantitySpec::validate(std::size_t d) const {
  if (kind == QuantityKind::Coordinate && index >= d)
    throw ValidationError("Coordinate quantity index " + std::to_string(index) +
                          " out of range for dimension " + std::to_string(d));
  if (kind == QuantityKind::WeightedQuadratic) {
    if (weights.size() != d * d) throw ValidationError("WeightedQuadratic W must be d x d");
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j)
        if (std::abs(weights[i * d + j] - weights[j * d + i]) >
            1e-12 * std::max(1.0, std::abs(weights[i * d + j])))
          throw ValidationError("WeightedQuadratic W must be symmetric");
  }
}

std::string QuantitySpec::label() const {
  if (kind == QuantityKind::Coordinate) return "Coordinate[" + std::to_string(index) + "]";
  return to_string(kind);
}

QuantityEnvelope segment_envelope(const SegmentLibrary& lib, const QuantitySpec& q) {
  lib.validate();
  q.validate(lib.segments.front().samples.states.front().size());
  QuantityEnvelope env;
  env.sup_per_cell.reserve(lib.size());
  env.inf_per_cell.reserve(lib.size());
  for (const auto& seg : lib.segments) {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& x : seg.samples.states) {
      const double v = q(x);
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    env.sup_per_cell.push_back(hi);
    env.inf_per_cell.push_back(lo);
  }
  return env;
}

namespace {

QuantityBounds bounds_over(const QuantityEnvelope& env, std::set<CellId> cells) {
  QuantityBounds b;
  b.lo = std::numeric_limits<double>::infinity();
  b.hi = -std::numeric_limits<double>::infinity();
  for (CellId n : cells) {
    const auto k = static_cast<std::size_t>(n - 1);
    b.lo = std::min(b.lo, env.inf_per_cell.at(k));
    b.hi = std::max(b.hi, env.sup_per_cell.at(k));
  }
  b.reachable = std::move(cells);
  return b;
}

void check_envelope(const QuantityEnvelope& env, const TransitionMatrix& gamma) {
  if (env.sup_per_cell.size() != gamma.size() || env.inf_per_cell.size() != gamma.size())
    throw ValidationError("envelope and transition matrix disagree on the number of cells");
}

}  // namespace

QuantityBounds reachable_bounds(const QuantityEnvelope& env, const TransitionMatrix& gamma,
                                CellId n0, int m) {
  check_envelope(env, gamma);
  if (m < 1) throw ValidationError("reachable_bounds requires m >= 1");
  if (n0 < 1 || static_cast<std::size_t>(n0) > gamma.size())
    throw ValidationError("start cell " + std::to_string(n0) + " out of range");
  // Forward layers without dead-end pruning: an orbit may leave the partition
  // later, but its samples up to then still sit on reachable cells.
  std::set<CellId> seen{n0};
  std::set<CellId> layer{n0};
  for (int j = 1; j < m && !layer.empty(); ++j) {
    std::set<CellId> next;
    for (CellId c : layer)
      for (const auto& [n, count] : gamma.row(c)) next.insert(n);
    seen.insert(next.begin(), next.end());
    layer = std::move(next);
  }
  return bounds_over(env, std::move(seen));
}

QuantityBounds closure_bounds(const QuantityEnvelope& env, const TransitionMatrix& gamma,
                              CellId n0) {
  check_envelope(env, gamma);
  return bounds_over(env, reachable_closure(gamma, n0));
}

double lipschitz_slack(const QuantitySpec& q, double eps, double radius) {
  switch (q.kind) {
    case QuantityKind::Energy:
      // |x|^2/2 - |y|^2/2 = (x - y).(x + y)/2
      return eps * (radius + 0.5 * eps);
    case QuantityKind::Norm:
    case QuantityKind::Coordinate:
      return eps;
    case QuantityKind::WeightedQuadratic: {
      const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(q.weights.size())));
      Eigen::Map<const Eigen::MatrixXd> w(q.weights.data(), d, d);
      const double op = Eigen::JacobiSVD<Eigen::MatrixXd>(w).singularValues()(0);
      return op * eps * (2.0 * radius + eps);
    }
  }
  return 0.0;
}

}  // namespace segdyn
