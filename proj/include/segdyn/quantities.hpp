#pragma once

#include "segdyn/symbolic.hpp"

namespace segdyn {

enum class QuantityKind { Energy, Norm, Coordinate, WeightedQuadratic };

std::string to_string(QuantityKind kind);
QuantityKind quantity_kind_from_string(const std::string& name);

/// Scalar observable Q(x).
///   Energy             1/2 |x|^2
///   Norm               |x|
///   Coordinate         x[index]
///   WeightedQuadratic  x . W x, W symmetric d x d (row-major)
struct QuantitySpec {
  QuantityKind kind = QuantityKind::Energy;
  std::size_t index = 0;
  std::vector<double> weights;

  double operator()(std::span<const double> x) const;
  void validate(std::size_t dimension) const;
  std::string label() const;
};

struct QuantityEnvelope {
  std::vector<double> sup_per_cell;
  std::vector<double> inf_per_cell;
};

QuantityEnvelope segment_envelope(const SegmentLibrary& lib, const QuantitySpec& q);

struct QuantityBounds {
  double lo = 0.0;
  double hi = 0.0;
  std::set<CellId> reachable;
};

/// Bounds of Q along any orbit over [0, mT] starting in cell n0, taken over
/// the cells reachable in m - 1 admissible steps. The lower bound is the
/// minimum of the per-cell infima so that lo <= Q <= hi.
QuantityBounds reachable_bounds(const QuantityEnvelope& env, const TransitionMatrix& gamma,
                                CellId n0, int m);

/// Same bounds over everything reachable from n0 (fixpoint of the propagation).
QuantityBounds closure_bounds(const QuantityEnvelope& env, const TransitionMatrix& gamma,
                              CellId n0);

/// Largest |Q(x) - Q(y)| over |x - y| <= eps with |y| <= radius.
double lipschitz_slack(const QuantitySpec& q, double eps, double radius);

}  // namespace segdyn
