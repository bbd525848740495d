#pragma once

#include <map>
#include <set>

#include "segdyn/segments.hpp"

namespace segdyn {

/// Gamma with the observed transition counts behind it. Rows are sparse:
/// an entry present in row(m) is admissible; its count may be zero when the
/// pattern was given by hand rather than sampled.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  explicit TransitionMatrix(std::size_t n_cells);
  /// Dense 0/1 pattern, rows indexed from cell 1.
  static TransitionMatrix from_pattern(const std::vector<std::vector<int>>& pattern);

  std::size_t size() const { return rows_.size(); }
  bool admissible(CellId m, CellId n) const;
  std::int64_t count(CellId m, CellId n) const;
  const std::map<CellId, std::int64_t>& row(CellId m) const;
  std::vector<CellId> successors(CellId m) const;
  bool supported(CellId m) const { return !row(m).empty(); }
  std::vector<CellId> unsupported_rows() const;

  void set_admissible(CellId m, CellId n);
  void add_count(CellId m, CellId n, std::int64_t k = 1);
  void add_escapes(CellId m, std::int64_t k);
  void add_sampled(CellId m, std::int64_t k);
  std::int64_t sampled(CellId m) const { return sampled_.at(index(m)); }
  std::int64_t escaped(CellId m) const { return escaped_.at(index(m)); }
  /// Fraction of the samples drawn in cell m whose image left every cell.
  double escape_fraction(CellId m) const;

  bool operator==(const TransitionMatrix&) const = default;

 private:
  std::size_t index(CellId m) const;

  std::vector<std::map<CellId, std::int64_t>> rows_;
  std::vector<std::int64_t> sampled_;
  std::vector<std::int64_t> escaped_;
};

/// p_mn. Rows with support sum to one, unsupported rows are empty.
class MarkovMatrix {
 public:
  MarkovMatrix() = default;
  explicit MarkovMatrix(std::size_t n_cells) : rows_(n_cells) {}
  static MarkovMatrix from_dense(const std::vector<std::vector<double>>& p);
  /// counts[m][n] / landed(m); escaped samples are not in the denominator.
  static MarkovMatrix from_counts(const TransitionMatrix& gamma);

  std::size_t size() const { return rows_.size(); }
  double operator()(CellId m, CellId n) const;
  const std::map<CellId, double>& row(CellId m) const;
  void set(CellId m, CellId n, double value);

  bool operator==(const MarkovMatrix&) const = default;

 private:
  std::vector<std::map<CellId, double>> rows_;
};

/// Admissible k-tuples (n_0, ..., n_{k-1}).
struct TransitionTensor {
  int order = 2;
  std::set<Word> tuples;

  bool admissible(const Word& w) const { return tuples.count(w) != 0; }
  bool operator==(const TransitionTensor&) const = default;
};

TransitionTensor tensor_from_matrix(const TransitionMatrix& gamma);

struct SamplingOptions {
  int samples_per_cell = 200;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  int max_attempts_per_sample = 10000;  // rejection budget inside ball n minus later balls
};

/// Cell itineraries of uniform samples drawn in each cell, propagated `steps`
/// times by T. itineraries[m-1][s] starts with m and stops at the first escape,
/// so it has steps + 1 entries exactly when the sample never left.
struct Itineraries {
  int steps = 0;
  std::vector<std::vector<Word>> by_cell;
};

Itineraries sample_itineraries(const FlowModel& model, const Partition& partition, double T,
                               int steps, const IntegratorConfig& cfg,
                               const SamplingOptions& opts);

TransitionMatrix transitions_from_itineraries(const Itineraries& it, std::size_t n_cells);
TransitionTensor tensor_from_itineraries(const Itineraries& it, int order);

struct TransitionEstimate {
  TransitionMatrix gamma;
  MarkovMatrix p;
};

TransitionEstimate estimate_transitions(const FlowModel& model, const Partition& partition,
                                        double T, const IntegratorConfig& cfg,
                                        const SamplingOptions& opts);

TransitionTensor estimate_tensor(const FlowModel& model, const Partition& partition, double T,
                                 int order, const IntegratorConfig& cfg,
                                 const SamplingOptions& opts);

/// Orders 2..max_order from one sampling pass (shared itineraries).
std::vector<TransitionTensor> estimate_tensors(const FlowModel& model,
                                               const Partition& partition, double T,
                                               int max_order, const IntegratorConfig& cfg,
                                               const SamplingOptions& opts);

/// True iff every supported row has at least two admissible successors.
bool row_sensitivity(const TransitionMatrix& gamma);

struct ExpansionVerdict {
  bool expanding_up_to_depth = false;
  int depth = 0;  // tuples of order 1..depth were checked
  int m_max = 0;
  std::size_t tuples_checked = 0;
  std::vector<Word> witness_failures;
};

/// Finite-depth expansion check on tensors of orders 2..K. A tuple of order j
/// passes when some m in 1..m_max gives at least two distinct admissible
/// symbols at position j + m - 1 among its order-(j + m) extensions. Only
/// orders with the full m_max lookahead are judged, so depth = K - m_max.
ExpansionVerdict expanding_to_depth(const std::vector<TransitionTensor>& tensors, int m_max);

struct BallAdmissibility {
  CellId cell = 0;
  CellId nearest = 0;  // n_*
  double min_gap = 0.0;  // r_n
  double radius = 0.0;   // rho_n * r_n
  std::vector<CellId> successors;
};

/// Successor set of segment n by the ball rule around s_{n_*}(0).
BallAdmissibility ball_admissibility(const SegmentLibrary& lib, const std::vector<double>& rho,
                                     CellId n);

}  // namespace segdyn
