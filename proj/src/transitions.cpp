#include "segdyn/transitions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "segdyn/parallel.hpp"

namespace segdyn {

namespace {

constexpr std::uint32_t kTransitionStream = 0x7A5;

}  // namespace

TransitionMatrix::TransitionMatrix(std::size_t n_cells)
    : rows_(n_cells), sampled_(n_cells, 0), escaped_(n_cells, 0) {}

TransitionMatrix TransitionMatrix::from_pattern(const std::vector<std::vector<int>>& pattern) {
  TransitionMatrix g(pattern.size());
  for (std::size_t m = 0; m < pattern.size(); ++m) {
    if (pattern[m].size() != pattern.size()) throw ValidationError("transition pattern must be square");
    for (std::size_t n = 0; n < pattern.size(); ++n)
      if (pattern[m][n] != 0) g.set_admissible(static_cast<CellId>(m + 1), static_cast<CellId>(n + 1));
  }
  return g;
}

std::size_t TransitionMatrix::index(CellId m) const {
  if (m < 1 || static_cast<std::size_t>(m) > rows_.size())
    throw ValidationError("cell id " + std::to_string(m) + " out of range 1.." +
                          std::to_string(rows_.size()));
  return static_cast<std::size_t>(m - 1);
}

bool TransitionMatrix::admissible(CellId m, CellId n) const {
  index(n);
  return rows_[index(m)].count(n) != 0;
}

std::int64_t TransitionMatrix::count(CellId m, CellId n) const {
  index(n);
  const auto& r = rows_[index(m)];
  const auto it = r.find(n);
  return it == r.end() ? 0 : it->second;
}

const std::map<CellId, std::int64_t>& TransitionMatrix::row(CellId m) const {
  return rows_[index(m)];
}

std::vector<CellId> TransitionMatrix::successors(CellId m) const {
  std::vector<CellId> out;
  for (const auto& [n, c] : row(m)) out.push_back(n);
  return out;
}

std::vector<CellId> TransitionMatrix::unsupported_rows() const {
  std::vector<CellId> out;
  for (std::size_t m = 0; m < rows_.size(); ++m)
    if (rows_[m].empty()) out.push_back(static_cast<CellId>(m + 1));
  return out;
}

void TransitionMatrix::set_admissible(CellId m, CellId n) {
  index(n);
  rows_[index(m)].try_emplace(n, 0);
}

void TransitionMatrix::add_count(CellId m, CellId n, std::int64_t k) {
  index(n);
  rows_[index(m)][n] += k;
}

void TransitionMatrix::add_escapes(CellId m, std::int64_t k) { escaped_[index(m)] += k; }
void TransitionMatrix::add_sampled(CellId m, std::int64_t k) { sampled_[index(m)] += k; }

double TransitionMatrix::escape_fraction(CellId m) const {
  const auto s = sampled(m);
  return s == 0 ? 0.0 : static_cast<double>(escaped(m)) / static_cast<double>(s);
}

MarkovMatrix MarkovMatrix::from_dense(const std::vector<std::vector<double>>& p) {
  MarkovMatrix out(p.size());
  for (std::size_t m = 0; m < p.size(); ++m) {
    if (p[m].size() != p.size()) throw ValidationError("Markov matrix must be square");
    double sum = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
      if (!(p[m][n] >= 0.0 && p[m][n] <= 1.0))
        throw ValidationError("Markov entries must lie in [0, 1]");
      sum += p[m][n];
      if (p[m][n] != 0.0) out.set(static_cast<CellId>(m + 1), static_cast<CellId>(n + 1), p[m][n]);
    }
    if (sum != 0.0 && std::abs(sum - 1.0) > 1e-9)
      throw ValidationError("Markov row " + std::to_string(m + 1) + " sums to " + std::to_string(sum));
  }
  return out;
}

MarkovMatrix MarkovMatrix::from_counts(const TransitionMatrix& gamma) {
  MarkovMatrix out(gamma.size());
  for (std::size_t m = 1; m <= gamma.size(); ++m) {
    const auto cm = static_cast<CellId>(m);
    std::int64_t landed = 0;
    for (const auto& [n, c] : gamma.row(cm)) landed += c;
    if (landed == 0) continue;
    for (const auto& [n, c] : gamma.row(cm))
      if (c > 0) out.set(cm, n, static_cast<double>(c) / static_cast<double>(landed));
  }
  return out;
}

double MarkovMatrix::operator()(CellId m, CellId n) const {
  const auto& r = row(m);
  if (n < 1 || static_cast<std::size_t>(n) > rows_.size())
    throw ValidationError("cell id out of range in Markov matrix");
  const auto it = r.find(n);
  return it == r.end() ? 0.0 : it->second;
}

const std::map<CellId, double>& MarkovMatrix::row(CellId m) const {
  if (m < 1 || static_cast<std::size_t>(m) > rows_.size())
    throw ValidationError("cell id out of range in Markov matrix");
  return rows_[static_cast<std::size_t>(m - 1)];
}

void MarkovMatrix::set(CellId m, CellId n, double value) {
  if (m < 1 || n < 1 || static_cast<std::size_t>(m) > rows_.size() ||
      static_cast<std::size_t>(n) > rows_.size())
    throw ValidationError("cell id out of range in Markov matrix");
  if (value < 0.0 || !std::isfinite(value))
    throw ValidationError("Markov probabilities must be finite and nonnegative");
  auto& r = rows_[static_cast<std::size_t>(m - 1)];
  if (value == 0.0)
    r.erase(n);
  else
    r[n] = value;
}

TransitionTensor tensor_from_matrix(const TransitionMatrix& gamma) {
  TransitionTensor t;
  t.order = 2;
  for (std::size_t m = 1; m <= gamma.size(); ++m)
    for (const auto& [n, c] : gamma.row(static_cast<CellId>(m)))
      t.tuples.insert({static_cast<CellId>(m), n});
  return t;
}

Itineraries sample_itineraries(const FlowModel& model, const Partition& partition, double T,
                               int steps, const IntegratorConfig& cfg,
                               const SamplingOptions& opts) {
  if (opts.samples_per_cell < 1) throw ValidationError("samples_per_cell must be >= 1");
  if (steps < 1) throw ValidationError("itineraries need at least one step");
  if (!(T >= 0.0)) throw ValidationError("transition horizon T must be >= 0");
  if (partition.dimension() != model.dimension())
    throw ValidationError("partition dimension does not match the model");
  validate(cfg);

  Itineraries out;
  out.steps = steps;
  out.by_cell.resize(partition.size());
  parallel_for(partition.size(), opts.jobs, [&](std::size_t k) {
    const auto cell = static_cast<CellId>(k + 1);
    Rk4Stepper stepper(model, cfg);
    auto& words = out.by_cell[k];
    words.resize(static_cast<std::size_t>(opts.samples_per_cell));
    for (int s = 0; s < opts.samples_per_cell; ++s) {
      auto rng = task_rng(opts.seed, kTransitionStream, k, static_cast<std::uint64_t>(s));
      auto x = sample_in_cell(partition, cell, rng, opts.max_attempts_per_sample);
      if (!x)
        throw NumericsError("rejection sampling failed in cell " + std::to_string(cell) +
                            " after " + std::to_string(opts.max_attempts_per_sample) +
                            " attempts (cell is shadowed by later balls)");
      Word& w = words[static_cast<std::size_t>(s)];
      w.reserve(static_cast<std::size_t>(steps) + 1);
      w.push_back(cell);
      for (int j = 1; j <= steps; ++j) {
        stepper.advance(*x, T, T * (j - 1));
        const auto next = partition.assign_cell(*x);
        if (!next) break;
        w.push_back(*next);
      }
    }
  });
  return out;
}

TransitionMatrix transitions_from_itineraries(const Itineraries& it, std::size_t n_cells) {
  TransitionMatrix g(n_cells);
  for (std::size_t k = 0; k < it.by_cell.size(); ++k) {
    const auto m = static_cast<CellId>(k + 1);
    g.add_sampled(m, static_cast<std::int64_t>(it.by_cell[k].size()));
    for (const Word& w : it.by_cell[k]) {
      if (w.size() >= 2)
        g.add_count(m, w[1]);
      else
        g.add_escapes(m, 1);
    }
  }
  return g;
}

TransitionTensor tensor_from_itineraries(const Itineraries& it, int order) {
  if (order < 2) throw ValidationError("tensor order must be >= 2");
  if (order - 1 > it.steps)
    throw ValidationError("itineraries too short for tensor order " + std::to_string(order));
  TransitionTensor t;
  t.order = order;
  for (const auto& words : it.by_cell)
    for (const Word& w : words)
      if (w.size() >= static_cast<std::size_t>(order))
        t.tuples.emplace(w.begin(), w.begin() + order);
  return t;
}

TransitionEstimate estimate_transitions(const FlowModel& model, const Partition& partition,
                                        double T, const IntegratorConfig& cfg,
                                        const SamplingOptions& opts) {
  const auto it = sample_itineraries(model, partition, T, 1, cfg, opts);
  TransitionEstimate est;
  est.gamma = transitions_from_itineraries(it, partition.size());
  est.p = MarkovMatrix::from_counts(est.gamma);
  return est;
}

TransitionTensor estimate_tensor(const FlowModel& model, const Partition& partition, double T,
                                 int order, const IntegratorConfig& cfg,
                                 const SamplingOptions& opts) {
  if (order < 2) throw ValidationError("tensor order must be >= 2");
  const auto it = sample_itineraries(model, partition, T, order - 1, cfg, opts);
  return tensor_from_itineraries(it, order);
}

std::vector<TransitionTensor> estimate_tensors(const FlowModel& model,
                                               const Partition& partition, double T,
                                               int max_order, const IntegratorConfig& cfg,
                                               const SamplingOptions& opts) {
  if (max_order < 2) throw ValidationError("tensor order must be >= 2");
  const auto it = sample_itineraries(model, partition, T, max_order - 1, cfg, opts);
  std::vector<TransitionTensor> out;
  for (int k = 2; k <= max_order; ++k) out.push_back(tensor_from_itineraries(it, k));
  return out;
}

bool row_sensitivity(const TransitionMatrix& gamma) {
  bool any = false;
  for (std::size_t m = 1; m <= gamma.size(); ++m) {
    const auto& r = gamma.row(static_cast<CellId>(m));
    if (r.empty()) continue;
    any = true;
    if (r.size() < 2) return false;
  }
  return any;
}

ExpansionVerdict expanding_to_depth(const std::vector<TransitionTensor>& tensors, int m_max) {
  if (m_max < 1) throw ValidationError("m_max must be >= 1");
  if (tensors.empty()) throw ValidationError("expanding_to_depth needs tensors of order 2..K");
  for (std::size_t k = 0; k < tensors.size(); ++k)
    if (tensors[k].order != static_cast<int>(k) + 2)
      throw ValidationError("missing tensor order " + std::to_string(k + 2));
  const int max_order = static_cast<int>(tensors.size()) + 1;
  const int depth = max_order - m_max;
  if (depth < 1)
    throw ValidationError("tensors up to order " + std::to_string(max_order) +
                          " leave no room for lookahead m_max=" + std::to_string(m_max));

  // by_order[j] holds the admissible tuples of length j; order 1 is the set of start symbols.
  std::vector<const std::set<Word>*> by_order(static_cast<std::size_t>(max_order) + 1, nullptr);
  std::set<Word> singles;
  for (const Word& w : tensors.front().tuples) singles.insert(Word{w.front()});
  by_order[1] = &singles;
  for (const auto& t : tensors) by_order[static_cast<std::size_t>(t.order)] = &t.tuples;

  const auto distinct_extensions = [&](const Word& w, int length) {
    const auto& pool = *by_order[static_cast<std::size_t>(length)];
    std::set<CellId> last;
    for (auto it = pool.lower_bound(w); it != pool.end(); ++it) {
      if (!std::equal(w.begin(), w.end(), it->begin())) break;
      last.insert(it->back());
      if (last.size() >= 2) break;
    }
    return last.size();
  };

  ExpansionVerdict v;
  v.depth = depth;
  v.m_max = m_max;
  v.expanding_up_to_depth = true;
  for (int j = 1; j <= depth; ++j) {
    for (const Word& w : *by_order[static_cast<std::size_t>(j)]) {
      ++v.tuples_checked;
      bool ok = false;
      for (int m = 1; m <= m_max && !ok; ++m) ok = distinct_extensions(w, j + m) >= 2;
      if (!ok) {
        v.expanding_up_to_depth = false;
        v.witness_failures.push_back(w);
      }
    }
  }
  // nothing admissible means nothing was shown to expand
  if (v.tuples_checked == 0) v.expanding_up_to_depth = false;
  return v;
}

BallAdmissibility ball_admissibility(const SegmentLibrary& lib, const std::vector<double>& rho,
                                     CellId n) {
  const std::size_t count = lib.size();
  if (count < 2) throw ValidationError("ball admissibility needs N >= 2 (r_n undefined for N = 1)");
  if (rho.size() != count) throw ValidationError("need one rho per segment");
  lib.segment(n);

  BallAdmissibility out;
  out.cell = n;
  out.min_gap = std::numeric_limits<double>::infinity();
  const StateVector& end = lib.end(n);
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= count; ++k) {
    const auto j = static_cast<CellId>(k);
    if (j != n) out.min_gap = std::min(out.min_gap, distance(lib.start(n), lib.start(j)));
    const double dist_end = distance(end, lib.start(j));
    if (dist_end < nearest) {
      nearest = dist_end;
      out.nearest = j;
    }
  }
  out.radius = rho[static_cast<std::size_t>(n - 1)] * out.min_gap;
  const StateVector& anchor = lib.start(out.nearest);
  for (std::size_t k = 1; k <= count; ++k) {
    const auto m = static_cast<CellId>(k);
    if (m == out.nearest || distance(lib.start(m), anchor) <= out.radius) out.successors.push_back(m);
  }
  return out;
}

}  // namespace segdyn
