#include "segdyn/symbolic.hpp"

#include <algorithm>

namespace segdyn {

SymbolSequence encode_orbit(const FlowModel& model, const Partition& partition,
                            const StateVector& x0, int m, double T, const IntegratorConfig& cfg) {
  validate(model, x0);
  if (m < 1) throw ValidationError("encode_orbit requires m >= 1");
  if (!(T >= 0.0)) throw ValidationError("encode_orbit requires T >= 0");
  if (partition.dimension() != model.dimension())
    throw ValidationError("partition dimension does not match the model");
  SymbolSequence out;
  out.T = T;
  const auto first = partition.assign_cell(x0);
  if (!first) throw ValidationError("encode_orbit: initial point lies in no cell");
  out.word.push_back(*first);
  Rk4Stepper stepper(model, cfg);
  StateVector x = x0;
  for (int j = 1; j < m; ++j) {
    stepper.advance(x, T, T * (j - 1));
    const auto cell = partition.assign_cell(x);
    if (!cell) {
      out.complete = false;
      break;
    }
    out.word.push_back(*cell);
  }
  return out;
}

PseudoOrbit reconstruct_pseudo_orbit(const SegmentLibrary& lib, const SymbolSequence& word) {
  lib.validate();
  PseudoOrbit out;
  out.word = word;
  out.n_t = lib.n_t;
  const auto& grid = lib.segments.front().samples.times;
  out.times.reserve(word.word.size() * grid.size());
  out.states.reserve(word.word.size() * grid.size());
  for (std::size_t j = 0; j < word.word.size(); ++j) {
    const auto& seg = lib.segment(word.word[j]).samples;
    const double shift = static_cast<double>(j) * lib.T;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      out.times.push_back(shift + grid[k]);
      out.states.push_back(seg.states[k]);
    }
  }
  return out;
}

TrajectorySample true_orbit_on_grid(const FlowModel& model, const StateVector& x0,
                                    const PseudoOrbit& pseudo, const IntegratorConfig& cfg) {
  validate(model, x0);
  if (pseudo.n_t < 2 || pseudo.states.size() % static_cast<std::size_t>(pseudo.n_t) != 0)
    throw ValidationError("pseudo-orbit grid is malformed");
  const std::size_t n_t = static_cast<std::size_t>(pseudo.n_t);
  const std::size_t windows = pseudo.states.size() / n_t;
  TrajectorySample out;
  out.times = pseudo.times;
  out.states.reserve(pseudo.states.size());
  Rk4Stepper stepper(model, cfg);
  StateVector y = x0;
  for (std::size_t j = 0; j < windows; ++j) {
    out.states.push_back(y);
    for (std::size_t k = 1; k < n_t; ++k) {
      const double t0 = pseudo.times[j * n_t + k - 1];
      stepper.advance(y, pseudo.times[j * n_t + k] - t0, t0);
      out.states.push_back(y);
    }
  }
  return out;
}

double shadowing_error(const FlowModel& model, const StateVector& x0, const PseudoOrbit& pseudo,
                       const IntegratorConfig& cfg) {
  const auto truth = true_orbit_on_grid(model, x0, pseudo, cfg);
  double worst = 0.0;
  for (std::size_t i = 0; i < truth.states.size(); ++i)
    worst = std::max(worst, distance(truth.states[i], pseudo.states[i]));
  return worst;
}

Admissibility Admissibility::markov(const TransitionMatrix& gamma) {
  Admissibility a;
  a.order_ = 2;
  a.n_cells_ = gamma.size();
  for (std::size_t m = 1; m <= gamma.size(); ++m) {
    auto succ = gamma.successors(static_cast<CellId>(m));
    if (!succ.empty()) a.next_[Word{static_cast<CellId>(m)}] = std::move(succ);
  }
  return a;
}

Admissibility Admissibility::tensor(const TransitionTensor& tensor, std::size_t n_cells) {
  if (tensor.order < 2) throw ValidationError("tensor order must be >= 2");
  Admissibility a;
  a.order_ = tensor.order;
  a.n_cells_ = n_cells;
  for (const Word& t : tensor.tuples) {
    if (static_cast<int>(t.size()) != tensor.order)
      throw ValidationError("tensor tuple length differs from its order");
    for (CellId c : t)
      if (c < 1 || static_cast<std::size_t>(c) > n_cells)
        throw ValidationError("tensor tuple symbol out of range");
    for (std::size_t l = 1; l < t.size(); ++l)
      a.next_[Word(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(l))].push_back(t[l]);
  }
  for (auto& [state, succ] : a.next_) {
    std::sort(succ.begin(), succ.end());
    succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
  }
  return a;
}

const std::vector<CellId>& Admissibility::next(const Word& state) const {
  static const std::vector<CellId> none;
  const auto it = next_.find(state);
  return it == next_.end() ? none : it->second;
}

Word Admissibility::advance(const Word& state, CellId s) const {
  Word w = state;
  w.push_back(s);
  const auto keep = static_cast<std::size_t>(order_ - 1);
  if (w.size() > keep) w.erase(w.begin(), w.end() - static_cast<std::ptrdiff_t>(keep));
  return w;
}

bool Admissibility::admits(const Word& word) const {
  if (word.empty()) return false;
  for (CellId c : word)
    if (c < 1 || static_cast<std::size_t>(c) > n_cells_) return false;
  Word state{word.front()};
  for (std::size_t j = 1; j < word.size(); ++j) {
    const auto& succ = next(state);
    if (!std::binary_search(succ.begin(), succ.end(), word[j])) return false;
    state = advance(state, word[j]);
  }
  return true;
}

namespace {

void check_start(const Admissibility& rule, CellId n0, int m) {
  if (m < 1) throw ValidationError("word length m must be >= 1");
  if (n0 < 1 || static_cast<std::size_t>(n0) > rule.n_cells())
    throw ValidationError("start symbol " + std::to_string(n0) + " out of range 1.." +
                          std::to_string(rule.n_cells()));
}

}  // namespace

std::set<CellId> reachable_set(const Admissibility& rule, CellId n0, int m) {
  check_start(rule, n0, m);
  std::vector<std::set<Word>> layers(static_cast<std::size_t>(m));
  layers[0].insert(Word{n0});
  for (std::size_t j = 1; j < layers.size(); ++j)
    for (const Word& state : layers[j - 1])
      for (CellId s : rule.next(state)) layers[j].insert(rule.advance(state, s));

  // Backward pass: keep states that can still reach the last layer.
  std::set<CellId> reachable;
  std::set<Word> alive = layers.back();
  for (const Word& st : alive) reachable.insert(st.back());
  for (std::size_t j = layers.size() - 1; j-- > 0;) {
    std::set<Word> kept;
    for (const Word& state : layers[j]) {
      for (CellId s : rule.next(state)) {
        if (alive.count(rule.advance(state, s))) {
          kept.insert(state);
          break;
        }
      }
    }
    for (const Word& st : kept) reachable.insert(st.back());
    alive = std::move(kept);
  }
  return reachable;
}

Enumeration enumerate_admissible(const Admissibility& rule, CellId n0, int m, std::size_t cap) {
  check_start(rule, n0, m);
  Enumeration out;
  out.reachable = reachable_set(rule, n0, m);

  Word word{n0};
  std::vector<Word> states{Word{n0}};
  // Explicit DFS; frame j tracks which successor of word[j] to try next.
  std::vector<std::size_t> cursor{0};
  while (!cursor.empty() && !out.overflow) {
    if (word.size() == static_cast<std::size_t>(m)) {
      if (out.words.size() >= cap) {
        out.overflow = true;
        break;
      }
      out.words.push_back(word);
      word.pop_back();
      states.pop_back();
      cursor.pop_back();
      continue;
    }
    const auto& succ = rule.next(states.back());
    std::size_t& c = cursor.back();
    if (c >= succ.size()) {
      word.pop_back();
      states.pop_back();
      cursor.pop_back();
      continue;
    }
    const CellId s = succ[c++];
    word.push_back(s);
    states.push_back(rule.advance(states.back(), s));
    cursor.push_back(0);
  }
  return out;
}

Enumeration enumerate_admissible(const TransitionMatrix& gamma, CellId n0, int m,
                                 std::size_t cap) {
  return enumerate_admissible(Admissibility::markov(gamma), n0, m, cap);
}

std::set<CellId> reachable_closure(const TransitionMatrix& gamma, CellId n0) {
  if (n0 < 1 || static_cast<std::size_t>(n0) > gamma.size())
    throw ValidationError("start symbol out of range");
  std::set<CellId> seen{n0};
  std::vector<CellId> frontier{n0};
  while (!frontier.empty()) {
    const CellId m = frontier.back();
    frontier.pop_back();
    for (const auto& [n, c] : gamma.row(m))
      if (seen.insert(n).second) frontier.push_back(n);
  }
  return seen;
}

double cylinder_measure(const MarkovMatrix& p, const Word& prefix) {
  if (prefix.empty()) throw ValidationError("cylinder prefix must be nonempty");
  double mu = 1.0;
  for (std::size_t j = 1; j < prefix.size(); ++j) mu *= p(prefix[j - 1], prefix[j]);
  return mu;
}

KsEntropy ks_entropy(const MarkovMatrix& p) {
  const std::size_t n = p.size();
  KsEntropy out;
  std::vector<double> row_entropy(n, 0.0);
  CompensatedSum printed;
  for (std::size_t m = 0; m < n; ++m) {
    CompensatedSum row;
    for (const auto& [col, v] : p.row(static_cast<CellId>(m + 1)))
      if (v > 0.0) row.add(-v * std::log(v));
    row_entropy[m] = row.value();
    printed.add(row_entropy[m]);
  }
  out.printed = printed.value();
  if (n == 0) return out;

  // Lazy chain (I + P) / 2 has the same stationary vector and is aperiodic.
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  for (int iter = 0; iter < 200000; ++iter) {
    for (std::size_t k = 0; k < n; ++k) next[k] = 0.5 * pi[k];
    for (std::size_t m = 0; m < n; ++m)
      for (const auto& [col, v] : p.row(static_cast<CellId>(m + 1)))
        next[static_cast<std::size_t>(col - 1)] += 0.5 * pi[m] * v;
    double total = 0.0;
    for (double v : next) total += v;
    if (total <= 0.0) break;
    double change = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      next[k] /= total;
      change += std::abs(next[k] - pi[k]);
    }
    pi.swap(next);
    if (change < 1e-15) break;
  }
  out.stationary = pi;
  CompensatedSum weighted;
  for (std::size_t m = 0; m < n; ++m) weighted.add(pi[m] * row_entropy[m]);
  out.stationary_weighted = weighted.value();
  return out;
}

bool commutation_check(const FlowModel& model, const Partition& partition, const StateVector& x0,
                       int m, double T, const IntegratorConfig& cfg) {
  if (m < 2) throw ValidationError("commutation_check requires m >= 2");
  const auto full = encode_orbit(model, partition, x0, m, T, cfg);
  StateVector x1 = x0;
  Rk4Stepper stepper(model, cfg);
  stepper.advance(x1, T);
  const auto shifted = encode_orbit(model, partition, x1, m - 1, T, cfg);
  if (!full.complete || !shifted.complete) return false;
  return std::equal(full.word.begin() + 1, full.word.end(), shifted.word.begin(),
                    shifted.word.end());
}

std::optional<std::pair<Word, Word>> separation_witness(const TransitionMatrix& gamma,
                                                        const Word& prefix) {
  if (prefix.empty()) throw ValidationError("witness prefix must be nonempty");
  for (std::size_t j = 1; j < prefix.size(); ++j)
    if (!gamma.admissible(prefix[j - 1], prefix[j])) return std::nullopt;
  const auto succ = gamma.successors(prefix.back());
  if (succ.size() < 2) return std::nullopt;
  Word a = prefix, b = prefix;
  a.push_back(succ[0]);
  b.push_back(succ[1]);
  return std::make_pair(a, b);
}

}  // namespace segdyn
