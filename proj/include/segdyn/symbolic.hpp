#pragma once

#include <optional>
#include <utility>

#include "segdyn/transitions.hpp"

namespace segdyn {

struct SymbolSequence {
  Word word;
  double T = 0.0;
  bool complete = true;  // false when the orbit left the partition before m symbols
};

/// n_j = cell of F^{jT}(x0), j = 0..m-1, from one continuous integration.
/// Truncates with complete = false at the first point outside every cell.
SymbolSequence encode_orbit(const FlowModel& model, const Partition& partition,
                            const StateVector& x0, int m, double T, const IntegratorConfig& cfg);

/// eta(t): segments laid end to end on [0, mT]. Window j holds n_t samples;
/// junction times appear twice (end of window j-1, start of window j).
struct PseudoOrbit {
  SymbolSequence word;
  int n_t = 0;
  std::vector<double> times;
  std::vector<StateVector> states;
};

PseudoOrbit reconstruct_pseudo_orbit(const SegmentLibrary& lib, const SymbolSequence& word);

/// F^t(x0) on the pseudo-orbit's grid (same layout, junction values repeated),
/// integrated in one pass.
TrajectorySample true_orbit_on_grid(const FlowModel& model, const StateVector& x0,
                                    const PseudoOrbit& pseudo, const IntegratorConfig& cfg);

/// max over the grid of |F^t(x0) - eta(t)|; both sides of every junction count.
double shadowing_error(const FlowModel& model, const StateVector& x0, const PseudoOrbit& pseudo,
                       const IntegratorConfig& cfg);

/// Next-symbol rule for words: Markov (order 2, from Gamma) or order-k tensor.
/// A word of length < k must be a prefix of an admissible tuple; longer words
/// need every window of k consecutive symbols admissible.
class Admissibility {
 public:
  static Admissibility markov(const TransitionMatrix& gamma);
  static Admissibility tensor(const TransitionTensor& tensor, std::size_t n_cells);

  int order() const { return order_; }
  std::size_t n_cells() const { return n_cells_; }
  /// Symbols that may follow a word whose trailing state is `state`.
  const std::vector<CellId>& next(const Word& state) const;
  /// Trailing state after appending s.
  Word advance(const Word& state, CellId s) const;
  bool admits(const Word& word) const;

 private:
  int order_ = 2;
  std::size_t n_cells_ = 0;
  std::map<Word, std::vector<CellId>> next_;
};

struct Enumeration {
  std::vector<Word> words;
  std::set<CellId> reachable;  // I^m_{n0}, exact even when words overflowed
  bool overflow = false;
};

Enumeration enumerate_admissible(const Admissibility& rule, CellId n0, int m, std::size_t cap);
Enumeration enumerate_admissible(const TransitionMatrix& gamma, CellId n0, int m,
                                 std::size_t cap);

/// Symbols used by some admissible word of length m from n0, by layered
/// propagation with dead ends pruned backwards.
std::set<CellId> reachable_set(const Admissibility& rule, CellId n0, int m);

/// Symbols reachable from n0 in any number of steps (m -> infinity surrogate).
std::set<CellId> reachable_closure(const TransitionMatrix& gamma, CellId n0);

/// Markov measure of the cylinder fixed by `prefix`: product of p along it.
double cylinder_measure(const MarkovMatrix& p, const Word& prefix);

struct KsEntropy {
  double printed = 0.0;              // -sum_m sum_n p_mn log p_mn
  double stationary_weighted = 0.0;  // -sum_m pi_m sum_n p_mn log p_mn
  std::vector<double> stationary;
};

KsEntropy ks_entropy(const MarkovMatrix& p);

/// Encoding F^T(x0) for m-1 steps reproduces the left shift of the encoding
/// of x0 for m steps. False unless both encodings are complete.
bool commutation_check(const FlowModel& model, const Partition& partition, const StateVector& x0,
                       int m, double T, const IntegratorConfig& cfg);

/// Two admissible one-symbol extensions of `prefix` that differ in their last
/// symbol, when the last symbol's row has two or more ones.
std::optional<std::pair<Word, Word>> separation_witness(const TransitionMatrix& gamma,
                                                        const Word& prefix);

}  // namespace segdyn
