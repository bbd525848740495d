// Acceptance run: one PASS/FAIL line per criterion.
// Exit status is 0 once every criterion has been evaluated; pass --strict to
// make any FAIL line turn the exit status non-zero.
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "segdyn/parallel.hpp"
#include "segdyn/pipeline.hpp"

using namespace segdyn;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SEGDYN_FIXTURES;

struct Tally {
  int pass = 0, fail = 0;
  void line(int id, bool ok, const std::string& name, const std::string& detail) {
    (ok ? pass : fail)++;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << detail << std::endl;
  }
};

template <class... A>
std::string str(const A&... a) {
  std::ostringstream os;
  os << std::setprecision(6);
  (os << ... << a);
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TransitionMatrix identity(int n) {
  std::vector<std::vector<int>> pat(n, std::vector<int>(n, 0));
  for (int i = 0; i < n; ++i) pat[i][i] = 1;
  return TransitionMatrix::from_pattern(pat);
}

TransitionMatrix full(int n) {
  return TransitionMatrix::from_pattern(std::vector<std::vector<int>>(n, std::vector<int>(n, 1)));
}

TransitionMatrix golden() { return TransitionMatrix::from_pattern({{0, 1}, {1, 1}}); }

TransitionMatrix random_sparse(int n, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(density);
  std::vector<std::vector<int>> pat(n, std::vector<int>(n, 0));
  for (auto& row : pat)
    for (int& v : row) v = b(rng);
  return TransitionMatrix::from_pattern(pat);
}

// Every N^(m-1) continuation of n0, filtered by Gamma.
std::set<Word> brute_force(const TransitionMatrix& g, CellId n0, int m) {
  const auto n = static_cast<CellId>(g.size());
  std::set<Word> out;
  Word w(m, 1);
  w[0] = n0;
  for (;;) {
    bool ok = true;
    for (int j = 0; j + 1 < m && ok; ++j) ok = g.admissible(w[j], w[j + 1]);
    if (ok) out.insert(w);
    int i = m - 1;
    while (i >= 1 && w[i] == n) w[i--] = 1;
    if (i < 1) break;
    ++w[i];
  }
  return out;
}

std::vector<TransitionTensor> word_tensors(const TransitionMatrix& g, int K) {
  std::vector<TransitionTensor> out;
  for (int k = 2; k <= K; ++k) {
    TransitionTensor t{k, {}};
    for (CellId n0 = 1; n0 <= static_cast<CellId>(g.size()); ++n0)
      for (auto& w : enumerate_admissible(g, n0, k, 1u << 20).words) t.tuples.insert(std::move(w));
    out.push_back(std::move(t));
  }
  return out;
}

// ---- shared Lorenz run ------------------------------------------------------

struct LorenzRun {
  PipelineConfig cfg;
  Partition partition{Cover{}};
  SegmentLibrary lib;
  TransitionEstimate est;
  std::vector<TransitionTensor> tensors;
  io::json shadow;
  double seconds = 0.0;
};

LorenzRun lorenz_run() {
  LorenzRun r;
  r.cfg = load_config(kFixtures / "lorenz.json");
  r.cfg.output_dir = fs::temp_directory_path() / "segdyn_acceptance_lorenz";
  fs::remove_all(r.cfg.output_dir);
  const auto t0 = std::chrono::steady_clock::now();
  for (const char* stage : {"calibrate", "segments", "transitions", "shadow"}) {
    const auto res = run_stage(stage, r.cfg);
    std::cout << "  [" << stage << "] " << res.summary << std::endl;
  }
  r.seconds = seconds_since(t0);
  const fs::path out = r.cfg.output_dir;
  r.partition = Partition(io::cover_from_json(io::read_json_file(out / "cover.json")));
  r.lib = io::load_library(out / "segments");
  r.est = io::transitions_from_json(io::read_json_file(out / "transitions.json"));
  r.tensors = io::tensors_from_json(io::read_json_file(out / "tensors.json"));
  r.shadow = io::read_json_file(out / "shadow_report.json");
  return r;
}

// ---- criteria -------------------------------------------------------------

void criterion1(Tally& t, const LorenzRun& r) {
  const auto& s = r.shadow;
  const std::size_t complete = s["n_orbits"].get<std::size_t>();
  const double worst = s["max_error"].get<double>();
  const double bound = r.cfg.epsilon + 1e-6;
  const bool ok = complete >= 100 && worst <= bound;
  t.line(1, ok, "epsilon-shadowing on Lorenz",
         str(complete, " complete length-", r.cfg.word_length, " encodings found among ",
             s["candidates_drawn"].get<std::size_t>(), " random partition points (100 required)",
             complete ? str(", max error ", worst, " vs ", bound) : std::string(),
             "; N=", r.partition.size(), ", pipeline time ", r.seconds, " s"));
}

// Shadowing and shift consistency on truncated words: what the run can say
// when complete encodings are out of reach.
void truncated_diagnostics(const LorenzRun& r) {
  const std::size_t n = 2000;
  std::vector<double> err(n);
  std::vector<std::size_t> len(n);
  parallel_for(n, r.cfg.jobs, [&](std::size_t i) {
    const auto x0 = draw_partition_point(r.partition, r.cfg.seed + 99, i);
    const auto w = encode_orbit(r.cfg.model, r.partition, x0, r.cfg.word_length, r.cfg.T, r.cfg.integrator);
    len[i] = w.word.size();
    err[i] = shadowing_error(r.cfg.model, x0, reconstruct_pseudo_orbit(r.lib, w), r.cfg.integrator);
  });
  std::size_t longest = 0, multi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    longest = std::max(longest, len[i]);
    multi += len[i] >= 2;
  }
  std::cout << "  diagnostic: over " << n << " truncated encodings (longest " << longest << " symbols, "
            << multi << " with >= 2 symbols) the shadowing error is at most "
            << *std::max_element(err.begin(), err.end()) << " (epsilon " << r.cfg.epsilon << ")"
            << std::endl;
}

void criterion2(Tally& t) {
  const auto m = FlowModel::linear_diagonal({1.0});
  double worst = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double time = 0.1 * k;
    worst = std::max(worst, std::abs(advance(m, {1.0}, time, {})[0] - std::exp(-time)));
  }
  const auto err = [&](double h) { return std::abs(advance(m, {1.0}, 2.0, {h, Scheme::RK4})[0] - std::exp(-2.0)); };
  const double ratio = err(0.1) / err(0.05);
  const double ratio2 = err(0.05) / err(0.025);
  const bool ok = worst <= 1e-8 && ratio >= 8 && ratio <= 32 && ratio2 >= 8 && ratio2 <= 32;
  t.line(2, ok, "closed-form flow",
         str("max endpoint error over t<=2 at h=1e-3 is ", worst, "; halving ratios ", ratio, ", ",
             ratio2, " (16 within a factor of 2)"));
}

void criterion3(Tally& t, const LorenzRun& r) {
  const auto& cover = r.partition.cover();
  const auto& dom = r.cfg.domain;
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0, multi = 0, covered = 0;
  const std::size_t n_points = 100000;
  // Half the points uniform in the box, half near centers so that overlaps get exercised.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, cover.size() - 1);
  for (std::size_t i = 0; i < n_points; ++i) {
    StateVector x(3);
    if (i % 2 == 0) {
      for (int k = 0; k < 3; ++k) x[k] = dom.lower[k] + (dom.upper[k] - dom.lower[k]) * u(rng);
    } else {
      const auto& b = cover.balls[pick(rng)];
      for (int k = 0; k < 3; ++k) x[k] = b.center[k] + 0.7 * b.radius * g(rng);
    }
    // direct definition: member of B_n and of no later ball, checked for every n
    int members = 0;
    std::optional<CellId> direct;
    for (std::size_t n = 0; n < cover.size(); ++n) {
      if (distance(x, cover.balls[n].center) > cover.balls[n].radius) continue;
      bool later = false;
      for (std::size_t m = n + 1; m < cover.size() && !later; ++m)
        later = distance(x, cover.balls[m].center) <= cover.balls[m].radius;
      if (!later) {
        ++members;
        direct = cover.balls[n].index;
      }
    }
    multi += members > 1;
    covered += members == 1;
    mismatches += r.partition.assign_cell(x) != direct;
  }
  const auto centers = collocate(dom, r.cfg.resolution, r.cfg.collocation_cap);
  std::size_t uncovered = 0;
  for (const auto& c : centers) uncovered += !r.partition.assign_cell(c).has_value();
  t.line(3, mismatches == 0 && multi == 0 && uncovered == 0, "partition correctness",
         str(mismatches, " disagreements and ", multi, " multiply-assigned points among ", n_points,
             " (", covered, " covered); ", uncovered, " of ", centers.size(), " collocation centers uncovered"));
}

struct FreshOrbits {
  std::size_t pairs = 0, violations = 0, complete = 0, commute = 0;
};

FreshOrbits criterion4(Tally& t, const LorenzRun& r) {
  // row sums, prefix closure
  double worst_row = 0.0;
  for (std::size_t m = 1; m <= r.est.p.size(); ++m) {
    const auto& row = r.est.p.row(static_cast<CellId>(m));
    if (row.empty()) continue;
    double s = 0.0;
    for (const auto& [n, v] : row) s += v;
    worst_row = std::max(worst_row, std::abs(s - 1.0));
  }
  std::size_t closure_breaks = 0;
  for (std::size_t k = 1; k < r.tensors.size(); ++k)
    for (const Word& w : r.tensors[k].tuples)
      closure_breaks += !r.tensors[k - 1].admissible(Word(w.begin(), w.end() - 1));
  const bool order2 = r.tensors.front().tuples == tensor_from_matrix(r.est.gamma).tuples;

  // determinism: same seed, different worker count
  SamplingOptions opts;
  opts.samples_per_cell = r.cfg.samples_per_cell;
  opts.seed = r.cfg.seed;
  opts.jobs = 3;
  const auto again = estimate_transitions(r.cfg.model, r.partition, r.cfg.T, r.cfg.integrator, opts);
  const bool same = io::transitions_to_json(again.gamma, again.p).dump() ==
                    io::transitions_to_json(r.est.gamma, r.est.p).dump();

  // fresh points
  FreshOrbits f;
  const std::size_t n = 1000;
  std::vector<SymbolSequence> words(n);
  std::vector<int> comm(n, -1);
  parallel_for(n, r.cfg.jobs, [&](std::size_t i) {
    const auto x0 = draw_partition_point(r.partition, r.cfg.seed + 1, i);
    words[i] = encode_orbit(r.cfg.model, r.partition, x0, r.cfg.word_length, r.cfg.T, r.cfg.integrator);
    if (words[i].complete)
      comm[i] = commutation_check(r.cfg.model, r.partition, x0, r.cfg.word_length, r.cfg.T, r.cfg.integrator);
  });
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = words[i].word;
    for (std::size_t j = 0; j + 1 < w.size(); ++j) {
      ++f.pairs;
      f.violations += !r.est.gamma.admissible(w[j], w[j + 1]);
    }
    f.complete += words[i].complete;
    f.commute += comm[i] == 1;
  }
  const double frac = f.pairs ? static_cast<double>(f.violations) / f.pairs : 1.0;
  const bool ok = worst_row <= 1e-9 && closure_breaks == 0 && order2 && same && f.pairs > 0 && frac < 0.01;
  t.line(4, ok, "transition consistency",
         str("max |row sum - 1| ", worst_row, ", prefix-closure breaks ", closure_breaks,
             ", order-2 tensor equals Gamma ", order2 ? "yes" : "no", ", seed determinism ",
             same ? "byte-exact" : "BROKEN", "; fresh orbits: ", f.violations, " of ", f.pairs,
             " consecutive pairs violate Gamma",
             f.pairs ? str(" (", 100.0 * frac, "%)") : std::string(" (no pairs to judge)"),
             ", escape fraction of the sampling ",
             r.est.gamma.size() ? [&] {
               std::int64_t s = 0, e = 0;
               for (std::size_t m = 1; m <= r.est.gamma.size(); ++m) {
                 s += r.est.gamma.sampled(static_cast<CellId>(m));
                 e += r.est.gamma.escaped(static_cast<CellId>(m));
               }
               return s ? static_cast<double>(e) / s : 0.0;
             }()
                                : 0.0));
  return f;
}

void criterion5(Tally& t) {
  struct Case {
    std::string name;
    TransitionMatrix g;
    int mmax;
    std::vector<CellId> starts;
  };
  std::vector<Case> cases{{"identity(30)", identity(30), 6, {1, 17, 30}},
                          {"full(5)", full(5), 6, {1, 5}},
                          {"golden", golden(), 6, {1, 2}},
                          {"sparse(12)", random_sparse(12, 0.25, 11), 6, {1, 6, 12}},
                          {"sparse(30)", random_sparse(30, 0.1, 12), 6, {1, 30}}};
  std::size_t compared = 0, mismatched = 0;
  for (const auto& c : cases)
    for (int m = 1; m <= c.mmax; ++m)
      for (CellId n0 : c.starts) {
        const auto e = enumerate_admissible(c.g, n0, m, 50'000'000);
        const std::set<Word> got(e.words.begin(), e.words.end());
        const auto want = brute_force(c.g, n0, m);
        std::set<CellId> used;
        for (const auto& w : want) used.insert(w.begin(), w.end());
        ++compared;
        mismatched += got != want || got.size() != e.words.size() || e.reachable != used || e.overflow;
      }
  bool fib = true;
  std::vector<std::size_t> counts;
  for (int m = 1; m <= 15; ++m) counts.push_back(enumerate_admissible(golden(), 1, m, 1u << 20).words.size());
  fib = counts[0] == 1 && counts[1] == 1;
  for (std::size_t m = 2; m < counts.size(); ++m) fib = fib && counts[m] == counts[m - 1] + counts[m - 2];
  t.line(5, mismatched == 0 && fib, "enumeration oracle",
         str(compared - mismatched, "/", compared, " (Gamma, n0, m<=6) cases equal brute force; golden-mean counts ",
             fib ? "follow" : "BREAK", " the Fibonacci recurrence up to m=15 (", counts.back(), " words)"));
}

void criterion6(Tally& t) {
  double worst = 0.0;
  for (int n : {1, 2, 5, 16, 100}) {
    CellMeasure u{std::vector<double>(n, 1.0 / n), 1, 1};
    worst = std::max(worst, std::abs(metric_entropy(u) - std::log(n)));
    CellMeasure point{std::vector<double>(n, 0.0), 1, 1};
    point.weights[n / 2] = 1.0;
    worst = std::max(worst, std::abs(metric_entropy(point)));
    std::vector<std::vector<double>> perm(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) perm[i][(i + 1) % n] = 1.0;
    const auto kp = ks_entropy(MarkovMatrix::from_dense(perm));
    worst = std::max({worst, std::abs(kp.printed), std::abs(kp.stationary_weighted)});
    const auto ku = ks_entropy(MarkovMatrix::from_dense(std::vector<std::vector<double>>(n, std::vector<double>(n, 1.0 / n))));
    worst = std::max({worst, std::abs(ku.printed - n * std::log(n)), std::abs(ku.stationary_weighted - std::log(n))});
  }
  t.line(6, worst <= 1e-12, "entropy closed forms",
         str("largest deviation ", worst, " over N in {1,2,5,16,100} (H uniform/point mass, H_mu permutation, "
             "H_mu uniform as printed = N log N and stationary-weighted = log N)"));
}

void criterion7(Tally& t) {
  const auto m = FlowModel::linear_diagonal({1.0});
  const Cover c{{{1, {0.0}, 0.1}, {2, {1.0}, 0.1}}};
  const auto lib = build_segments(m, c, 2.0, 201, {});
  const auto md = max_difference(lib);
  double worst = 0.0;
  for (std::size_t k = 0; k < md.size(); ++k)
    worst = std::max(worst, std::abs(md[k] - std::exp(-lib.segment(1).samples.times[k])));
  t.line(7, worst <= 1e-8, "M_d oracle", str("max |M_d(t_k) - exp(-t_k)| = ", worst, " over ", md.size(), " samples"));
}

void criterion8(Tally& t, const LorenzRun& r) {
  const QuantitySpec q{};  // Energy
  const auto env = segment_envelope(r.lib, q);
  double radius = 0.0;
  const auto& d = r.cfg.domain;
  for (int corner = 0; corner < 8; ++corner) {
    StateVector x(3);
    for (int k = 0; k < 3; ++k) x[k] = (corner >> k & 1) ? d.upper[k] : d.lower[k];
    radius = std::max(radius, norm(x));
  }
  const double slack = lipschitz_slack(q, r.cfg.epsilon, radius);
  std::size_t orbits = 0, samples = 0, outside = 0;
  for (const auto& o : r.shadow["per_orbit"]) {
    if (!o["complete"].get<bool>()) continue;
    ++orbits;
    const auto x0 = o["x0"].get<StateVector>();
    const SymbolSequence w{o["word"].get<Word>(), r.cfg.T, true};
    const auto b = reachable_bounds(env, r.est.gamma, w.word.front(), static_cast<int>(w.word.size()));
    const auto pseudo = reconstruct_pseudo_orbit(r.lib, w);
    const auto truth = true_orbit_on_grid(r.cfg.model, x0, pseudo, r.cfg.integrator);
    for (const auto& x : truth.states) {
      ++samples;
      const double v = q(x);
      outside += v < b.lo - slack || v > b.hi + slack;
    }
  }
  t.line(8, orbits > 0 && outside == 0, "quantity containment (Energy)",
         orbits ? str(outside, " of ", samples, " samples on ", orbits, " complete orbits outside [q_lo - ", slack,
                      ", q_hi + ", slack, "]")
                : std::string("no complete encoded orbit to check (see criterion 1)"));
}

void criterion9(Tally& t, const LorenzRun& r, const FreshOrbits& f) {
  std::size_t run1 = 0, run1_ok = 0;
  for (const auto& o : r.shadow["per_orbit"]) {
    if (o["commutes"].is_null()) continue;
    ++run1;
    run1_ok += o["commutes"].get<bool>();
  }
  const std::size_t total = run1 + f.complete;
  const std::size_t good = run1_ok + f.commute;
  t.line(9, total > 0 && good == total, "commutation",
         total ? str(good, " of ", total, " complete encodings commute (run 1: ", run1_ok, "/", run1, ", run 4: ",
                     f.commute, "/", f.complete, ")")
               : std::string("no complete encoding in runs 1 and 4 to check"));
}

void criterion10(Tally& t) {
  const auto id = identity(2);
  const auto fs2 = full(2);
  const auto gm = golden();
  const bool id_rs = row_sensitivity(id);
  const auto id_ex = expanding_to_depth(word_tensors(id, 3), 1);
  const bool fs_rs = row_sensitivity(fs2);
  const auto fs_ex = expanding_to_depth(word_tensors(fs2, 3), 1);
  const bool gm_rs = row_sensitivity(gm);
  const auto gm_ex = expanding_to_depth(word_tensors(gm, 5), 2);
  const bool ok = !id_rs && !id_ex.expanding_up_to_depth && fs_rs && fs_ex.expanding_up_to_depth &&
                  gm_ex.expanding_up_to_depth && gm_ex.depth == 3;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  t.line(10, ok, "predicates",
         str("identity ", b(id_rs), "/", b(id_ex.expanding_up_to_depth), ", full shift ", b(fs_rs), "/",
             b(fs_ex.expanding_up_to_depth), ", golden mean expanding to depth ", gm_ex.depth, " with m_max=2: ",
             b(gm_ex.expanding_up_to_depth), " (its row sensitivity is ", b(gm_rs),
             ": row 1 has a single successor)"));
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int i = 1; i < argc; ++i) strict = strict || std::strcmp(argv[i], "--strict") == 0;
  try {
    Tally t;
    std::cout << "acceptance: Lorenz pipeline" << std::endl;
    const auto run = lorenz_run();
    criterion1(t, run);
    truncated_diagnostics(run);
    criterion2(t);
    criterion3(t, run);
    const auto fresh = criterion4(t, run);
    criterion5(t);
    criterion6(t);
    criterion7(t);
    criterion8(t, run);
    criterion9(t, run, fresh);
    criterion10(t);
    std::cout << "acceptance: " << t.pass << "/" << (t.pass + t.fail) << " criteria pass" << std::endl;
    return strict && t.fail ? 1 : 0;
  } catch (const std::exception& e) {
    std::cout << "acceptance: aborted: " << e.what() << std::endl;
    return 2;
  }
}
