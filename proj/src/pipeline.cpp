#include "segdyn/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "segdyn/parallel.hpp"

namespace segdyn {

namespace fs = std::filesystem;
using io::json;

namespace {

constexpr std::uint32_t kOrbitStream = 0x0B17;
constexpr std::uint32_t kMeasureStream = 0x3EA5;

// ---- config ---------------------------------------------------------------

class FieldErrors {
 public:
  template <class F>
  void field(const std::string& name, F&& parse) {
    try {
      parse();
    } catch (const json::exception& e) {
      errors_.push_back(name + ": " + e.what());
    } catch (const Error& e) {
      errors_.push_back(name + ": " + e.what());
    }
  }
  void require(bool ok, const std::string& message) {
    if (!ok) errors_.push_back(message);
  }
  void raise_if_any() const {
    if (errors_.empty()) return;
    std::ostringstream os;
    os << "invalid configuration (" << errors_.size() << " problem"
       << (errors_.size() == 1 ? "" : "s") << "):";
    for (const auto& e : errors_) os << "\n  - " << e;
    throw ValidationError(os.str());
  }

 private:
  std::vector<std::string> errors_;
};

json parse_scalar(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

// ---- artifacts ------------------------------------------------------------

struct Paths {
  fs::path root;
  fs::path collocation() const { return root / "collocation.csv"; }
  fs::path calibration() const { return root / "calibration.json"; }
  fs::path cover() const { return root / "cover.json"; }
  fs::path segments() const { return root / "segments"; }
  fs::path max_difference() const { return root / "max_difference.csv"; }
  fs::path transitions() const { return root / "transitions.json"; }
  fs::path tensors() const { return root / "tensors.json"; }
  fs::path predicates() const { return root / "predicates.json"; }
  fs::path ball_rule() const { return root / "ball_admissibility.json"; }
  fs::path initial_points() const { return root / "initial_points.csv"; }
  fs::path words() const { return root / "words.json"; }
  fs::path shadow() const { return root / "shadow_report.json"; }
  fs::path pseudo_orbits() const { return root / "pseudo_orbits.csv"; }
  fs::path enumeration() const { return root / "enumeration.json"; }
  fs::path measure_samples() const { return root / "measure_samples.csv"; }
  fs::path entropy() const { return root / "entropy.json"; }
  fs::path bounds() const { return root / "bounds.json"; }
  fs::path report() const { return root / "report.json"; }
  fs::path report_text() const { return root / "report.txt"; }
  fs::path manifest() const { return root / "manifest.json"; }
};

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw MissingArtifactError("missing artifact " + path.string() + " (run `segdyn " + producer +
                               "` first)");
}

Partition load_partition(const Paths& p) {
  require_artifact(p.cover(), "calibrate");
  return Partition(io::cover_from_json(io::read_json_file(p.cover())));
}

SegmentLibrary load_segments(const Paths& p) {
  require_artifact(p.segments() / "library.json", "segments");
  require_artifact(p.segments() / "segments.csv", "segments");
  return io::load_library(p.segments());
}

TransitionEstimate load_transitions(const Paths& p) {
  require_artifact(p.transitions(), "transitions");
  return io::transitions_from_json(io::read_json_file(p.transitions()));
}

void update_manifest(const PipelineConfig& cfg, const Paths& paths, const StageResult& result,
                     double seconds) {
  json manifest = fs::exists(paths.manifest()) ? io::read_json_file(paths.manifest()) : json::object();
  manifest["tool"] = "segdyn";
  manifest["version"] = kToolVersion;
  manifest["config"] = cfg.raw;
  json outputs = json::object();
  for (const auto& out : result.outputs) {
    if (fs::is_directory(out)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(out)) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files)
        outputs[fs::relative(f, paths.root).generic_string()] = io::file_digest(f);
    } else {
      outputs[fs::relative(out, paths.root).generic_string()] = io::file_digest(out);
    }
  }
  manifest["stages"][result.stage] = {{"wall_seconds", seconds}, {"outputs", outputs}};
  io::write_json_file(paths.manifest(), manifest);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---- orbit selection ------------------------------------------------------

struct EncodedOrbit {
  StateVector x0;
  SymbolSequence word;
};

struct OrbitSelection {
  std::vector<EncodedOrbit> orbits;
  std::size_t candidates = 0;
  std::size_t complete = 0;
};

OrbitSelection select_orbits(const PipelineConfig& cfg, const Partition& partition) {
  OrbitSelection sel;
  const auto encode = [&](const StateVector& x0) {
    return EncodedOrbit{x0, encode_orbit(cfg.model, partition, x0, cfg.word_length, cfg.T,
                                         cfg.integrator)};
  };
  if (!cfg.orbits.initial_points.empty()) {
    for (const auto& x0 : cfg.orbits.initial_points) {
      sel.orbits.push_back(encode(x0));
      ++sel.candidates;
      if (sel.orbits.back().word.complete) ++sel.complete;
    }
    return sel;
  }
  const auto wanted = static_cast<std::size_t>(cfg.orbits.count);
  // Candidates are encoded in parallel batches; acceptance is decided in index
  // order so the selection does not depend on the worker count.
  const std::size_t batch = std::max<std::size_t>(64, 4 * resolve_jobs(cfg.jobs));
  while (sel.orbits.size() < wanted && sel.candidates < cfg.orbits.max_candidates) {
    const std::size_t n = std::min(batch, cfg.orbits.max_candidates - sel.candidates);
    std::vector<EncodedOrbit> drawn(n);
    parallel_for(n, cfg.jobs, [&](std::size_t k) {
      drawn[k] = encode(draw_partition_point(partition, cfg.seed, sel.candidates + k));
    });
    for (auto& o : drawn) {
      ++sel.candidates;
      if (o.word.complete) ++sel.complete;
      if (!cfg.orbits.require_complete || o.word.complete) sel.orbits.push_back(std::move(o));
      if (sel.orbits.size() == wanted) break;
    }
  }
  return sel;
}

json orbit_json(const EncodedOrbit& o) {
  return {{"x0", o.x0}, {"word", o.word.word}, {"complete", o.word.complete}};
}

// ---- stages ---------------------------------------------------------------

StageResult stage_calibrate(const PipelineConfig& cfg, const Paths& paths) {
  const auto centers = collocate(cfg.domain, cfg.resolution, cfg.collocation_cap);
  if (centers.empty()) throw ValidationError("no collocation point lies inside the domain");
  CalibrationOptions opts = cfg.calibration;
  opts.seed = cfg.seed;
  opts.max_delta = cfg.delta_cap_fraction * cfg.domain.min_side();
  std::vector<DeltaCalibration> cal(centers.size());
  parallel_for(centers.size(), cfg.jobs, [&](std::size_t k) {
    cal[k] = calibrate_delta(cfg.model, centers[k], cfg.T, cfg.epsilon, cfg.integrator, opts, k);
  });
  std::vector<double> radii;
  json per_center = json::array();
  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
  std::size_t capped = 0;
  for (std::size_t k = 0; k < cal.size(); ++k) {
    radii.push_back(cal[k].delta);
    dmin = std::min(dmin, cal[k].delta);
    dmax = std::max(dmax, cal[k].delta);
    capped += cal[k].capped ? 1 : 0;
    per_center.push_back({{"center", centers[k]},
                          {"delta", cal[k].delta},
                          {"diameter", cal[k].diameter},
                          {"capped", cal[k].capped}});
  }
  const Cover cover = minimal_cover(centers, radii, centers);

  io::write_points_csv(paths.collocation(), centers);
  io::write_json_file(paths.calibration(),
                      {{"epsilon", cfg.epsilon},
                       {"T", cfg.T},
                       {"sphere_points", cal.front().sphere_points},
                       {"time_samples", opts.time_samples},
                       {"max_delta", opts.max_delta},
                       {"per_center", per_center}});
  io::write_json_file(paths.cover(), io::to_json(cover));

  StageResult r{"calibrate", {paths.collocation(), paths.calibration(), paths.cover()}, ""};
  std::ostringstream os;
  os << "collocated " << centers.size() << " centers; delta in [" << dmin << ", " << dmax
     << "] (" << capped << " capped, " << cal.front().sphere_points
     << " sphere points each); minimal cover keeps " << cover.size() << " balls";
  r.summary = os.str();
  return r;
}

StageResult stage_segments(const PipelineConfig& cfg, const Paths& paths) {
  const Partition partition = load_partition(paths);
  const auto lib = build_segments(cfg.model, partition.cover(), cfg.T, cfg.n_t, cfg.integrator,
                                  cfg.epsilon, cfg.jobs);
  const auto md = max_difference(lib, cfg.jobs);
  io::save_library(paths.segments(), lib);
  io::write_max_difference_csv(paths.max_difference(), lib.segments.front().samples.times, md);
  const auto [lo, hi] = std::minmax_element(md.begin(), md.end());
  StageResult r{"segments", {paths.segments(), paths.max_difference()}, ""};
  r.summary = std::to_string(lib.size()) + " segments, n_t=" + std::to_string(lib.n_t) +
              "; M_d ranges over [" + fmt(*lo) + ", " + fmt(*hi) + "]";
  return r;
}

StageResult stage_transitions(const PipelineConfig& cfg, const Paths& paths) {
  const Partition partition = load_partition(paths);
  const SegmentLibrary lib = load_segments(paths);
  SamplingOptions opts;
  opts.samples_per_cell = cfg.samples_per_cell;
  opts.seed = cfg.seed;
  opts.jobs = cfg.jobs;
  const auto it = sample_itineraries(cfg.model, partition, cfg.T, cfg.tensor_order - 1,
                                     cfg.integrator, opts);
  const TransitionMatrix gamma = transitions_from_itineraries(it, partition.size());
  const MarkovMatrix p = MarkovMatrix::from_counts(gamma);
  std::vector<TransitionTensor> tensors;
  for (int k = 2; k <= cfg.tensor_order; ++k) tensors.push_back(tensor_from_itineraries(it, k));

  const bool sensitive = row_sensitivity(gamma);
  json predicates = {{"row_sensitivity", sensitive}};
  std::string expand_line;
  if (cfg.tensor_order - cfg.m_max >= 1) {
    const auto v = expanding_to_depth(tensors, cfg.m_max);
    json failures = json::array();
    for (std::size_t k = 0; k < std::min<std::size_t>(v.witness_failures.size(), 1000); ++k)
      failures.push_back(v.witness_failures[k]);
    predicates["expanding"] = {{"expanding_up_to_depth", v.expanding_up_to_depth},
                               {"depth", v.depth},
                               {"m_max", v.m_max},
                               {"tuples_checked", v.tuples_checked},
                               {"failure_count", v.witness_failures.size()},
                               {"witness_failures", failures}};
    expand_line = "expanding to depth " + std::to_string(v.depth) + " (m_max " +
                  std::to_string(v.m_max) + "): " + (v.expanding_up_to_depth ? "true" : "false") +
                  ", " + std::to_string(v.witness_failures.size()) + " of " +
                  std::to_string(v.tuples_checked) + " tuples fail";
  } else {
    predicates["expanding"] = nullptr;
    expand_line = "expanding: not evaluated (tensor_order - m_max < 1)";
  }

  json ball = json::object();
  if (lib.size() >= 2) {
    std::vector<double> rho(lib.size());
    parallel_for(lib.size(), cfg.jobs, [&](std::size_t k) {
      rho[k] = jacobian_norm(cfg.model, lib.segments[k].samples.states.back(), cfg.T,
                             cfg.integrator, cfg.fd_step);
    });
    json rows = json::array();
    std::size_t contained = 0;
    for (std::size_t k = 0; k < lib.size(); ++k) {
      const auto n = static_cast<CellId>(k + 1);
      const auto rule = ball_admissibility(lib, rho, n);
      const auto sampled = gamma.successors(n);
      const bool sub = std::includes(sampled.begin(), sampled.end(), rule.successors.begin(),
                                     rule.successors.end());
      contained += sub ? 1 : 0;
      rows.push_back({{"cell", n},
                      {"rho", rho[k]},
                      {"r", rule.min_gap},
                      {"nearest", rule.nearest},
                      {"radius", rule.radius},
                      {"successors", rule.successors},
                      {"sampled_successors", sampled}});
    }
    ball = {{"fd_step", cfg.fd_step}, {"rows_within_sampled_gamma", contained}, {"rows", rows}};
  } else {
    ball = {{"note", "ball rule needs at least two segments"}, {"rows", json::array()}};
  }

  io::write_json_file(paths.transitions(), io::transitions_to_json(gamma, p));
  io::write_json_file(paths.tensors(), io::tensors_to_json(tensors));
  io::write_json_file(paths.predicates(), predicates);
  io::write_json_file(paths.ball_rule(), ball);

  std::int64_t sampled = 0, escaped = 0;
  for (std::size_t m = 1; m <= gamma.size(); ++m) {
    sampled += gamma.sampled(static_cast<CellId>(m));
    escaped += gamma.escaped(static_cast<CellId>(m));
  }
  StageResult r{"transitions",
                {paths.transitions(), paths.tensors(), paths.predicates(), paths.ball_rule()},
                ""};
  std::ostringstream os;
  os << "row sensitivity (every supported row has >= 2 successors): "
     << (sensitive ? "true" : "false") << '\n'
     << expand_line << '\n'
     << "escape fraction " << (sampled ? static_cast<double>(escaped) / sampled : 0.0) << " ("
     << escaped << " of " << sampled << " samples), " << gamma.unsupported_rows().size()
     << " unsupported rows";
  r.summary = os.str();
  return r;
}

StageResult stage_encode(const PipelineConfig& cfg, const Paths& paths) {
  const Partition partition = load_partition(paths);
  const auto sel = select_orbits(cfg, partition);
  json orbits = json::array();
  std::vector<StateVector> points;
  for (const auto& o : sel.orbits) {
    orbits.push_back(orbit_json(o));
    points.push_back(o.x0);
  }
  io::write_points_csv(paths.initial_points(), points);
  io::write_json_file(paths.words(), {{"T", cfg.T},
                                      {"m", cfg.word_length},
                                      {"candidates_drawn", sel.candidates},
                                      {"n_complete", sel.complete},
                                      {"orbits", orbits}});
  StageResult r{"encode", {paths.initial_points(), paths.words()}, ""};
  r.summary = std::to_string(sel.orbits.size()) + " words of length " +
              std::to_string(cfg.word_length) + " (" + std::to_string(sel.complete) +
              " complete among " + std::to_string(sel.candidates) + " candidates)";
  return r;
}

StageResult stage_shadow(const PipelineConfig& cfg, const Paths& paths) {
  const Partition partition = load_partition(paths);
  const SegmentLibrary lib = load_segments(paths);
  const auto sel = select_orbits(cfg, partition);
  std::vector<double> errors(sel.orbits.size());
  std::vector<int> commutes(sel.orbits.size(), -1);
  std::vector<PseudoOrbit> pseudo(sel.orbits.size());
  parallel_for(sel.orbits.size(), cfg.jobs, [&](std::size_t k) {
    const auto& o = sel.orbits[k];
    pseudo[k] = reconstruct_pseudo_orbit(lib, o.word);
    errors[k] = shadowing_error(cfg.model, o.x0, pseudo[k], cfg.integrator);
    if (o.word.complete && cfg.word_length >= 2)
      commutes[k] = commutation_check(cfg.model, partition, o.x0, cfg.word_length, cfg.T,
                                      cfg.integrator)
                        ? 1
                        : 0;
  });
  json per_orbit = json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < sel.orbits.size(); ++k) {
    worst = std::max(worst, errors[k]);
    json o = orbit_json(sel.orbits[k]);
    o["error"] = errors[k];
    o["commutes"] = commutes[k] < 0 ? json(nullptr) : json(commutes[k] == 1);
    per_orbit.push_back(o);
    io::write_pseudo_orbit_csv(paths.pseudo_orbits(), pseudo[k], k, k > 0);
  }
  if (sel.orbits.empty()) io::write_pseudo_orbit_csv(paths.pseudo_orbits(), PseudoOrbit{}, 0, false);
  const double slack = 1e-6;
  const bool ok = !sel.orbits.empty() && worst <= cfg.epsilon + slack;
  io::write_json_file(paths.shadow(), {{"epsilon", cfg.epsilon},
                                       {"integrator_slack", slack},
                                       {"max_error", worst},
                                       {"within_epsilon", ok},
                                       {"n_orbits", sel.orbits.size()},
                                       {"n_complete", sel.complete},
                                       {"candidates_drawn", sel.candidates},
                                       {"requested", cfg.orbits.count},
                                       {"per_orbit", per_orbit}});
  StageResult r{"shadow", {paths.shadow(), paths.pseudo_orbits()}, ""};
  r.summary = "shadowing: max error " + fmt(worst) + " vs epsilon " + fmt(cfg.epsilon) + " over " +
              std::to_string(sel.orbits.size()) + " orbits (" + std::to_string(sel.complete) +
              " complete of " + std::to_string(sel.candidates) + " candidates): " +
              (sel.orbits.empty() ? "nothing to verify" : ok ? "within epsilon" : "EXCEEDS epsilon");
  return r;
}

json enumeration_json(const Admissibility& rule, const EnumerateSpec& spec, std::size_t n) {
  json results = json::array();
  std::vector<CellId> starts = spec.starts;
  if (starts.empty())
    for (std::size_t k = 1; k <= n; ++k) starts.push_back(static_cast<CellId>(k));
  for (CellId n0 : starts) {
    const auto e = enumerate_admissible(rule, n0, spec.m, spec.cap);
    results.push_back({{"n0", n0},
                       {"n_words", e.words.size()},
                       {"overflow", e.overflow},
                       {"words", e.words},
                       {"reachable", e.reachable}});
  }
  return results;
}

StageResult stage_enumerate(const PipelineConfig& cfg, const Paths& paths) {
  const auto est = load_transitions(paths);
  json doc = {{"m", cfg.enumerate.m}, {"cap", cfg.enumerate.cap}};
  doc["markov"] = enumeration_json(Admissibility::markov(est.gamma), cfg.enumerate, est.gamma.size());
  if (fs::exists(paths.tensors())) {
    const auto tensors = io::tensors_from_json(io::read_json_file(paths.tensors()));
    if (!tensors.empty() && tensors.back().order >= 3) {
      doc["tensor_order"] = tensors.back().order;
      doc["tensor"] = enumeration_json(Admissibility::tensor(tensors.back(), est.gamma.size()),
                                       cfg.enumerate, est.gamma.size());
    }
  }
  io::write_json_file(paths.enumeration(), doc);
  std::size_t words = 0, overflow = 0;
  for (const auto& r : doc["markov"]) {
    words += r["n_words"].get<std::size_t>();
    overflow += r["overflow"].get<bool>() ? 1 : 0;
  }
  StageResult r{"enumerate", {paths.enumeration()}, ""};
  r.summary = "enumerated " + std::to_string(words) + " Markov-admissible words of length " +
              std::to_string(cfg.enumerate.m) + " over " + std::to_string(doc["markov"].size()) +
              " start symbols (" + std::to_string(overflow) + " overflowed the cap)";
  return r;
}

std::vector<StateVector> measure_samples(const PipelineConfig& cfg) {
  const auto& spec = cfg.measure;
  const std::size_t d = cfg.domain.dimension();
  if (spec.source == "csv") return io::read_points_csv(spec.path);
  std::vector<StateVector> pts;
  pts.reserve(spec.count);
  if (spec.source == "uniform") {
    auto rng = task_rng(cfg.seed, kMeasureStream, 0);
    while (pts.size() < spec.count) {
      StateVector x(d);
      for (std::size_t i = 0; i < d; ++i)
        x[i] = std::uniform_real_distribution<double>(cfg.domain.lower[i], cfg.domain.upper[i])(rng);
      if (cfg.domain.contains(x)) pts.push_back(std::move(x));
    }
    return pts;
  }
  // trajectory: natural measure along one long orbit sampled every T
  StateVector x = spec.start;
  if (x.empty()) {
    x.resize(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = 0.5 * (cfg.domain.lower[i] + cfg.domain.upper[i]);
  }
  Rk4Stepper stepper(cfg.model, cfg.integrator);
  stepper.advance(x, spec.burn_in);
  const double dt = cfg.T > 0.0 ? cfg.T : cfg.integrator.step;
  while (pts.size() < spec.count) {
    stepper.advance(x, dt);
    pts.push_back(x);
  }
  return pts;
}

StageResult stage_entropy(const PipelineConfig& cfg, const Paths& paths) {
  const Partition partition = load_partition(paths);
  const auto est = load_transitions(paths);
  const auto samples = measure_samples(cfg);
  if (cfg.measure.source != "csv") io::write_points_csv(paths.measure_samples(), samples);
  const auto mu = cell_measure(partition, samples);
  const double h = metric_entropy(mu);
  const auto ks = ks_entropy(est.p);
  const double log_n = std::log(static_cast<double>(partition.size()));
  io::write_json_file(paths.entropy(),
                      {{"metric_entropy", h},
                       {"log_n_cells", log_n},
                       {"measure",
                        {{"source", cfg.measure.source},
                         {"samples", mu.total},
                         {"covered", mu.covered},
                         {"weights", mu.weights}}},
                       {"ks_entropy_printed_formula", ks.printed},
                       {"ks_entropy_stationary_weighted", ks.stationary_weighted},
                       {"stationary", ks.stationary}});
  StageResult r{"entropy", {paths.entropy()}, ""};
  if (cfg.measure.source != "csv") r.outputs.insert(r.outputs.begin(), paths.measure_samples());
  r.summary = "H = " + fmt(h) + " (log N = " + fmt(log_n) + ", " + std::to_string(mu.covered) +
              "/" + std::to_string(mu.total) + " samples covered)\n" +
              "H_mu = " + fmt(ks.printed) + " (double sum as printed), " +
              fmt(ks.stationary_weighted) + " (stationary-weighted)";
  return r;
}

StageResult stage_bounds(const PipelineConfig& cfg, const Paths& paths) {
  const SegmentLibrary lib = load_segments(paths);
  const auto est = load_transitions(paths);
  if (est.gamma.size() != lib.size())
    throw ValidationError("segments and transitions disagree on the number of cells");
  json quantities = json::array();
  std::ostringstream table;
  for (const auto& q : cfg.quantities) {
    const auto env = segment_envelope(lib, q);
    json starts = json::array();
    for (std::size_t k = 1; k <= lib.size(); ++k) {
      const auto n0 = static_cast<CellId>(k);
      const auto b = reachable_bounds(env, est.gamma, n0, cfg.word_length);
      const auto c = closure_bounds(env, est.gamma, n0);
      starts.push_back({{"n0", n0},
                        {"q_lo", b.lo},
                        {"q_hi", b.hi},
                        {"reachable_count", b.reachable.size()},
                        {"closure_q_lo", c.lo},
                        {"closure_q_hi", c.hi}});
    }
    quantities.push_back({{"quantity", io::to_json(q)},
                          {"label", q.label()},
                          {"envelope", io::to_json(env)},
                          {"m", cfg.word_length},
                          {"bounds", starts}});
    table << q.label() << "\ncell,q_inf,q_sup\n";
    for (std::size_t k = 0; k < lib.size(); ++k)
      table << k + 1 << ',' << env.inf_per_cell[k] << ',' << env.sup_per_cell[k] << '\n';
  }
  io::write_json_file(paths.bounds(), {{"quantities", quantities}});
  StageResult r{"bounds", {paths.bounds()}, table.str()};
  if (!r.summary.empty() && r.summary.back() == '\n') r.summary.pop_back();
  return r;
}

StageResult stage_report(const PipelineConfig& cfg, const Paths& paths) {
  const Partition partition = load_partition(paths);
  json rep = {{"tool", "segdyn"},
              {"version", kToolVersion},
              {"model", io::to_json(cfg.model)},
              {"n_cells", partition.size()},
              {"epsilon", cfg.epsilon},
              {"T", cfg.T}};
  std::ostringstream txt;
  txt << "segdyn report\n"
      << "  model " << to_string(cfg.model.id()) << ", d=" << cfg.model.dimension()
      << ", N=" << partition.size() << " cells, epsilon=" << cfg.epsilon << ", T=" << cfg.T << '\n';
  json missing = json::array();
  const auto section = [&](const fs::path& p, const std::string& key, const std::string& stage,
                           const std::function<void(const json&)>& describe) {
    if (!fs::exists(p)) {
      missing.push_back(stage);
      return;
    }
    const json j = io::read_json_file(p);
    rep[key] = j;
    describe(j);
  };
  section(paths.predicates(), "predicates", "transitions", [&](const json& j) {
    txt << "  row sensitivity: " << j["row_sensitivity"].dump() << '\n';
    if (!j["expanding"].is_null())
      txt << "  expanding to depth " << j["expanding"]["depth"] << ": "
          << j["expanding"]["expanding_up_to_depth"].dump() << '\n';
  });
  section(paths.shadow(), "shadow", "shadow", [&](const json& j) {
    rep["shadow"].erase("per_orbit");
    txt << "  shadowing max error " << j["max_error"].dump() << " (epsilon " << j["epsilon"].dump()
        << ", " << j["n_orbits"].dump() << " orbits, " << j["n_complete"].dump() << " complete)\n";
  });
  section(paths.entropy(), "entropy", "entropy", [&](const json& j) {
    rep["entropy"].erase("stationary");
    rep["entropy"]["measure"].erase("weights");
    txt << "  H = " << j["metric_entropy"].dump() << ", H_mu = "
        << j["ks_entropy_printed_formula"].dump() << " (printed), "
        << j["ks_entropy_stationary_weighted"].dump() << " (stationary-weighted)\n";
  });
  if (fs::exists(paths.max_difference())) {
    txt << "  M_d profile in " << paths.max_difference().filename().string() << '\n';
  } else {
    missing.push_back("segments");
  }
  rep["missing_stages"] = missing;
  io::write_json_file(paths.report(), rep);
  {
    std::ofstream out(paths.report_text());
    out << txt.str();
  }
  StageResult r{"report", {paths.report(), paths.report_text()}, txt.str()};
  if (!r.summary.empty() && r.summary.back() == '\n') r.summary.pop_back();
  return r;
}

}  // namespace

// ---- public ---------------------------------------------------------------

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq);
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*node)[part] = parse_scalar(assignment.substr(eq + 1));
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

PipelineConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ValidationError("configuration must be a JSON object");
  PipelineConfig c;
  FieldErrors errs;
  errs.field("model", [&] { c.model = io::model_from_json(doc.at("model")); });
  errs.field("integrator", [&] { c.integrator = io::integrator_from_json(doc.value("integrator", json())); });
  errs.field("domain", [&] { c.domain = io::domain_from_json(doc.at("domain")); });
  errs.field("epsilon", [&] { c.epsilon = doc.at("epsilon").get<double>(); });
  errs.field("T", [&] { c.T = doc.at("T").get<double>(); });
  errs.field("n_t", [&] { c.n_t = doc.value("n_t", c.n_t); });
  errs.field("resolution", [&] { c.resolution = doc.at("resolution").get<std::vector<int>>(); });
  errs.field("collocation_cap", [&] { c.collocation_cap = doc.value("collocation_cap", c.collocation_cap); });
  errs.field("calibration", [&] {
    const json cal = doc.value("calibration", json::object());
    c.calibration.boundary_samples = cal.value("boundary_samples", c.calibration.boundary_samples);
    c.calibration.time_samples = cal.value("time_samples", c.calibration.time_samples);
    c.calibration.min_delta = cal.value("min_delta", c.calibration.min_delta);
    c.calibration.rel_tol = cal.value("rel_tol", c.calibration.rel_tol);
    c.delta_cap_fraction = cal.value("cap_fraction", c.delta_cap_fraction);
  });
  errs.field("samples_per_cell", [&] { c.samples_per_cell = doc.value("samples_per_cell", c.samples_per_cell); });
  errs.field("tensor_order", [&] { c.tensor_order = doc.value("tensor_order", c.tensor_order); });
  errs.field("m_max", [&] { c.m_max = doc.value("m_max", c.m_max); });
  errs.field("word_length", [&] { c.word_length = doc.value("word_length", c.word_length); });
  errs.field("fd_step", [&] { c.fd_step = doc.value("fd_step", c.fd_step); });
  errs.field("quantities", [&] {
    if (doc.contains("quantities"))
      for (const auto& q : doc.at("quantities")) c.quantities.push_back(io::quantity_from_json(q));
    else
      c.quantities.push_back(QuantitySpec{});
  });
  errs.field("orbits", [&] {
    const json o = doc.value("orbits", json::object());
    c.orbits.count = o.value("count", c.orbits.count);
    c.orbits.require_complete = o.value("require_complete", c.orbits.require_complete);
    c.orbits.max_candidates = o.value("max_candidates", c.orbits.max_candidates);
    if (o.contains("initial_points"))
      c.orbits.initial_points = o.at("initial_points").get<std::vector<StateVector>>();
  });
  errs.field("measure", [&] {
    const json m = doc.value("measure", json::object());
    c.measure.source = m.value("source", c.measure.source);
    c.measure.count = m.value("count", c.measure.count);
    c.measure.path = m.value("path", c.measure.path);
    c.measure.burn_in = m.value("burn_in", c.measure.burn_in);
    if (m.contains("start")) c.measure.start = m.at("start").get<StateVector>();
  });
  errs.field("enumerate", [&] {
    const json e = doc.value("enumerate", json::object());
    c.enumerate.m = e.value("m", c.enumerate.m);
    c.enumerate.cap = e.value("cap", c.enumerate.cap);
    if (e.contains("starts")) c.enumerate.starts = e.at("starts").get<std::vector<CellId>>();
  });
  errs.field("rng_seed", [&] { c.seed = doc.value("rng_seed", c.seed); });
  errs.field("jobs", [&] { c.jobs = doc.value("jobs", c.jobs); });
  errs.field("output_dir", [&] { c.output_dir = doc.value("output_dir", c.output_dir.string()); });
  errs.raise_if_any();

  const std::size_t d = c.model.dimension();
  errs.require(c.domain.dimension() == d, "domain: dimension " + std::to_string(c.domain.dimension()) +
                                              " does not match model dimension " + std::to_string(d));
  errs.require(c.resolution.size() == c.domain.dimension(), "resolution: needs one entry per domain axis");
  for (int r : c.resolution) errs.require(r >= 1, "resolution: entries must be >= 1");
  errs.require(c.epsilon > 0.0, "epsilon: must be > 0");
  errs.require(c.T > 0.0, "T: must be > 0");
  errs.require(c.n_t >= 2, "n_t: must be >= 2");
  errs.require(c.collocation_cap >= 1, "collocation_cap: must be >= 1");
  errs.require(c.calibration.boundary_samples >= 0, "calibration.boundary_samples: must be >= 0");
  errs.require(c.calibration.time_samples >= 2, "calibration.time_samples: must be >= 2");
  errs.require(c.calibration.min_delta > 0.0, "calibration.min_delta: must be > 0");
  errs.require(c.calibration.rel_tol > 0.0, "calibration.rel_tol: must be > 0");
  errs.require(c.delta_cap_fraction > 0.0, "calibration.cap_fraction: must be > 0");
  errs.require(c.samples_per_cell >= 1, "samples_per_cell: must be >= 1");
  errs.require(c.tensor_order >= 2, "tensor_order: must be >= 2");
  errs.require(c.m_max >= 1, "m_max: must be >= 1");
  errs.require(c.word_length >= 1, "word_length: must be >= 1");
  errs.require(c.fd_step > 0.0, "fd_step: must be > 0");
  errs.require(c.orbits.count >= 1, "orbits.count: must be >= 1");
  errs.require(c.orbits.max_candidates >= 1, "orbits.max_candidates: must be >= 1");
  for (const auto& x : c.orbits.initial_points)
    errs.require(x.size() == d && all_finite(x), "orbits.initial_points: every point needs " +
                                                     std::to_string(d) + " finite coordinates");
  errs.require(c.measure.source == "uniform" || c.measure.source == "trajectory" ||
                   c.measure.source == "csv",
               "measure.source: must be uniform, trajectory or csv");
  errs.require(c.measure.source != "csv" || !c.measure.path.empty(), "measure.path: required for csv source");
  errs.require(c.measure.source == "csv" || c.measure.count >= 1, "measure.count: must be >= 1");
  errs.require(c.measure.start.empty() || c.measure.start.size() == d, "measure.start: wrong dimension");
  errs.require(c.enumerate.m >= 1, "enumerate.m: must be >= 1");
  for (const auto& q : c.quantities) errs.field("quantities", [&] { q.validate(d); });
  errs.raise_if_any();

  c.raw = doc;
  return c;
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (!fs::exists(path)) throw ValidationError("config file " + path.string() + " does not exist");
  json doc = io::read_json_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  PipelineConfig cfg = parse_config(doc);
  // Relative paths in the document resolve against the document's directory.
  if (cfg.measure.source == "csv" && fs::path(cfg.measure.path).is_relative())
    cfg.measure.path = (path.parent_path() / cfg.measure.path).string();
  return cfg;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"calibrate", "segments", "transitions",
                                              "encode",    "shadow",   "enumerate",
                                              "entropy",   "bounds",   "report"};
  return names;
}

StageResult run_stage(const std::string& stage, const PipelineConfig& cfg) {
  const Paths paths{cfg.output_dir};
  fs::create_directories(paths.root);
  const auto start = std::chrono::steady_clock::now();
  StageResult r;
  if (stage == "calibrate")
    r = stage_calibrate(cfg, paths);
  else if (stage == "segments")
    r = stage_segments(cfg, paths);
  else if (stage == "transitions")
    r = stage_transitions(cfg, paths);
  else if (stage == "encode")
    r = stage_encode(cfg, paths);
  else if (stage == "shadow")
    r = stage_shadow(cfg, paths);
  else if (stage == "enumerate")
    r = stage_enumerate(cfg, paths);
  else if (stage == "entropy")
    r = stage_entropy(cfg, paths);
  else if (stage == "bounds")
    r = stage_bounds(cfg, paths);
  else if (stage == "report")
    r = stage_report(cfg, paths);
  else
    throw ValidationError("unknown subcommand '" + stage + "'");
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  update_manifest(cfg, paths, r, seconds);
  return r;
}

StageResult check_stage(const std::string& stage, const PipelineConfig& cfg) {
  const Paths paths{cfg.output_dir};
  StageResult r{stage, {}, ""};
  const auto need_json = [&](const fs::path& p, const std::string& producer) {
    require_artifact(p, producer);
    r.outputs.push_back(p);
    return io::read_json_file(p);
  };
  const auto field = [](const json& j, const char* key, const fs::path& p) -> const json& {
    if (!j.contains(key)) throw ValidationError(p.string() + ": missing field '" + key + "'");
    return j.at(key);
  };
  try {
    if (stage == "calibrate") {
      require_artifact(paths.collocation(), "calibrate");
      const auto centers = io::read_points_csv(paths.collocation());
      const Cover cover = io::cover_from_json(need_json(paths.cover(), "calibrate"));
      const Partition part(cover);
      for (const auto& c : centers)
        if (!part.assign_cell(c)) throw ValidationError("a collocation center is not covered");
      const json cal = need_json(paths.calibration(), "calibrate");
      if (field(cal, "per_center", paths.calibration()).size() != centers.size())
        throw ValidationError("calibration.json does not match collocation.csv");
    } else if (stage == "segments") {
      const auto lib = load_segments(paths);
      const Cover cover = io::cover_from_json(need_json(paths.cover(), "calibrate"));
      if (lib.size() != cover.size()) throw ValidationError("one segment per cover ball expected");
      for (std::size_t k = 0; k < lib.size(); ++k)
        if (lib.segments[k].samples.states.front() != cover.balls[k].center)
          throw ValidationError("segment " + std::to_string(k + 1) + " does not start at its center");
      require_artifact(paths.max_difference(), "segments");
    } else if (stage == "transitions") {
      const auto est = io::transitions_from_json(need_json(paths.transitions(), "transitions"));
      for (std::size_t m = 1; m <= est.gamma.size(); ++m) {
        const auto cm = static_cast<CellId>(m);
        double sum = 0.0;
        for (const auto& [n, v] : est.p.row(cm)) {
          sum += v;
          if (est.gamma.count(cm, n) == 0) throw ValidationError("p > 0 without an observed count");
        }
        if (!est.p.row(cm).empty() && std::abs(sum - 1.0) > 1e-9)
          throw ValidationError("Markov row " + std::to_string(m) + " does not sum to 1");
      }
      const auto tensors = io::tensors_from_json(need_json(paths.tensors(), "transitions"));
      for (std::size_t k = 1; k < tensors.size(); ++k)
        for (const Word& w : tensors[k].tuples)
          if (!tensors[k - 1].admissible(Word(w.begin(), w.end() - 1)))
            throw ValidationError("tensor prefix closure violated");
      if (!tensors.empty() && tensors.front().tuples != tensor_from_matrix(est.gamma).tuples)
        throw ValidationError("order-2 tensor differs from Gamma");
      field(need_json(paths.predicates(), "transitions"), "row_sensitivity", paths.predicates());
      field(need_json(paths.ball_rule(), "transitions"), "rows", paths.ball_rule());
    } else if (stage == "encode") {
      const json w = need_json(paths.words(), "encode");
      for (const auto& o : field(w, "orbits", paths.words()))
        if (!o.contains("word") || !o.contains("complete") || !o.contains("x0"))
          throw ValidationError("words.json orbit entry is malformed");
    } else if (stage == "shadow") {
      const json s = need_json(paths.shadow(), "shadow");
      for (const char* key : {"epsilon", "max_error", "per_orbit", "n_orbits"}) field(s, key, paths.shadow());
      require_artifact(paths.pseudo_orbits(), "shadow");
    } else if (stage == "enumerate") {
      field(need_json(paths.enumeration(), "enumerate"), "markov", paths.enumeration());
    } else if (stage == "entropy") {
      const json e = need_json(paths.entropy(), "entropy");
      for (const char* key : {"metric_entropy", "ks_entropy_printed_formula", "ks_entropy_stationary_weighted"})
        if (!field(e, key, paths.entropy()).is_number()) throw ValidationError(std::string(key) + " is not a number");
    } else if (stage == "bounds") {
      for (const auto& q : field(need_json(paths.bounds(), "bounds"), "quantities", paths.bounds())) {
        const auto& env = q.at("envelope");
        const auto sup = env.at("sup_per_cell").get<std::vector<double>>();
        const auto inf = env.at("inf_per_cell").get<std::vector<double>>();
        for (std::size_t k = 0; k < sup.size(); ++k)
          if (inf[k] > sup[k]) throw ValidationError("envelope has q_inf > q_sup");
      }
    } else if (stage == "report") {
      field(need_json(paths.report(), "report"), "n_cells", paths.report());
    } else {
      throw ValidationError("unknown subcommand '" + stage + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed artifact: ") + e.what());
  }
  r.summary = stage + ": " + std::to_string(r.outputs.size()) + " artifact(s) valid";
  return r;
}

StateVector draw_partition_point(const Partition& partition, std::uint64_t seed, std::size_t i) {
  auto rng = task_rng(seed, kOrbitStream, i);
  std::uniform_int_distribution<CellId> pick(1, static_cast<CellId>(partition.size()));
  for (int attempt = 0; attempt < 64; ++attempt) {
    const CellId n = pick(rng);
    if (auto x = sample_in_cell(partition, n, rng, 1000)) return *x;
  }
  throw NumericsError("could not draw a point inside the partition");
}

}  // namespace segdyn
