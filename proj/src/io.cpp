#include "segdyn/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace segdyn::io {

namespace {

std::vector<double> flatten(const json& j, std::size_t depth, const std::string& what) {
  std::vector<double> out;
  if (depth == 0) {
    out.push_back(j.get<double>());
    return out;
  }
  if (!j.is_array()) throw ValidationError(what + " must be a nested array");
  for (const auto& e : j) {
    auto part = flatten(e, depth - 1, what);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

json nest(const std::vector<double>& flat, std::size_t d, std::size_t depth, std::size_t offset = 0) {
  json arr = json::array();
  std::size_t stride = 1;
  for (std::size_t k = 1; k < depth; ++k) stride *= d;
  for (std::size_t i = 0; i < d; ++i) {
    if (depth == 1)
      arr.push_back(flat[offset + i]);
    else
      arr.push_back(nest(flat, d, depth - 1, offset + i * stride));
  }
  return arr;
}

StateVector point_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array of numbers");
  StateVector x;
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError(what + " must contain only numbers");
    x.push_back(v.get<double>());
  }
  return x;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, bool append = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::vector<double> parse_row(const std::string& line, std::size_t lineno,
                              const std::filesystem::path& path) {
  std::vector<double> row;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find(',', start);
    if (end == std::string::npos) end = line.size();
    std::string cell = line.substr(start, end - start);
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t lead = cell.find_first_not_of(' ');
    cell = lead == std::string::npos ? "" : cell.substr(lead);
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": bad number '" +
                            cell + "'");
    row.push_back(v);
    start = end + 1;
  }
  return row;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

FlowModel model_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("model must be a JSON object");
  const ModelId id = model_id_from_string(j.at("model_id").get<std::string>());
  const json params = j.value("parameters", json::object());
  const auto dim = j.contains("dimension") ? j.at("dimension").get<std::size_t>() : 0;
  switch (id) {
    case ModelId::LinearDiagonal: {
      auto rates = params.at("rates").get<std::vector<double>>();
      if (dim != 0 && rates.size() != dim)
        throw ValidationError("LinearDiagonal needs one rate per dimension");
      return FlowModel::linear_diagonal(std::move(rates));
    }
    case ModelId::Lorenz: {
      if (dim != 0 && dim != 3) throw ValidationError("Lorenz has dimension 3");
      LorenzParams p;
      p.sigma = params.value("sigma", p.sigma);
      p.rho = params.value("rho", p.rho);
      p.beta = params.value("beta", p.beta);
      return FlowModel::lorenz(p);
    }
    case ModelId::QuadraticGeneric: {
      if (dim == 0) throw ValidationError("QuadraticGeneric needs a positive dimension");
      QuadraticParams p;
      if (params.contains("linear")) p.linear = flatten(params.at("linear"), 2, "linear");
      if (params.contains("quadratic"))
        p.quadratic = flatten(params.at("quadratic"), 3, "quadratic");
      if (params.contains("forcing")) p.forcing = flatten(params.at("forcing"), 1, "forcing");
      return FlowModel::quadratic(dim, std::move(p));
    }
  }
  throw ValidationError("unsupported model");
}

json to_json(const FlowModel& model) {
  json j;
  j["model_id"] = to_string(model.id());
  j["dimension"] = model.dimension();
  switch (model.id()) {
    case ModelId::LinearDiagonal:
      j["parameters"] = {{"rates", model.linear_diagonal_params().rates}};
      break;
    case ModelId::Lorenz: {
      const auto& p = model.lorenz_params();
      j["parameters"] = {{"sigma", p.sigma}, {"rho", p.rho}, {"beta", p.beta}};
      break;
    }
    case ModelId::QuadraticGeneric: {
      const auto& p = model.quadratic_params();
      const std::size_t d = model.dimension();
      j["parameters"] = {{"linear", nest(p.linear, d, 2)},
                         {"quadratic", nest(p.quadratic, d, 3)},
                         {"forcing", p.forcing}};
      break;
    }
  }
  return j;
}

IntegratorConfig integrator_from_json(const json& j) {
  IntegratorConfig cfg;
  if (j.is_null()) return cfg;
  cfg.step = j.value("step", cfg.step);
  const auto scheme = j.value("scheme", std::string("RK4"));
  if (scheme != "RK4") throw ValidationError("unsupported integrator scheme '" + scheme + "'");
  validate(cfg);
  return cfg;
}

json to_json(const IntegratorConfig& cfg) { return {{"step", cfg.step}, {"scheme", "RK4"}}; }

BoxDomain domain_from_json(const json& j) {
  BoxDomain d;
  d.lower = point_from_json(j.at("lower"), "domain.lower");
  d.upper = point_from_json(j.at("upper"), "domain.upper");
  if (j.contains("ball")) {
    d.ball_center = point_from_json(j.at("ball").at("center"), "domain.ball.center");
    d.ball_radius = j.at("ball").at("radius").get<double>();
  }
  d.validate();
  return d;
}

json to_json(const BoxDomain& domain) {
  json j = {{"lower", domain.lower}, {"upper", domain.upper}};
  if (domain.ball_center) j["ball"] = {{"center", *domain.ball_center}, {"radius", domain.ball_radius}};
  return j;
}

Cover cover_from_json(const json& j) {
  Cover c;
  for (const auto& b : j.at("balls"))
    c.balls.push_back({b.at("index").get<CellId>(), point_from_json(b.at("center"), "ball center"),
                       b.at("radius").get<double>()});
  c.validate();
  return c;
}

json to_json(const Cover& cover) {
  json balls = json::array();
  for (const auto& b : cover.balls)
    balls.push_back({{"index", b.index}, {"center", b.center}, {"radius", b.radius}});
  return {{"balls", balls}};
}

QuantitySpec quantity_from_json(const json& j) {
  QuantitySpec q;
  q.kind = quantity_kind_from_string(j.at("kind").get<std::string>());
  if (q.kind == QuantityKind::Coordinate) q.index = j.at("index").get<std::size_t>();
  if (q.kind == QuantityKind::WeightedQuadratic) q.weights = flatten(j.at("W"), 2, "W");
  return q;
}

json to_json(const QuantitySpec& q) {
  json j = {{"kind", to_string(q.kind)}};
  if (q.kind == QuantityKind::Coordinate) j["index"] = q.index;
  if (q.kind == QuantityKind::WeightedQuadratic) {
    const auto d = static_cast<std::size_t>(std::llround(std::sqrt(q.weights.size())));
    j["W"] = nest(q.weights, d, 2);
  }
  return j;
}

json transitions_to_json(const TransitionMatrix& gamma, const MarkovMatrix& p,
                         std::size_t dense_limit) {
  const std::size_t n = gamma.size();
  json j;
  j["n_cells"] = n;
  json sampled = json::array(), escaped = json::array(), fraction = json::array();
  for (std::size_t m = 1; m <= n; ++m) {
    const auto c = static_cast<CellId>(m);
    sampled.push_back(gamma.sampled(c));
    escaped.push_back(gamma.escaped(c));
    fraction.push_back(gamma.escape_fraction(c));
  }
  if (n <= dense_limit) {
    j["format"] = "dense";
    json g = json::array(), counts = json::array(), probs = json::array();
    for (std::size_t m = 1; m <= n; ++m) {
      json gr = json::array(), cr = json::array(), pr = json::array();
      for (std::size_t k = 1; k <= n; ++k) {
        const auto a = static_cast<CellId>(m), b = static_cast<CellId>(k);
        gr.push_back(gamma.admissible(a, b) ? 1 : 0);
        cr.push_back(gamma.count(a, b));
        pr.push_back(p(a, b));
      }
      g.push_back(gr);
      counts.push_back(cr);
      probs.push_back(pr);
    }
    j["gamma"] = g;
    j["counts"] = counts;
    j["p"] = probs;
  } else {
    j["format"] = "sparse";
    json counts = json::array(), probs = json::array();
    for (std::size_t m = 1; m <= n; ++m) {
      const auto a = static_cast<CellId>(m);
      for (const auto& [b, c] : gamma.row(a)) counts.push_back({a, b, c});
      for (const auto& [b, v] : p.row(a)) probs.push_back({a, b, v});
    }
    j["counts"] = counts;
    j["p"] = probs;
  }
  j["sampled"] = sampled;
  j["escaped"] = escaped;
  j["escape_fraction"] = fraction;
  j["unsupported_rows"] = gamma.unsupported_rows();
  return j;
}

TransitionEstimate transitions_from_json(const json& j) {
  const auto n = j.at("n_cells").get<std::size_t>();
  TransitionEstimate est{TransitionMatrix(n), MarkovMatrix(n)};
  const auto format = j.at("format").get<std::string>();
  if (format == "dense") {
    const auto& g = j.at("gamma");
    const auto& counts = j.at("counts");
    const auto& probs = j.at("p");
    if (g.size() != n || counts.size() != n || probs.size() != n)
      throw ValidationError("dense transition tables must have n_cells rows");
    for (std::size_t m = 0; m < n; ++m) {
      if (g[m].size() != n || counts[m].size() != n || probs[m].size() != n)
        throw ValidationError("dense transition tables must be square");
      for (std::size_t k = 0; k < n; ++k) {
        const auto a = static_cast<CellId>(m + 1), b = static_cast<CellId>(k + 1);
        const auto c = counts[m][k].get<std::int64_t>();
        if (g[m][k].get<int>() != 0) est.gamma.set_admissible(a, b);
        if (c > 0) {
          if (g[m][k].get<int>() == 0) throw ValidationError("count without admissibility");
          est.gamma.add_count(a, b, c);
        }
        est.p.set(a, b, probs[m][k].get<double>());
      }
    }
  } else if (format == "sparse") {
    for (const auto& t : j.at("counts"))
      est.gamma.add_count(t.at(0).get<CellId>(), t.at(1).get<CellId>(), t.at(2).get<std::int64_t>());
    for (const auto& t : j.at("p"))
      est.p.set(t.at(0).get<CellId>(), t.at(1).get<CellId>(), t.at(2).get<double>());
  } else {
    throw ValidationError("unknown transition format '" + format + "'");
  }
  if (j.contains("sampled")) {
    const auto& s = j.at("sampled");
    const auto& e = j.at("escaped");
    if (s.size() != n || e.size() != n) throw ValidationError("escape tallies need n_cells entries");
    for (std::size_t m = 0; m < n; ++m) {
      est.gamma.add_sampled(static_cast<CellId>(m + 1), s[m].get<std::int64_t>());
      est.gamma.add_escapes(static_cast<CellId>(m + 1), e[m].get<std::int64_t>());
    }
  }
  return est;
}

json tensors_to_json(const std::vector<TransitionTensor>& tensors) {
  json arr = json::array();
  for (const auto& t : tensors) arr.push_back({{"order", t.order}, {"tuples", t.tuples}});
  return {{"tensors", arr}};
}

std::vector<TransitionTensor> tensors_from_json(const json& j) {
  std::vector<TransitionTensor> out;
  for (const auto& t : j.at("tensors")) {
    TransitionTensor tt;
    tt.order = t.at("order").get<int>();
    for (const auto& w : t.at("tuples")) {
      auto word = w.get<Word>();
      if (static_cast<int>(word.size()) != tt.order)
        throw ValidationError("tensor tuple length differs from its order");
      tt.tuples.insert(std::move(word));
    }
    out.push_back(std::move(tt));
  }
  return out;
}

json to_json(const QuantityEnvelope& env) {
  return {{"sup_per_cell", env.sup_per_cell}, {"inf_per_cell", env.inf_per_cell}};
}

void write_points_csv(const std::filesystem::path& path, const std::vector<StateVector>& pts) {
  auto out = open_out(path);
  for (const auto& p : pts) {
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? "," : "") << format_double(p[i]);
    out << '\n';
  }
}

std::vector<StateVector> read_points_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<StateVector> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    pts.push_back(parse_row(line, lineno, path));
    if (pts.back().size() != pts.front().size())
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": rows have different lengths");
  }
  return pts;
}

void save_library(const std::filesystem::path& dir, const SegmentLibrary& lib) {
  lib.validate();
  std::filesystem::create_directories(dir);
  json meta = {{"T", lib.T},
               {"n_t", lib.n_t},
               {"epsilon", lib.epsilon},
               {"model_id", to_string(lib.model_id)},
               {"integrator", to_json(lib.integrator)},
               {"n_segments", lib.size()},
               {"dimension", lib.segments.front().samples.states.front().size()}};
  write_json_file(dir / "library.json", meta);
  auto out = open_out(dir / "segments.csv");
  const std::size_t d = lib.segments.front().samples.states.front().size();
  out << "cell,k,t";
  for (std::size_t i = 0; i < d; ++i) out << ",coord_" << i;
  out << '\n';
  for (const auto& seg : lib.segments)
    for (std::size_t k = 0; k < seg.samples.states.size(); ++k) {
      out << seg.cell << ',' << k << ',' << format_double(seg.samples.times[k]);
      for (double v : seg.samples.states[k]) out << ',' << format_double(v);
      out << '\n';
    }
}

SegmentLibrary load_library(const std::filesystem::path& dir) {
  const json meta = read_json_file(dir / "library.json");
  SegmentLibrary lib;
  lib.T = meta.at("T").get<double>();
  lib.n_t = meta.at("n_t").get<int>();
  lib.epsilon = meta.value("epsilon", 0.0);
  lib.model_id = model_id_from_string(meta.at("model_id").get<std::string>());
  lib.integrator = integrator_from_json(meta.at("integrator"));
  const auto n = meta.at("n_segments").get<std::size_t>();
  const auto d = meta.at("dimension").get<std::size_t>();
  lib.segments.resize(n);
  for (std::size_t k = 0; k < n; ++k) lib.segments[k].cell = static_cast<CellId>(k + 1);

  auto in = open_in(dir / "segments.csv");
  std::string line;
  std::getline(in, line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto row = parse_row(line, lineno, dir / "segments.csv");
    if (row.size() != 3 + d) throw ValidationError("segments.csv row has the wrong width");
    const auto cell = static_cast<std::size_t>(row[0]);
    const auto k = static_cast<std::size_t>(row[1]);
    if (cell < 1 || cell > n) throw ValidationError("segments.csv cell out of range");
    auto& s = lib.segments[cell - 1].samples;
    if (k != s.times.size()) throw ValidationError("segments.csv rows out of order");
    s.times.push_back(row[2]);
    s.states.emplace_back(row.begin() + 3, row.end());
  }
  lib.validate();
  return lib;
}

void write_max_difference_csv(const std::filesystem::path& path, const std::vector<double>& times,
                              const std::vector<double>& md) {
  auto out = open_out(path);
  out << "t,M_d\n";
  for (std::size_t k = 0; k < md.size(); ++k)
    out << format_double(times[k]) << ',' << format_double(md[k]) << '\n';
}

void write_pseudo_orbit_csv(const std::filesystem::path& path, const PseudoOrbit& orbit,
                            std::size_t orbit_id, bool append) {
  auto out = open_out(path, append);
  const std::size_t d = orbit.states.empty() ? 0 : orbit.states.front().size();
  if (!append) {
    out << "orbit,window,k,t";
    for (std::size_t i = 0; i < d; ++i) out << ",coord_" << i;
    out << '\n';
  }
  const auto n_t = static_cast<std::size_t>(orbit.n_t);
  for (std::size_t i = 0; i < orbit.states.size(); ++i) {
    out << orbit_id << ',' << i / n_t << ',' << i % n_t << ',' << format_double(orbit.times[i]);
    for (double v : orbit.states[i]) out << ',' << format_double(v);
    out << '\n';
  }
}

json read_json_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::string file_digest(const std::filesystem::path& path) {
  auto in = open_in(path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

}  // namespace segdyn::io
