#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "segdyn/pipeline.hpp"

namespace py = pybind11;
using namespace segdyn;

namespace {

IntegratorConfig integrator(double step) { return IntegratorConfig{step, Scheme::RK4}; }

std::vector<std::vector<int>> dense_gamma(const TransitionMatrix& g) {
  std::vector<std::vector<int>> out(g.size(), std::vector<int>(g.size(), 0));
  for (std::size_t m = 1; m <= g.size(); ++m)
    for (const auto& [n, c] : g.row(static_cast<CellId>(m))) out[m - 1][static_cast<std::size_t>(n - 1)] = 1;
  return out;
}

std::vector<std::vector<double>> dense_p(const MarkovMatrix& p) {
  std::vector<std::vector<double>> out(p.size(), std::vector<double>(p.size(), 0.0));
  for (std::size_t m = 1; m <= p.size(); ++m)
    for (const auto& [n, v] : p.row(static_cast<CellId>(m))) out[m - 1][static_cast<std::size_t>(n - 1)] = v;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "segment description of chaotic flows";
  m.attr("__version__") = kToolVersion;

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NumericsError>(m, "NumericsError", base.ptr());
  py::register_exception<MissingArtifactError>(m, "MissingArtifactError", base.ptr());

  py::class_<FlowModel>(m, "FlowModel")
      .def_static("linear_diagonal", &FlowModel::linear_diagonal, py::arg("rates"))
      .def_static(
          "lorenz",
          [](double sigma, double rho, double beta) { return FlowModel::lorenz({sigma, rho, beta}); },
          py::arg("sigma") = 10.0, py::arg("rho") = 28.0, py::arg("beta") = 8.0 / 3.0)
      .def_static(
          "quadratic",
          [](std::size_t d, std::vector<double> linear, std::vector<double> quadratic,
             std::vector<double> forcing) {
            return FlowModel::quadratic(d, {std::move(linear), std::move(quadratic), std::move(forcing)});
          },
          py::arg("dimension"), py::arg("linear") = std::vector<double>{},
          py::arg("quadratic") = std::vector<double>{}, py::arg("forcing") = std::vector<double>{})
      .def_property_readonly("dimension", &FlowModel::dimension)
      .def_property_readonly("model_id", [](const FlowModel& f) { return to_string(f.id()); })
      .def("rhs", [](const FlowModel& f, const StateVector& x) {
        validate(f, x);
        StateVector dx(x.size());
        f.rhs(x, dx);
        return dx;
      });

  m.def(
      "advance",
      [](const FlowModel& f, const StateVector& x, double t, double step) {
        return advance(f, x, t, integrator(step));
      },
      py::arg("model"), py::arg("x"), py::arg("t"), py::arg("step") = 1e-3);
  m.def(
      "sample_trajectory",
      [](const FlowModel& f, const StateVector& x, double horizon, int n, double step) {
        const auto s = sample_trajectory(f, x, horizon, n, integrator(step));
        return py::make_tuple(s.times, s.states);
      },
      py::arg("model"), py::arg("x"), py::arg("horizon"), py::arg("n_samples"), py::arg("step") = 1e-3);
  m.def(
      "jacobian_norm",
      [](const FlowModel& f, const StateVector& x, double T, double fd_step, double step) {
        return jacobian_norm(f, x, T, integrator(step), fd_step);
      },
      py::arg("model"), py::arg("x"), py::arg("T"), py::arg("fd_step") = 1e-6, py::arg("step") = 1e-3);

  m.def(
      "collocate",
      [](const StateVector& lower, const StateVector& upper, const std::vector<int>& resolution) {
        return collocate(BoxDomain{lower, upper, {}, 0.0}, resolution);
      },
      py::arg("lower"), py::arg("upper"), py::arg("resolution"));
  m.def(
      "calibrate_delta",
      [](const FlowModel& f, const StateVector& center, double T, double eps, int boundary_samples,
         double max_delta, std::uint64_t seed, double step) {
        CalibrationOptions o;
        o.boundary_samples = boundary_samples;
        o.max_delta = max_delta;
        o.seed = seed;
        return calibrate_delta(f, center, T, eps, integrator(step), o).delta;
      },
      py::arg("model"), py::arg("center"), py::arg("T"), py::arg("epsilon"), py::arg("boundary_samples") = 26,
      py::arg("max_delta") = std::numeric_limits<double>::infinity(), py::arg("seed") = 0,
      py::arg("step") = 1e-3);

  py::class_<Cover>(m, "Cover")
      .def_property_readonly("size", &Cover::size)
      .def_property_readonly("centers",
                             [](const Cover& c) {
                               std::vector<StateVector> out;
                               for (const auto& b : c.balls) out.push_back(b.center);
                               return out;
                             })
      .def_property_readonly("radii", [](const Cover& c) {
        std::vector<double> out;
        for (const auto& b : c.balls) out.push_back(b.radius);
        return out;
      });
  m.def(
      "make_cover",
      [](const std::vector<StateVector>& centers, const std::vector<double>& radii) {
        if (centers.size() != radii.size()) throw ValidationError("one radius per center");
        Cover c;
        for (std::size_t k = 0; k < centers.size(); ++k)
          c.balls.push_back({static_cast<CellId>(k + 1), centers[k], radii[k]});
        c.validate();
        return c;
      },
      py::arg("centers"), py::arg("radii"));
  m.def("minimal_cover", &minimal_cover, py::arg("centers"), py::arg("radii"), py::arg("samples"));

  py::class_<Partition>(m, "Partition")
      .def(py::init<Cover>(), py::arg("cover"))
      .def_property_readonly("size", &Partition::size)
      .def("assign_cell", [](const Partition& p, const StateVector& x) { return p.assign_cell(x); })
      .def("cell_measure", [](const Partition& p, const std::vector<StateVector>& samples) {
        return cell_measure(p, samples).weights;
      });
  m.def(
      "metric_entropy",
      [](const std::vector<double>& w) { return metric_entropy(CellMeasure{w, 1, 1}); },
      py::arg("weights"));

  py::class_<SegmentLibrary>(m, "SegmentLibrary")
      .def_property_readonly("size", &SegmentLibrary::size)
      .def("segment", [](const SegmentLibrary& lib, CellId n) {
        const auto& s = lib.segment(n).samples;
        return py::make_tuple(s.times, s.states);
      });
  m.def(
      "build_segments",
      [](const FlowModel& f, const Cover& c, double T, int n_t, double step) {
        return build_segments(f, c, T, n_t, integrator(step));
      },
      py::arg("model"), py::arg("cover"), py::arg("T"), py::arg("n_t"), py::arg("step") = 1e-3);
  m.def("max_difference", [](const SegmentLibrary& lib) { return max_difference(lib); }, py::arg("library"));

  m.def(
      "estimate_transitions",
      [](const FlowModel& f, const Partition& p, double T, int samples_per_cell, std::uint64_t seed,
         double step) {
        SamplingOptions o;
        o.samples_per_cell = samples_per_cell;
        o.seed = seed;
        const auto e = estimate_transitions(f, p, T, integrator(step), o);
        return py::make_tuple(dense_gamma(e.gamma), dense_p(e.p));
      },
      py::arg("model"), py::arg("partition"), py::arg("T"), py::arg("samples_per_cell") = 200,
      py::arg("seed") = 0, py::arg("step") = 1e-3);
  m.def(
      "row_sensitivity",
      [](const std::vector<std::vector<int>>& g) { return row_sensitivity(TransitionMatrix::from_pattern(g)); },
      py::arg("gamma"));
  m.def(
      "enumerate_admissible",
      [](const std::vector<std::vector<int>>& g, CellId n0, int m, std::size_t cap) {
        const auto e = enumerate_admissible(TransitionMatrix::from_pattern(g), n0, m, cap);
        return py::make_tuple(e.words, e.reachable, e.overflow);
      },
      py::arg("gamma"), py::arg("n0"), py::arg("m"), py::arg("cap") = 100000);
  m.def(
      "ks_entropy",
      [](const std::vector<std::vector<double>>& p) {
        const auto k = ks_entropy(MarkovMatrix::from_dense(p));
        return py::make_tuple(k.printed, k.stationary_weighted);
      },
      py::arg("p"));
  m.def(
      "encode_orbit",
      [](const FlowModel& f, const Partition& p, const StateVector& x0, int m, double T, double step) {
        const auto w = encode_orbit(f, p, x0, m, T, integrator(step));
        return py::make_tuple(w.word, w.complete);
      },
      py::arg("model"), py::arg("partition"), py::arg("x0"), py::arg("m"), py::arg("T"), py::arg("step") = 1e-3);
  m.def(
      "shadowing_error",
      [](const FlowModel& f, const SegmentLibrary& lib, const StateVector& x0, const Word& word, double T,
         double step) {
        const auto pseudo = reconstruct_pseudo_orbit(lib, SymbolSequence{word, T, true});
        return shadowing_error(f, x0, pseudo, integrator(step));
      },
      py::arg("model"), py::arg("library"), py::arg("x0"), py::arg("word"), py::arg("T"), py::arg("step") = 1e-3);

  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& config, const std::vector<std::string>& overrides) {
        const auto r = run_stage(stage, load_config(config, overrides));
        return r.summary;
      },
      py::arg("stage"), py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
  m.def("stage_names", &stage_names);
}
