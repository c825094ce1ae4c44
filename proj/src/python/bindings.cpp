#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpob/cli_reports.hpp"
#include "gpob/errors.hpp"

namespace py = pybind11;
using namespace gpob;

namespace {

py::object to_python(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

template <class T>
py::array_t<T> grid_array(const std::vector<T>& v, std::size_t n1, std::size_t n2) {
    py::array_t<T> out({n1, n2});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict flow_dict(const FlowSolution& f) {
    const Grid2D& g = *f.grid;
    const std::size_t ni = g.n_radial(), nj = g.n_angular();
    Vec x1(g.size()), x2(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) x1[k] = g.x1(k), x2[k] = g.x2(k);
    py::list extrema;
    for (const auto& e : boundary_extrema(f).trace.extrema)
        extrema.append(py::dict(py::arg("theta") = e.theta, py::arg("value") = e.value,
                                py::arg("kind") = e.kind == ExtremumKind::Max ? "max" : "min"));
    return py::dict(py::arg("phi") = grid_array(f.phi, ni, nj), py::arg("speed2") = grid_array(f.speed2, ni, nj),
                    py::arg("amplitude") = grid_array(f.amplitude, ni, nj), py::arg("x1") = grid_array(x1, ni, nj),
                    py::arg("x2") = grid_array(x2, ni, nj), py::arg("dipole") = f.dipole,
                    py::arg("max_boundary_speed2") = f.max_boundary_speed2,
                    py::arg("residual_norm") = f.residual_norm, py::arg("newton_iterations") = f.newton_iterations,
                    py::arg("extrema") = extrema);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Subsonic flow, traveling waves and vortex nucleation for the Gross-Pitaevskii model";

    static py::exception<Error> error(m, "GpobError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error.ptr(), e.what());
        }
    });

    m.def("local_mach_speed", &local_mach_speed, py::arg("b2"), "2b/sqrt(1 - b^2) for b^2 = |grad Phi|^2");

    m.def(
        "gl_profile",
        [](double R, std::size_t n) {
            const VortexProfile p = solve_gl_profile(R, n);
            return py::dict(py::arg("r") = p.r_nodes, py::arg("S0") = p.S0, py::arg("slope_at_0") = p.slope_at_0,
                            py::arg("far_coefficient") = p.far_coefficient, py::arg("residual_norm") = p.residual_norm);
        },
        py::arg("R") = 40.0, py::arg("n") = 401);

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_static("parse", &parse_config, py::arg("text"))
        .def_static("load", [](const std::string& path) { return load_config(path); }, py::arg("path"))
        .def_readwrite("shape", &RunConfig::shape)
        .def_readwrite("a", &RunConfig::a)
        .def_readwrite("b", &RunConfig::b)
        .def_readwrite("n_radial", &RunConfig::n_radial)
        .def_readwrite("n_angular", &RunConfig::n_angular)
        .def_readwrite("r_far", &RunConfig::r_far)
        .def_readwrite("stretch", &RunConfig::stretch)
        .def_readwrite("delta", &RunConfig::delta)
        .def_readwrite("epsilons", &RunConfig::epsilons)
        .def_readwrite("c_start", &RunConfig::c_start)
        .def_readwrite("c_end", &RunConfig::c_end)
        .def_readwrite("c_step", &RunConfig::c_step)
        .def_readwrite("c_min_step", &RunConfig::c_min_step)
        .def_readwrite("wave_L", &RunConfig::wave_L)
        .def_readwrite("wave_h", &RunConfig::wave_h)
        .def_readwrite("output_dir", &RunConfig::output_dir)
        .def_property(
            "bc", [](const RunConfig& c) { return to_string(c.bc); },
            [](RunConfig& c, const std::string& s) { c.bc = boundary_condition_from_string(s); })
        .def("validate", &RunConfig::validate)
        .def("hash", &RunConfig::hash)
        .def("canonical", &RunConfig::canonical)
        .def("to_text", &RunConfig::to_text);

    m.def(
        "solve_flow",
        [](const RunConfig& cfg) {
            py::gil_scoped_release release;
            FlowSolution f = solve_potential_flow(build_grid(cfg), {cfg.delta, cfg.epsilons.front()});
            py::gil_scoped_acquire acquire;
            return flow_dict(f);
        },
        py::arg("config"), "Potential flow on the config's grid at its delta");

    m.def(
        "traveling_wave",
        [](double c, double L, double h) {
            const auto g = HalfPlaneGrid::make(L, L, h);
            const auto cl = FarFieldClosure::pair_phase(1.0 / c);
            TravelingWave w;
            {
                py::gil_scoped_release release;
                w = solve_traveling_wave(c, wave_seed(solve_gl_profile(), 1.0 / c, g, cl), g, default_wave_newton(),
                                         true, cl);
            }
            return py::dict(py::arg("c") = w.c, py::arg("d_c") = w.d_c, py::arg("momentum") = w.momentum,
                            py::arg("residual_norm") = w.residual_norm,
                            py::arg("newton_iterations") = w.newton_iterations,
                            py::arg("field") = grid_array(w.field, g.n1, g.n2));
        },
        py::arg("c"), py::arg("L") = 20.0, py::arg("h") = 0.2,
        "Traveling wave at speed c on the half-plane box [0, L] x [-L, L]");

    m.def(
        "run_pipeline",
        [](const RunConfig& cfg, std::optional<std::string> stage) {
            RunManifest man;
            {
                py::gil_scoped_release release;
                man = run_pipeline(cfg, stage);
            }
            return to_python(man.to_json());
        },
        py::arg("config"), py::arg("stage") = py::none(), "Runs (or resumes) the pipeline; returns the manifest");

    m.def("summarize", [](const std::string& run_dir) { return to_python(summarize(run_dir)); }, py::arg("run_dir"));

    m.def(
        "read_field",
        [](const std::string& path) -> py::object {
            const FieldDump d = read_field_binary(path);
            if (d.is_complex) return grid_array(d.cplx, d.n_radial, d.n_angular);
            return grid_array(d.real, d.n_radial, d.n_angular);
        },
        py::arg("path"), "Binary field dump as an (n_radial, n_angular) array");

    m.attr("__version__") = GPOB_VERSION;
}
