#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "nlplap/analysis.hpp"
#include "nlplap/errors.hpp"
#include "nlplap/graph.hpp"
#include "nlplap/parallel.hpp"

namespace py = pybind11;
using namespace nlplap;

namespace {

py::array_t<double> to_numpy(std::span<const double> v) {
    py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

std::vector<double> from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return {a.data(), a.data() + a.size()};
}

// A uniform-mesh grid function from a callable or an array of cell values.
GridFunction as_grid_function(const py::object& obj, const MeshPtr& mesh) {
    if (py::isinstance<GridFunction>(obj)) return obj.cast<GridFunction>();
    if (PyCallable_Check(obj.ptr())) {
        auto f = obj.cast<std::function<double(double)>>();
        return project_function(f, mesh);
    }
    return GridFunction(mesh, from_numpy(obj.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>()));
}

Trajectory solve(const KernelSpec& kernel, double p, std::size_t n, const py::object& g, double T,
                 const std::string& scheme, double tau, double alpha0, double decay, double residual_floor) {
    const auto mesh = uniform_mesh(n);
    auto k = std::make_shared<const DiscreteKernel>(project_kernel(kernel, mesh));
    const auto prob = Problem::kernelized(k, p, as_grid_function(g, mesh), SourceTerm::zero(), T);
    if (scheme == "forward_euler") return forward_euler(prob, {tau, 0.9, residual_floor, 1});
    if (scheme == "subgradient") return subgradient_p1(prob, {alpha0, decay, 1000000, 1});
    if (scheme == "backward_euler") {
        const auto N = static_cast<std::size_t>(std::ceil(T / tau - 1e-12));
        return backward_euler(prob, uniform_partition(T, std::max<std::size_t>(N, 1)));
    }
    throw InvalidArgument("unknown scheme '" + scheme + "'");
}

}  // namespace

PYBIND11_MODULE(_nlplap, m) {
    m.doc() = "Nonlocal p-Laplacian evolution problems";
    m.attr("__version__") = "0.1.0";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<InvalidP>(m, "InvalidP", base.ptr());
    py::register_exception<NoConvergence>(m, "NoConvergence", base.ptr());
    py::register_exception<MeshMismatch>(m, "MeshMismatch", base.ptr());
    py::register_exception<DenseLimitExceeded>(m, "DenseLimitExceeded", base.ptr());
    py::register_exception<UnsupportedSingularity>(m, "UnsupportedSingularity", base.ptr());
    py::register_exception<DegenerateFit>(m, "DegenerateFit", base.ptr());

    m.def("set_thread_count", &set_thread_count, py::arg("threads"));
    m.def("thread_count", &thread_count);

    py::class_<KernelSpec>(m, "KernelSpec")
        .def_static("power_law", &KernelSpec::power_law, py::arg("beta"))
        .def_static("constant", &KernelSpec::constant, py::arg("c"))
        .def_static("separable_linear", &KernelSpec::separable_linear, py::arg("slope") = 1.0)
        .def_property_readonly("name", &KernelSpec::name)
        .def("__call__", &KernelSpec::operator(), py::arg("x"), py::arg("y"))
        .def("__repr__", [](const KernelSpec& k) { return "KernelSpec(" + k.name() + ")"; });
    m.def("power_law_constant", &power_law_constant, py::arg("beta"));
    m.def("power_law_row_integral", &power_law_row_integral, py::arg("beta"), py::arg("x"));

    py::class_<Mesh, std::shared_ptr<Mesh>>(m, "Mesh")
        .def_property_readonly("size", &Mesh::size)
        .def_property_readonly("boundaries", [](const Mesh& me) { return to_numpy(me.boundaries()); })
        .def_property_readonly("cell_sizes", [](const Mesh& me) { return to_numpy(me.cell_sizes()); });
    m.def("uniform_mesh", [](std::size_t n) { return std::const_pointer_cast<Mesh>(uniform_mesh(n)); }, py::arg("n"));

    py::class_<GridFunction>(m, "GridFunction")
        .def(py::init([](std::size_t n, const py::array_t<double>& v) { return GridFunction(uniform_mesh(n), from_numpy(v)); }),
             py::arg("n"), py::arg("values"))
        .def_property_readonly("values", [](const GridFunction& u) { return to_numpy(u.values()); })
        .def("__len__", &GridFunction::size)
        .def("norm", [](const GridFunction& u, double q) { return norm_lq(u, q); }, py::arg("q") = 2.0);
    m.def("project_function",
          [](const std::function<double(double)>& f, std::size_t n) { return project_function(f, uniform_mesh(n)); },
          py::arg("f"), py::arg("n"));

    py::class_<DiscreteKernel, std::shared_ptr<DiscreteKernel>>(m, "DiscreteKernel")
        .def_property_readonly("size", &DiscreteKernel::size)
        .def("matrix", [](const DiscreteKernel& k) {
            const auto n = static_cast<py::ssize_t>(k.size());
            py::array_t<double> a({n, n});
            std::copy(k.entries().begin(), k.entries().end(), a.mutable_data());
            return a;
        })
        .def("linf_q", [](const DiscreteKernel& k, double q) { return matrix_norm_linf_q(k, q); }, py::arg("q") = 1.0);
    m.def("project_kernel",
          [](const KernelSpec& k, std::size_t n) { return std::make_shared<DiscreteKernel>(project_kernel(k, uniform_mesh(n))); },
          py::arg("kernel"), py::arg("n"));

    m.def("psi", &psi, py::arg("p"), py::arg("x"));
    m.def("apply", [](const DiscreteKernel& k, double p, const GridFunction& u) { return apply(k, p, u); }, py::arg("kernel"),
          py::arg("p"), py::arg("u"), "Discrete operator Delta_p u.");
    m.def("energy", [](const DiscreteKernel& k, double p, const GridFunction& u) { return energy(k, p, u); },
          py::arg("kernel"), py::arg("p"), py::arg("u"));
    m.def(
        "resolvent",
        [](const DiscreteKernel& k, double p, double lambda, const GridFunction& b, double tol) {
            const auto r = resolvent(k, p, lambda, b, {tol, 500});
            return py::make_tuple(r.u, r.iterations, r.residual);
        },
        py::arg("kernel"), py::arg("p"), py::arg("lam"), py::arg("b"), py::arg("tol") = -1.0,
        "Solves u + lam Delta_p u = b; returns (u, iterations, residual).");

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("steps", &Trajectory::steps)
        .def_property_readonly("times", [](const Trajectory& t) { return to_numpy(t.times()); })
        .def("state", &Trajectory::state, py::arg("k"))
        .def("final_state", &Trajectory::final_state)
        .def("at", [](const Trajectory& t, double time) { return linear_state(t, time); }, py::arg("t"))
        .def("csv", [](const Trajectory& t) {
            std::ostringstream os;
            write_trajectory_csv(os, t);
            return os.str();
        });
    m.def("solve", &solve, py::arg("kernel"), py::arg("p"), py::arg("n"), py::arg("g"), py::arg("T"),
          py::arg("scheme") = "backward_euler", py::arg("tau") = 1e-2, py::arg("alpha0") = 0.1, py::arg("decay") = 1.0,
          py::arg("residual_floor") = 1e-8,
          "Runs one scheme with zero source. g is a callable on [0, 1] or an array of cell values.");

    m.def("two_node_closed_form", &two_node_closed_form, py::arg("p"), py::arg("K"), py::arg("w0"), py::arg("t"));
    m.def(
        "linear_oracle_p2",
        [](const DiscreteKernel& k, const GridFunction& g, double t) { return linear_oracle_p2(k, g, SourceTerm::zero(), t); },
        py::arg("kernel"), py::arg("g"), py::arg("t"));
    m.def(
        "fit_rate",
        [](const std::vector<std::pair<double, double>>& pts) {
            const auto r = fit_rate(pts);
            return py::make_tuple(r.slope, r.intercept, r.max_residual);
        },
        py::arg("points"), "Least-squares slope of log10 error against log10 parameter: (slope, intercept, max_residual).");

    py::class_<GraphSample>(m, "GraphSample")
        .def_property_readonly("size", &GraphSample::size)
        .def_property_readonly("rho", &GraphSample::rho)
        .def_property_readonly("edge_count", &GraphSample::edge_count)
        .def("edges", [](const GraphSample& g) { return std::vector<std::pair<std::uint32_t, std::uint32_t>>(g.edges().begin(), g.edges().end()); })
        .def("degree", &GraphSample::degree, py::arg("i"))
        .def("linf1", [](const GraphSample& g) { return linf1_norm(g); });
    m.def(
        "sample_graph",
        [](const KernelSpec& k, std::size_t n, double rho, std::uint64_t seed) {
            return sample(truncate(project_kernel(k, uniform_mesh(n)), rho), rho, seed);
        },
        py::arg("kernel"), py::arg("n"), py::arg("rho"), py::arg("seed"));
}
