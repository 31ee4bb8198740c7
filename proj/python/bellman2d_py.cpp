// Python bindings for the core operations. Fields cross the boundary as
// (n, n) numpy arrays indexed [j, i] (row = x2, column = x1).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bellman2d/errors.hpp"
#include "bellman2d/experiment.hpp"
#include "bellman2d/freeboundary.hpp"
#include "bellman2d/manufactured.hpp"
#include "bellman2d/regularity.hpp"
#include "bellman2d/solver.hpp"
#include "bellman2d/twophase.hpp"

namespace py = pybind11;
using namespace bellman2d;

namespace {

py::array_t<double> to_numpy(const ScalarField2D& f) {
    const int n = f.grid().n();
    py::array_t<double> out({n, n});
    auto view = out.mutable_unchecked<2>();
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) view(j, i) = f.defined(i, j) ? f(i, j) : std::nan("");
    return out;
}

ScalarField2D from_numpy(const Grid2D& g, py::array_t<double, py::array::c_style | py::array::forcecast> a) {
    if (a.ndim() != 2 || a.shape(0) != g.n() || a.shape(1) != g.n()) {
        throw ValidationError("array shape does not match the grid");
    }
    const double* p = a.data();
    return ScalarField2D(g, std::vector<double>(p, p + a.size()));
}

Point to_point(const std::pair<double, double>& p) { return {p.first, p.second}; }
std::pair<double, double> from_point(Point p) { return {p.x, p.y}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Solver and verification lab for Min{L1 v, L2 v} = 0 in two dimensions";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<Grid2D>(m, "Grid2D")
        .def(py::init([](std::pair<double, double> center, double half_width, int n) {
                 return Grid2D::make(to_point(center), half_width, n);
             }),
             py::arg("center") = std::pair{0.0, 0.0}, py::arg("half_width") = 1.0, py::arg("n") = 65)
        .def_property_readonly("n", &Grid2D::n)
        .def_property_readonly("h", &Grid2D::h)
        .def_property_readonly("half_width", &Grid2D::half_width)
        .def("node", [](const Grid2D& g, int i, int j) { return from_point(g.node(i, j)); })
        .def("coordinates", [](const Grid2D& g) {
            const int n = g.n();
            py::array_t<double> xs(n), ys(n);
            for (int k = 0; k < n; ++k) {
                xs.mutable_at(k) = g.node(k, 0).x;
                ys.mutable_at(k) = g.node(0, k).y;
            }
            return py::make_tuple(xs, ys);
        });

    py::class_<BellmanProblem>(m, "BellmanProblem")
        .def_static("reduced", &BellmanProblem::reduced, py::arg("m"), py::arg("rotation") = 0.0)
        .def_static(
            "general",
            [](std::array<double, 3> a1, std::array<double, 3> a2) {
                return BellmanProblem::general({a1[0], a1[1], a1[2]}, {a2[0], a2[1], a2[2]});
            },
            py::arg("A1"), py::arg("A2"))
        .def_readonly("m", &BellmanProblem::m)
        .def_readonly("rotation", &BellmanProblem::rotation);

    m.def(
        "exact_value",
        [](const std::string& kind, double mm, double b, double rotation, std::pair<double, double> x) {
            ExactSolution s = Bilinear{};
            if (kind == "glued_cubic") s = GluedCubic{mm, b, rotation};
            else if (kind == "quadratic_saddle") s = QuadraticSaddle{mm};
            else if (kind != "bilinear") throw ValidationError("unknown kind " + kind);
            return exact_value(s, to_point(x));
        },
        py::arg("kind"), py::arg("m") = 2.0, py::arg("b") = 1.0, py::arg("rotation") = 0.0, py::arg("x"));

    m.def("manufactured_catalog", []() {
        py::list out;
        for (const CatalogEntry& e : manufactured_catalog()) {
            const OracleReport r = oracle_check(e.solution, e.problem);
            py::dict d;
            d["name"] = e.name;
            d["residual_max"] = r.residual_max;
            d["hess_defect"] = r.hess_defect;
            out.append(d);
        }
        return out;
    });

    m.def(
        "sample_glued_cubic",
        [](const Grid2D& g, double mm, double b, double rotation) {
            const ExactSolution s = GluedCubic{mm, b, rotation};
            return to_numpy(sample([&](Point x) { return exact_value(s, x); }, g));
        },
        py::arg("grid"), py::arg("m") = 2.0, py::arg("b") = 1.0, py::arg("rotation") = 0.0);

    m.def(
        "solve_policy_iteration",
        [](const BellmanProblem& p, const Grid2D& g, py::array_t<double> trace, double tol, int max_updates) {
            PolicyIterationOptions opt;
            opt.tol = tol;
            opt.max_policy_updates = max_updates;
            const SolveOutcome r = solve_policy_iteration(p, from_numpy(g, trace), opt);
            py::dict d;
            d["v"] = to_numpy(r.v);
            d["residual_max"] = r.residual_max;
            d["policy_updates"] = r.policy_updates;
            d["linear_iterations"] = r.linear_iterations;
            return d;
        },
        py::arg("problem"), py::arg("grid"), py::arg("trace"), py::arg("tol") = 1e-9, py::arg("max_policy_updates") = 50);

    m.def(
        "solve_smoothed",
        [](double mm, double eps, const Grid2D& g, py::array_t<double> trace, double tol) {
            SmoothedSolveOptions opt;
            opt.tol = tol;
            const SmoothedSolveResult r = solve_smoothed(SmoothedNonlinearity(mm, eps), from_numpy(g, trace), opt);
            py::dict d;
            d["v"] = to_numpy(r.v);
            d["residual_max"] = r.residual_max;
            d["sweeps"] = r.sweeps;
            return d;
        },
        py::arg("m"), py::arg("eps"), py::arg("grid"), py::arg("trace"), py::arg("tol") = 1e-9);

    m.def(
        "phase_field",
        [](const BellmanProblem& p, const Grid2D& g, py::array_t<double> v) {
            return to_numpy(phase_field(p, from_numpy(g, v)));
        },
        py::arg("problem"), py::arg("grid"), py::arg("v"));

    m.def(
        "flux",
        [](const BellmanProblem& p, double b, std::pair<double, double> nu) {
            return flux_eval(FluxLaw::for_problem(p), b, to_point(nu));
        },
        py::arg("problem"), py::arg("b"), py::arg("nu"));

    m.def(
        "extract_gamma",
        [](const Grid2D& g, py::array_t<double> u, double band_tol) {
            // NaN marks the undefined outer ring produced by phase_field.
            auto a = py::array_t<double, py::array::c_style | py::array::forcecast>(u);
            std::vector<double> vals(a.data(), a.data() + a.size());
            int margin = 0;
            while (margin < g.n() / 2 && std::isnan(vals[g.index(margin, g.mid())])) ++margin;
            for (double& x : vals)
                if (std::isnan(x)) x = 0.0;
            const FreeBoundary fb = extract_gamma(ScalarField2D(g, vals, margin), band_tol);
            py::list segments;
            for (const Polyline& line : fb.segments) {
                py::list verts, normals;
                for (std::size_t k = 0; k < line.vertices.size(); ++k) {
                    verts.append(from_point(line.vertices[k]));
                    normals.append(from_point(line.normals[k]));
                }
                py::dict d;
                d["vertices"] = verts;
                d["normals"] = normals;
                d["closed"] = line.closed;
                segments.append(d);
            }
            py::dict out;
            out["segments"] = segments;
            out["one_phase"] = fb.one_phase;
            return out;
        },
        py::arg("grid"), py::arg("u"), py::arg("band_tol") = 0.0);

    m.def(
        "lipschitz_seminorm",
        [](const Grid2D& g, py::array_t<double> u, double radius) {
            return lipschitz_seminorm(from_numpy(g, u), radius);
        },
        py::arg("grid"), py::arg("u"), py::arg("radius") = 0.5);

    m.def(
        "c21_seminorm",
        [](const Grid2D& g, py::array_t<double> v, double radius) { return c21_seminorm(from_numpy(g, v), radius); },
        py::arg("grid"), py::arg("v"), py::arg("radius") = 0.5);

    m.def(
        "run",
        [](const std::string& config_json, const std::string& out_dir) {
            const ExperimentConfig c = config_from_json(nlohmann::json::parse(config_json));
            return run(c, out_dir).dump();
        },
        py::arg("config_json"), py::arg("out_dir"),
        "Runs a full experiment from a JSON config string; returns report.json as a string.");

    m.def(
        "config_roundtrip",
        [](const std::string& config_json) {
            return config_to_json(config_from_json(nlohmann::json::parse(config_json))).dump();
        },
        py::arg("config_json"));
}
