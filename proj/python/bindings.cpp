#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "twistband/cli.hpp"
#include "twistband/convergence.hpp"
#include "twistband/effective.hpp"
#include "twistband/threshold.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace twistband;

namespace {

EffectiveKind kind_from(const std::string& name, int sign, double L) {
    if (name == "free") return EffectiveKind::free_line();
    if (name == "dirichlet0") return EffectiveKind::dirichlet_at_zero();
    if (name == "twisted") return EffectiveKind::twisted(sign);
    if (name == "pml_inside") return EffectiveKind::dirichlet_at_pm_l(L, PmLRegion::Inside);
    if (name == "pml_outside") return EffectiveKind::dirichlet_at_pm_l(L, PmLRegion::Outside);
    throw py::value_error("kind must be free, dirichlet0, twisted, pml_inside or pml_outside");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Thin-waveguide threshold and resolvent experiments";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NotCritical>(m, "NotCritical", PyExc_RuntimeError);

    m.attr("QUARTER_PI_SQ") = kQuarterPiSq;

    m.def("transverse_energy", [](int m_, const std::string& region) {
        const Region r = region == "right" ? Region::Right : region == "left" ? Region::Left : Region::Middle;
        return transverse_mode(m_, r).energy;
    }, "m"_a, "region"_a = "right");
    m.def("discrete_threshold", &discrete_threshold, "N2"_a);

    py::class_<CountSpec>(m, "CountSpec")
        .def(py::init([](double h, double margin) {
            CountSpec s;
            s.h = h;
            s.margin = margin;
            return s;
        }), "h"_a = 0.05, "margin"_a = 1.0)
        .def_readwrite("h", &CountSpec::h)
        .def_readwrite("margin", &CountSpec::margin)
        .def_property_readonly("N2", &CountSpec::N2);

    m.def("count_bound_states", [](double ell, const CountSpec& s) { return count_bound_states(ell, s); },
          "ell"_a, "spec"_a = CountSpec{});
    m.def("bound_state_energies", [](double ell, const CountSpec& s) { return spectrum_slice(ell, s).eigenvalues; },
          "ell"_a, "spec"_a = CountSpec{});
    m.def("critical_length_on_grid", [](int n, const CountSpec& s) { return critical_length_on_grid(n, s).value; },
          "n"_a, "spec"_a = CountSpec{});

    py::class_<CriticalLength>(m, "CriticalLength")
        .def_readonly("n", &CriticalLength::n)
        .def_readonly("estimate", &CriticalLength::estimate)
        .def_readonly("bracket", &CriticalLength::bracket)
        .def_readonly("agreement", &CriticalLength::agreement);
    m.def("find_critical_length",
          [](int n, double tol, const CountSpec& s) { return find_critical_length(n, tol, s); }, "n"_a,
          "tol"_a = 1e-3, "spec"_a = CountSpec{});

    m.def("virtual_level", [](int n, const CountSpec& s) {
        const double ell = critical_length_on_grid(n, s).value;
        const VirtualLevel vl = solve_virtual_level(ell, n, s);
        const auto r = lemma31_residuals(vl);
        return py::dict("ell"_a = vl.ell, "c_minus"_a = vl.c_minus, "parity_residual"_a = vl.parity_residual,
                        "decay_rate"_a = vl.decay_rate,
                        "lemma_residuals"_a = std::vector<double>(r.begin(), r.end()));
    }, "n"_a, "spec"_a = CountSpec{});

    m.def("green_kernel", [](const std::string& kind, Complex mu, double x, double t, int sign, double L) {
        return green_kernel(kind_from(kind, sign, L), mu, x, t);
    }, "kind"_a, "mu"_a, "x"_a, "t"_a, "sign"_a = -1, "L"_a = 1.0);

    m.def("fit_rate", [](const std::vector<double>& eps, const std::vector<double>& err) {
        const RateFit f = fit_rate(eps, err);
        return py::dict("slope"_a = f.slope, "intercept"_a = f.intercept, "r2"_a = f.r2, "points"_a = f.points);
    }, "eps"_a, "err"_a);

    m.def("convergence_table", [](const std::string& which, double param, double E, Complex lambda,
                                  const std::vector<double>& eps, double h, double center) {
        ConvergenceCase c;
        if (which == "theorem21") c = OverlapCase{param, -1};
        else if (which == "theorem22") c = FixedLCase{param, E};
        else throw py::value_error("which must be theorem21 or theorem22");
        GridPolicy p;
        p.h = h;
        const ErrorTable T = run_case(c, lambda, default_test_functions(center), eps, p);
        py::list rows;
        for (const auto& r : T.rows)
            rows.append(py::dict("eps"_a = r.eps, "f_id"_a = r.f_id, "err_l2"_a = r.err_l2, "err_h1"_a = r.err_h1,
                                 "grid_tag"_a = r.grid_tag));
        return rows;
    }, "which"_a, "param"_a, "E"_a = 0.0, "lam"_a = Complex(0.0, 1.0),
       "eps"_a = default_eps_list(), "h"_a = 1.0 / 16, "center"_a = 0.4);

    m.def("parse_config", [](const std::string& text) { return to_json(parse_config(text)).dump(); }, "text"_a,
          "Validated config with defaults filled, as JSON text.");
    m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, "text"_a);
    m.def("run", [](const std::string& text) {
        const RunConfig c = parse_config(text);
        const ReportBundle b = run_scenario(c);
        write_bundle(b, c, c.out);
        return py::make_tuple(b.all_pass(), b.summary(c).dump());
    }, "config"_a, "Runs a scenario, writes the report and returns (all_pass, summary JSON).");
}
