#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <iostream>

#include "ld/harness.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

ld::Logger stderr_logger(bool quiet) {
    if (quiet) return {};
    return [](const std::string& s) { std::cerr << s << std::endl; };
}

ld::ExperimentConfig config_from(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ld::ConfigError("", e.what());
    }
    return ld::parse_config(j);
}

py::dict row_dict(const ld::SweepRow& r) {
    py::dict d;
    d["eps"] = r.eps;
    d["s"] = r.s;
    d["s_ln_eps"] = r.s_ln_eps;
    d["N"] = r.N;
    d["scaled_ld_min"] = r.scaled_ld_min;
    d["scaled_recovery"] = r.scaled_recovery;
    d["limit_value"] = r.limit_value;
    d["josephson_scaled"] = r.josephson_scaled;
    d["trace_estimate"] = r.trace_estimate;
    d["jacobian_h-1_cauchy"] = r.jacobian_cauchy;
    d["recovery_upper"] = r.recovery_upper;
    d["gap"] = r.gap;
    d["josephson_bound"] = r.josephson_bound;
    d["slab_trace_ratio"] = r.slab_trace_ratio;
    d["converged"] = r.converged;
    d["out_of_theory"] = r.out_of_theory;
    d["n_vortices"] = r.n_vortices;
    d["iterations"] = r.iterations;
    d["grad_norm"] = r.grad_norm;
    d["start"] = r.start;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bindings to the ldlab core";
    py::register_exception<ld::ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "normalize_config",
        [](const std::string& text) { return ld::config_to_json(config_from(text)).dump(); },
        py::arg("config_json"), "Validate a config and return it with every default filled in, as JSON text.");

    m.def(
        "run",
        [](const std::string& text, bool quiet) {
            ld::ExperimentConfig c = config_from(text);
            ld::RunOutcome r;
            {
                py::gil_scoped_release release;
                r = ld::run_experiment(c, stderr_logger(quiet));
            }
            return py::make_tuple(r.converged, r.summary.dump());
        },
        py::arg("config_json"), py::arg("quiet") = true,
        "Run the experiment named by the config's mode. Returns (converged, summary JSON text).");

    m.def(
        "gamma_sweep",
        [](const std::string& text, bool quiet) {
            ld::ExperimentConfig c = config_from(text);
            c.mode = ld::Mode::gamma_sweep;
            ld::SweepReport rep;
            {
                py::gil_scoped_release release;
                rep = ld::run_gamma_sweep(c, stderr_logger(quiet));
            }
            py::list rows;
            for (const ld::SweepRow& r : rep.rows) rows.append(row_dict(r));
            return rows;
        },
        py::arg("config_json"), py::arg("quiet") = true, "Run the sweep and return its rows as dicts.");

    m.def(
        "q_profile",
        [](double eps, py::array_t<double, py::array::c_style | py::array::forcecast> r) {
            if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
            ld::CoreProfile q = ld::q_profile(eps);
            py::array_t<double> out(r.request().shape);
            double* o = out.mutable_data();
            for (py::ssize_t i = 0; i < r.size(); ++i) o[i] = q(r.data()[i]);
            return out;
        },
        py::arg("eps"), py::arg("r"), "Evaluate the radial core profile at the radii r.");

    m.def(
        "core_integral", [](double eps) { return ld::q_profile(eps).core_integral(); }, py::arg("eps"),
        "Integral of |q grad theta|^2 over the core disk of radius eps.");
}
