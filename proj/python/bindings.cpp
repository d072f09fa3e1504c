// Python bindings for the main operations. Paths cross the boundary as
// (t_i, t_f, values) triples; arrays come back as lists of floats or complex.

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cqosc/cli.hpp"
#include "cqosc/correlators.hpp"
#include "cqosc/langevin.hpp"
#include "cqosc/lattice.hpp"
#include "cqosc/mpp.hpp"

namespace py = pybind11;
using namespace cqosc;
using model::OscillatorConfig;
using model::Path;
using model::TimeGrid;

namespace {

Path to_path(const TimeGrid& g, const std::vector<double>& v) { return Path(g, v); }

correlators::QuadratureSpec spec_for(std::optional<double> eta) {
    correlators::QuadratureSpec spec;
    spec.eta = eta;
    return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Classical-quantum oscillator path integrals";

    static py::exception<Error> error(m, "CqoscError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error.ptr(), (std::string(e.name()) + ": " + e.what()).c_str());
        }
    });

    py::enum_<model::ActionConvention>(m, "ActionConvention")
        .value("Saturated", model::ActionConvention::Saturated)
        .value("DecoherenceDiffusion", model::ActionConvention::DecoherenceDiffusion);

    py::class_<OscillatorConfig>(m, "OscillatorConfig")
        .def(py::init([](double omega_c, double omega_q, double alpha, double d2, model::ActionConvention conv) {
                 OscillatorConfig c{omega_c, omega_q, alpha, d2, conv};
                 c.validate();
                 return c;
             }),
             py::arg("omega_c") = 1.0, py::arg("omega_q") = 1.0, py::arg("alpha") = 0.0, py::arg("d2") = 1.0,
             py::arg("action_convention") = model::ActionConvention::Saturated)
        .def_readwrite("omega_c", &OscillatorConfig::omega_c)
        .def_readwrite("omega_q", &OscillatorConfig::omega_q)
        .def_readwrite("alpha", &OscillatorConfig::alpha)
        .def_readwrite("d2", &OscillatorConfig::d2)
        .def_readwrite("action_convention", &OscillatorConfig::action_convention)
        .def("d0", &OscillatorConfig::d0);

    py::class_<TimeGrid>(m, "TimeGrid")
        .def(py::init<double, double, std::size_t>(), py::arg("t_i"), py::arg("t_f"), py::arg("n"))
        .def_property_readonly("n", &TimeGrid::n)
        .def_property_readonly("dt", &TimeGrid::dt)
        .def("times", [](const TimeGrid& g) {
            std::vector<double> t(g.n());
            for (std::size_t k = 0; k < g.n(); ++k) t[k] = g.time(k);
            return t;
        });

    m.def("evaluate_action",
          [](const TimeGrid& g, const std::vector<double>& q, const std::vector<double>& qp,
             const std::vector<double>& qm, const OscillatorConfig& cfg) {
              const auto w = model::evaluate_action(model::HybridPaths(to_path(g, q), to_path(g, qp), to_path(g, qm)), cfg);
              return std::complex<double>(w.log_magnitude, w.phase);
          },
          "log|W| + i phase of the action on sampled paths");

    m.def("decoherence_weight", [](const TimeGrid& g, const std::vector<double>& dq, const OscillatorConfig& cfg) {
        return model::decoherence_weight(to_path(g, dq), cfg);
    });

    m.def("mpp",
          [](const OscillatorConfig& cfg, const TimeGrid& g, std::array<double, 4> classical,
             std::array<double, 4> quantum, int order) {
              model::BoundaryConditions bc;
              bc.classical = model::ClassicalEndpoints{classical[0], classical[1], classical[2], classical[3]};
              bc.quantum = {quantum[0], quantum[1], quantum[2], quantum[3]};
              const auto sol = order == 0 ? mpp::mpp_zeroth(bc, cfg, g) : mpp::mpp_first(bc, cfg, g);
              const auto v = sol.q.values();
              return std::vector<double>(v.begin(), v.end());
          },
          py::arg("config"), py::arg("grid"), py::arg("classical"), py::arg("quantum"), py::arg("order") = 0,
          "Most probable classical path. classical = (q_i, qdot_i, qddot_i, q_f), "
          "quantum = (plus_i, minus_i, plus_f, minus_f).");

    m.def("free_quantum_plus", [](double tau, const OscillatorConfig& cfg) {
        return correlators::free_quantum_plus(tau, cfg).value;
    });
    m.def("free_quantum_minus", [](double tau, const OscillatorConfig& cfg) {
        return correlators::free_quantum_minus(tau, cfg).value;
    });
    m.def("free_classical",
          [](double tau, const OscillatorConfig& cfg, std::optional<double> eta, bool quadrature) {
              return correlators::free_classical(tau, cfg, spec_for(eta),
                                                 quadrature ? correlators::Method::Quadrature : correlators::Method::Residue)
                  .value;
          },
          py::arg("tau"), py::arg("config"), py::arg("eta") = py::none(), py::arg("quadrature") = false);
    m.def("corrected_qq",
          [](double s, double t, const OscillatorConfig& cfg, const TimeGrid& window, std::optional<double> eta) {
              return correlators::corrected_qq(s, t, cfg, window, spec_for(eta)).value;
          },
          py::arg("s"), py::arg("t"), py::arg("config"), py::arg("window"), py::arg("eta") = py::none());
    m.def("corrected_QQ_plus",
          [](double s, double t, const OscillatorConfig& cfg, const TimeGrid& window, std::optional<double> eta) {
              return correlators::corrected_QQ_plus(s, t, cfg, window, spec_for(eta)).value;
          },
          py::arg("s"), py::arg("t"), py::arg("config"), py::arg("window"), py::arg("eta") = py::none());

    m.def("lattice_moment",
          [](const OscillatorConfig& cfg, const TimeGrid& g, int species_a, std::size_t node_a, int species_b,
             std::size_t node_b, std::optional<double> eta, bool interaction) {
              lattice::AssembleOptions opts;
              opts.eta = eta;
              opts.include_interaction = interaction;
              const auto sys = lattice::LatticeSystem::assemble(cfg, g, opts);
              return lattice::moment(sys, {static_cast<lattice::Species>(species_a), node_a},
                                     {static_cast<lattice::Species>(species_b), node_b});
          },
          py::arg("config"), py::arg("grid"), py::arg("species_a"), py::arg("node_a"), py::arg("species_b"),
          py::arg("node_b"), py::arg("eta") = py::none(), py::arg("interaction") = true,
          "Exact Gaussian moment <y_a y_b>; species 0 = q, 1 = Q+, 2 = Q-.");

    m.def("langevin",
          [](const OscillatorConfig& cfg, const TimeGrid& g, double q0, double p0, std::size_t n_traj,
             std::uint64_t seed) {
              lattice::LangevinOptions opts;
              opts.q0 = q0;
              opts.p0 = p0;
              opts.n_traj = n_traj;
              opts.seed = seed;
              const auto e = lattice::langevin_sample(cfg, g, opts);
              py::dict out;
              out["mean_q"] = e.mean_q;
              out["mean_energy"] = e.mean_energy;
              out["energy_slope"] = e.energy_slope;
              out["energy_slope_se"] = e.energy_slope_se;
              return out;
          },
          py::arg("config"), py::arg("grid"), py::arg("q0") = 0.0, py::arg("p0") = 0.0, py::arg("n_traj") = 1000,
          py::arg("seed") = 0);

    m.def("run_cli",
          [](const std::vector<std::string>& args) {
              std::vector<std::string> full{"cqosc"};
              full.insert(full.end(), args.begin(), args.end());
              std::vector<const char*> argv;
              for (const auto& a : full) argv.push_back(a.c_str());
              std::ostringstream out, err;
              const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
              return py::make_tuple(code, out.str(), err.str());
          },
          "Run a cqosc subcommand in-process; returns (exit_code, stdout, stderr).");
}
