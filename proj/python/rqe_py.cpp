// Python bindings for the core solver operations: simplex projection,
// certificates, normal-form equilibrium solves, environments, and value
// iteration on serialized Markov games.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rqe/environments.hpp"
#include "rqe/experiment.hpp"

namespace py = pybind11;
using namespace rqe;

namespace {

RiskProfile make_profile(double tau1, double tau2, double eps1, double eps2,
                         const std::string& nu, const std::string& d, double lambda1,
                         double lambda2) {
    RiskProfile p;
    p.tau = {tau1, tau2};
    p.eps = {eps1, eps2};
    if (nu == "log_barrier") p.kind.nu = NuKind::LogBarrier;
    else if (nu == "negative_entropy") p.kind.nu = NuKind::NegativeEntropy;
    else throw std::invalid_argument("nu must be log_barrier or negative_entropy");
    if (d == "kl") p.kind.d = DKind::KL;
    else if (d == "reverse_kl") p.kind.d = DKind::ReverseKL;
    else throw std::invalid_argument("d must be kl or reverse_kl");
    p.lambda = WeightVector{lambda1, lambda2};
    p.validate();
    return p;
}

}  // namespace

PYBIND11_MODULE(_rqe, m) {
    m.doc() = "risk-averse quantal response equilibria for two-player games";
    m.attr("__version__") = RQE_VERSION;

    py::class_<RiskProfile>(m, "RiskProfile")
        .def(py::init(&make_profile), py::arg("tau1") = 5.0, py::arg("tau2") = 5.0,
             py::arg("eps1") = 0.2, py::arg("eps2") = 0.2,
             py::arg("nu") = "log_barrier", py::arg("d") = "kl",
             py::arg("lambda1") = 1.0, py::arg("lambda2") = 1.0)
        .def_property_readonly("tau",
                               [](const RiskProfile& p) {
                                   return std::make_pair(p.tau[0], p.tau[1]);
                               })
        .def_property_readonly("eps", [](const RiskProfile& p) {
            return std::make_pair(p.eps[0], p.eps[1]);
        });

    py::class_<PayoffPair>(m, "PayoffPair")
        .def(py::init([](const Mat& R1, const Mat& R2) {
                 PayoffPair R{R1, R2};
                 R.validate();
                 return R;
             }),
             py::arg("R1"), py::arg("R2"))
        .def_readonly("R1", &PayoffPair::R1)
        .def_readonly("R2", &PayoffPair::R2)
        .def("span", &PayoffPair::span);

    py::class_<JointProfile>(m, "JointProfile")
        .def_readonly("pi1", &JointProfile::pi1)
        .def_readonly("pi2", &JointProfile::pi2)
        .def_readonly("p1", &JointProfile::p1)
        .def_readonly("p2", &JointProfile::p2)
        .def("stack", &JointProfile::stack)
        .def("distance", &JointProfile::distance);

    py::class_<MarkovGame>(m, "MarkovGame")
        .def_property_readonly("n_states",
                               [](const MarkovGame& g) { return g.n_states; })
        .def_property_readonly("n_actions",
                               [](const MarkovGame& g) {
                                   return std::make_pair(g.n_actions[0], g.n_actions[1]);
                               })
        .def_property_readonly("gamma", [](const MarkovGame& g) { return g.gamma; })
        .def("to_json", [](const MarkovGame& g) { return to_json_string(g); })
        .def_static("from_json",
                    [](const std::string& text) { return markov_game_from_json(text); });

    m.def("project_simplex", &project_simplex, py::arg("x"), py::arg("floor") = 0.0,
          "Euclidean projection onto the probability simplex with entries >= floor");

    m.def("inspection_game", &inspection_game);
    m.def("inspection_mg", &inspection_mg, py::arg("gamma"));
    m.def(
        "random_mg",
        [](int n_states, std::pair<int, int> n_actions, double gamma,
           std::uint64_t seed) {
            return random_mg(n_states, {n_actions.first, n_actions.second}, gamma, seed);
        },
        py::arg("n_states"), py::arg("n_actions"), py::arg("gamma"), py::arg("seed"));

    m.def(
        "certify",
        [](const RiskProfile& profile, std::pair<int, int> n_actions, double floor,
           int n_samples, std::uint64_t seed) {
            MonotonicityCertificate cert =
                certify(profile, {n_actions.first, n_actions.second}, floor, n_samples,
                        seed);
            py::dict out;
            out["is_strict"] = cert.is_strict;
            out["is_strong"] = cert.is_strong;
            out["mu"] = cert.mu;
            out["min_eigenvalue"] = cert.min_eigenvalue;
            out["lambda"] = std::make_pair(cert.lambda.lambda1, cert.lambda.lambda2);
            out["evidence"] =
                cert.evidence == Evidence::ClosedForm ? "ClosedForm" : "Sampled";
            return out;
        },
        py::arg("profile"), py::arg("n_actions") = std::make_pair(2, 2),
        py::arg("floor") = 1e-3, py::arg("n_samples") = 500, py::arg("seed") = 0);

    m.def(
        "solve",
        [](const PayoffPair& R, const RiskProfile& profile, double tol, long max_iter,
           bool risk_neutral) {
            SolveOptions so;
            so.tol = tol;
            so.max_iter = max_iter;
            so.risk_neutral = risk_neutral;
            SolveReport rep = solve(R, profile, so);
            py::dict out;
            out["z"] = rep.z_star;
            out["iterations"] = rep.iterations;
            out["converged"] = rep.converged;
            out["final_step_norm"] = rep.final_step_norm;
            return out;
        },
        py::arg("R"), py::arg("profile"), py::arg("tol") = 1e-8,
        py::arg("max_iter") = 100000, py::arg("risk_neutral") = false);

    m.def("objective", &objective_J, py::arg("i"), py::arg("z"), py::arg("R"),
          py::arg("profile"));
    m.def("gradient", &gradient_operator, py::arg("z"), py::arg("R"), py::arg("profile"));
    m.def("rqe_gap", &rqe_gap, py::arg("z"), py::arg("R"), py::arg("profile"),
          py::arg("n_probe") = 64, py::arg("seed") = 0);

    m.def(
        "value_iteration",
        [](const MarkovGame& mg, const RiskProfile& profile, double tol,
           long max_sweeps) {
            ValueIterationOptions opt;
            opt.tol = tol;
            opt.max_sweeps = max_sweeps;
            ValueIterationResult vi = value_iteration(mg, profile, opt);
            py::dict out;
            out["sweeps"] = vi.sweeps;
            out["final_residual"] = vi.final_residual;
            out["q1"] = vi.q.q1;
            out["q2"] = vi.q.q2;
            return out;
        },
        py::arg("mg"), py::arg("profile"), py::arg("tol") = 1e-6,
        py::arg("max_sweeps") = 10000);
}
