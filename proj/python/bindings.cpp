#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "unisafe/controllers.hpp"
#include "unisafe/dataset.hpp"
#include "unisafe/errors.hpp"
#include "unisafe/mlp.hpp"
#include "unisafe/nn_control.hpp"
#include "unisafe/params.hpp"
#include "unisafe/sim.hpp"
#include "unisafe/solver.hpp"

namespace py = pybind11;
using namespace unisafe;

namespace {

py::dict solve_result_dict(const SolveResult& r) {
  py::dict d;
  d["k_star"] = r.k_star;
  d["objective"] = r.objective;
  d["grad_norm"] = r.grad_norm;
  d["iterations"] = r.iterations;
  d["status"] = r.status;
  return d;
}

sim::ControlProblem example_problem(const std::string& name, std::uint64_t seed) {
  if (name == "1-2d") return sim::make_example_1();
  if (name == "1-10d") {
    sim::Example1Config c;
    c.dimension = sim::Example1Dim::TenD;
    c.seed = seed;
    return sim::make_example_1(c);
  }
  if (name == "2") return sim::make_example_2();
  throw ContractError("unknown example '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_unisafe, m) {
  m.doc() = "Barrier objective solvers, closed-loop simulation and network helpers";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<FileError>(m, "FileError", PyExc_OSError);

  py::enum_<SolveStatus>(m, "SolveStatus")
      .value("Converged", SolveStatus::Converged)
      .value("MaxIter", SolveStatus::MaxIter)
      .value("Degenerate", SolveStatus::Degenerate);

  m.def("closed_form_1d", &closed_form_1d, py::arg("a"), py::arg("b"));

  m.def(
      "eval_j", [](const Vec& a, const Mat& b, const Vec& k) { return eval_J({a, b}, k); },
      py::arg("a"), py::arg("b"), py::arg("k"));
  m.def(
      "grad_j", [](const Vec& a, const Mat& b, const Vec& k) -> Vec { return grad_J({a, b}, k); },
      py::arg("a"), py::arg("b"), py::arg("k"));
  m.def(
      "hess_j", [](const Vec& a, const Mat& b, const Vec& k) -> Mat { return hess_J({a, b}, k); },
      py::arg("a"), py::arg("b"), py::arg("k"));

  m.def(
      "solve_exact",
      [](const Vec& a, const Mat& b, double grad_tol) {
        SolverOptions opts;
        opts.grad_tol = grad_tol;
        return solve_result_dict(solve_exact(ConstraintParams(a, b), opts));
      },
      py::arg("a"), py::arg("b"), py::arg("grad_tol") = 1e-10);
  m.def(
      "solve_gradient_flow",
      [](const Vec& a, const Mat& b, double tol) {
        FlowOptions opts;
        opts.tol = tol;
        return solve_result_dict(solve_gradient_flow(ConstraintParams(a, b), opts));
      },
      py::arg("a"), py::arg("b"), py::arg("tol") = 1e-6);

  m.def(
      "find_interior_point",
      [](const Vec& a, const Mat& b) {
        const FeasibilityResult f = find_interior_point(ConstraintParams(a, b));
        py::dict d;
        d["feasible"] = f.status == FeasibilityStatus::Feasible;
        d["point"] = f.best_point;
        d["margin"] = f.best_margin;
        return d;
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "scale_params",
      [](const Vec& a, const Mat& b) {
        const auto [q, s] = scale_params(ConstraintParams(a, b));
        return py::make_tuple(q.base.a(), q.base.b(), q.r, s);
      },
      py::arg("a"), py::arg("b"), "Returns (a_scaled, b_scaled, r, scale).");

  m.def(
      "sample_dataset",
      [](int n, int dim, int count, std::uint64_t seed) {
        const nn::Dataset d = nn::sample_dataset(n, dim, count, seed);
        return py::make_tuple(d.inputs, d.labels);
      },
      py::arg("n_constraints"), py::arg("input_dim"), py::arg("count"), py::arg("seed"),
      "Returns (inputs, labels) with one row per sample.");

  py::class_<nn::MlpModel>(m, "MlpModel")
      .def_property_readonly("n_constraints", &nn::MlpModel::n_constraints)
      .def_property_readonly("output_dim", &nn::MlpModel::output_dim)
      .def("forward", [](const nn::MlpModel& model, const Vec& q) -> Vec {
        return model.forward(q);
      });
  m.def("load_model", &nn::load_model, py::arg("path"));
  m.def(
      "predict",
      [](const nn::MlpModel& model, const Vec& a, const Mat& b) -> Vec {
        return nn::predict(model, ConstraintParams(a, b));
      },
      py::arg("model"), py::arg("a"), py::arg("b"));

  m.def(
      "simulate",
      [](const std::string& example, const Vec& x0, double horizon, double dt,
         std::uint64_t seed) {
        const sim::ControlProblem problem = example_problem(example, seed);
        sim::SimOptions opts;
        opts.horizon = horizon;
        opts.dt = dt;
        const sim::Trajectory traj =
            sim::simulate(problem, sim::make_ustar_controller(problem), x0, opts);
        const Eigen::Index n = static_cast<Eigen::Index>(traj.size());
        Mat states(n, problem.system.state_dim);
        for (Eigen::Index i = 0; i < n; ++i) states.row(i) = traj.states[i].transpose();
        py::dict d;
        d["times"] = traj.times;
        d["states"] = states;
        d["min_barrier"] = traj.min_barrier;
        d["lyapunov"] = traj.lyapunov;
        d["termination"] = std::string(sim::to_string(traj.termination));
        return d;
      },
      py::arg("example"), py::arg("x0"), py::arg("horizon") = 20.0, py::arg("dt") = 1e-2,
      py::arg("seed") = 2024, "Closed loop under the exact controller.");
}
