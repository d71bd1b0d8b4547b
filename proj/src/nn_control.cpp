#include "unisafe/nn_control.hpp"

#include "unisafe/errors.hpp"
#include "unisafe/qp.hpp"

namespace unisafe::nn {

Vec predict(const MlpModel& model, const ConstraintParams& p) {
  if (p.num_constraints() != model.n_constraints() || p.input_dim() != model.output_dim()) {
    throw ContractError("network trained for N = " + std::to_string(model.n_constraints()) +
                        ", m = " + std::to_string(model.output_dim()) + " applied to N = " +
                        std::to_string(p.num_constraints()) + ", m = " +
                        std::to_string(p.input_dim()));
  }
  return model.forward(flatten(scale_params(p).first));
}

sim::Controller make_nn_controller(std::shared_ptr<const MlpModel> model,
                                   const sim::ControlProblem& problem, bool hard) {
  if (!model) throw ContractError("make_nn_controller: null model");
  return [model, problem, hard](const Vec& x) {
    const ConstraintParams p = problem.constraints_at(x);
    const Vec guess = predict(*model, p);
    if (!hard) return sim::ControlOutput{guess, 0};
    const qp::QpSolution s = qp::solve_projection(p, guess, 0.0);
    return sim::ControlOutput{s.u, s.iterations};
  };
}

SolveResult warmstart_solve(const MlpModel& model, const ConstraintParams& p,
                            const SolverOptions& opts) {
  return solve_exact(p, opts, predict(model, p));
}

sim::Controller make_warmstart_controller(std::shared_ptr<const MlpModel> model,
                                          const sim::ControlProblem& problem,
                                          const SolverOptions& opts) {
  if (!model) throw ContractError("make_warmstart_controller: null model");
  return [model, problem, opts](const Vec& x) {
    const SolveResult r = warmstart_solve(*model, problem.constraints_at(x), opts);
    return sim::ControlOutput{r.k_star, r.iterations};
  };
}

}  // namespace unisafe::nn
