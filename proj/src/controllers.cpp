#include "unisafe/controllers.hpp"

#include <memory>
#include <sstream>

#include "unisafe/errors.hpp"
#include "unisafe/qp.hpp"

namespace unisafe::sim {

namespace {

std::string state_text(const Vec& x) {
  std::ostringstream s;
  s << "[";
  for (Eigen::Index i = 0; i < x.size(); ++i) s << (i ? ", " : "") << x(i);
  s << "]";
  return s.str();
}

}  // namespace

SolveResult solve_at_state(const ControlProblem& problem, const Vec& x, const SolverOptions& opts,
                           const std::optional<Vec>& warmstart) {
  const ConstraintParams p = problem.constraints_at(x);
  try {
    return solve_exact(p, opts, warmstart);
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(std::string(e.what()) + " (state " + state_text(x) + ")", e.max_margin());
  }
}

Controller make_ustar_controller(const ControlProblem& problem, const SolverOptions& opts,
                                 bool reuse_previous) {
  if (!reuse_previous) {
    return [problem, opts](const Vec& x) {
      const SolveResult r = solve_at_state(problem, x, opts);
      return ControlOutput{r.k_star, r.iterations};
    };
  }
  auto previous = std::make_shared<std::optional<Vec>>();
  return [problem, opts, previous](const Vec& x) {
    const SolveResult r = solve_at_state(problem, x, opts, *previous);
    *previous = r.k_star;
    return ControlOutput{r.k_star, r.iterations};
  };
}

Controller make_qp_controller(const ControlProblem& problem) {
  return [problem](const Vec& x) {
    const ConstraintParams p = problem.constraints_at(x);
    const qp::QpSolution s = qp::solve_projection(p, Vec::Zero(p.input_dim()), 0.0);
    return ControlOutput{s.u, s.iterations};
  };
}

Controller make_qp_warmstarted_controller(const ControlProblem& problem,
                                          const SolverOptions& opts) {
  return [problem, opts](const Vec& x) {
    const ConstraintParams p = problem.constraints_at(x);
    const qp::QpSolution s = qp::solve_projection(p, Vec::Zero(p.input_dim()), 0.0);
    const SolveResult r = solve_at_state(problem, x, opts, s.u);
    return ControlOutput{r.k_star, r.iterations + s.iterations};
  };
}

}  // namespace unisafe::sim
