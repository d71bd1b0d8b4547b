#pragma once

#include "unisafe/sim.hpp"
#include "unisafe/solver.hpp"

namespace unisafe::sim {

/// u*(x): minimizer of J for the constraints at x. Throws InfeasibleError
/// (with the state in the message) when the constraints at x have no interior.
SolveResult solve_at_state(const ControlProblem& problem, const Vec& x,
                           const SolverOptions& opts = {},
                           const std::optional<Vec>& warmstart = std::nullopt);

/// Exact controller. With `reuse_previous`, each call is warmstarted at the
/// previous call's answer.
Controller make_ustar_controller(const ControlProblem& problem, const SolverOptions& opts = {},
                                 bool reuse_previous = false);

/// Min-norm CLF-CBF QP controller.
Controller make_qp_controller(const ControlProblem& problem);

/// Exact controller warmstarted at the min-norm QP solution.
Controller make_qp_warmstarted_controller(const ControlProblem& problem,
                                          const SolverOptions& opts = {});

}  // namespace unisafe::sim
