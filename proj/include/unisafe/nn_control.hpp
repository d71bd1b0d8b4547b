#pragma once

#include <memory>

#include "unisafe/mlp.hpp"
#include "unisafe/sim.hpp"
#include "unisafe/solver.hpp"

namespace unisafe::nn {

/// Network estimate of the minimizer for p, evaluated at q(p).
/// Throws ContractError when the model was built for different N or m.
Vec predict(const MlpModel& model, const ConstraintParams& p);

/// Soft mode returns the raw prediction; hard mode projects it onto the
/// closed polytope of the constraints at x.
sim::Controller make_nn_controller(std::shared_ptr<const MlpModel> model,
                                   const sim::ControlProblem& problem, bool hard);

/// Newton started from the network prediction (moved inside K_p when needed).
SolveResult warmstart_solve(const MlpModel& model, const ConstraintParams& p,
                            const SolverOptions& opts = {});

/// Exact controller warmstarted by the network.
sim::Controller make_warmstart_controller(std::shared_ptr<const MlpModel> model,
                                          const sim::ControlProblem& problem,
                                          const SolverOptions& opts = {});

}  // namespace unisafe::nn
