#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "unisafe/objective.hpp"
#include "unisafe/params.hpp"

namespace unisafe {

enum class SolveStatus { Converged, MaxIter, Degenerate };

std::string_view to_string(SolveStatus status);

/// Minimizer of J over K_p together with convergence diagnostics.
struct SolveResult {
  Vec k_star;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIter;
  /// Objective after every accepted step, filled when SolverOptions::record_history is set.
  std::vector<double> history;
};

struct SolverOptions {
  double grad_tol = 1e-10;
  int max_iter = 100;
  double armijo = 1e-4;
  double boundary_fraction = 0.99;
  int centering_steps = 5;
  bool record_history = false;

  /// Throws ContractError on nonpositive values or boundary_fraction >= 1.
  void validate() const;
};

/// Damped Newton with a fraction-to-boundary cap and Armijo backtracking.
///
/// Without a warmstart, iteration starts from find_interior_point() followed
/// by a few gradient centering steps. A warmstart outside K_p is first
/// projected onto the polytope tightened by 1e-3. Throws InfeasibleError when
/// K_p cannot be certified nonempty.
SolveResult solve_exact(const ConstraintParams& p, const SolverOptions& opts = {},
                        const std::optional<Vec>& warmstart = std::nullopt);

/// Scaled form. Returns status Degenerate when r = 0 and the b_i do not span R^m.
SolveResult solve_exact(const ScaledParams& q, const SolverOptions& opts = {},
                        const std::optional<Vec>& warmstart = std::nullopt);

/// Weighted form.
SolveResult solve_exact(const ConstraintParams& p, const WeightVector& w,
                        const SolverOptions& opts = {},
                        const std::optional<Vec>& warmstart = std::nullopt);

struct FlowOptions {
  double tol = 1e-6;       // stop once ||grad|| <= tol
  double rtol = 1e-3;      // local error per step, relative to the step length h ||grad||
  double atol = 1e-15;
  int max_steps = 2000000;  // accepted + rejected steps
};

/// Integrates dk/dt = -grad J(k) with an adaptive Dormand-Prince 5(4) scheme
/// until the gradient norm falls below tol. Steps that leave K_p are rejected.
/// Step-size underflow or exhausting max_steps yields MaxIter.
SolveResult solve_gradient_flow(const ConstraintParams& p, const FlowOptions& opts = {},
                                const std::optional<Vec>& warmstart = std::nullopt);
SolveResult solve_gradient_flow(const ScaledParams& q, const FlowOptions& opts = {},
                                const std::optional<Vec>& warmstart = std::nullopt);

/// Closed-form minimizer for N = m = 1; coincides with the CLF universal formula.
/// Throws InfeasibleError when b = 0 and a >= 0.
double closed_form_1d(double a, double b);

/// True when the rows of b span R^m (numerical rank test).
bool rows_span_input_space(const Mat& b);

}  // namespace unisafe
