#pragma once

#include <vector>

#include "unisafe/params.hpp"

namespace unisafe::qp {

/// Working set and multipliers at termination of the active-set iteration.
struct ActiveSetState {
  std::vector<int> working_set;  // constraint indices, in order of entry
  Vec multipliers;               // one per constraint (zero when inactive), all >= 0
};

struct QpSolution {
  Vec u;
  ActiveSetState active;
  int iterations = 0;
};

/// argmin ||u - v||^2 subject to a_i + b_i^T u + margin <= 0.
///
/// Dual active-set method started at the unconstrained minimizer v. The most
/// violated constraint enters first, lowest index on ties. Returns v unchanged
/// when it already satisfies the tightened system. Rows with b_i = 0 are
/// dropped when a_i <= -margin. Throws InfeasibleError when the tightened
/// system is empty.
QpSolution solve_projection(const ConstraintParams& p, const Eigen::Ref<const Vec>& v,
                            double margin);

/// Min-norm input satisfying the non-strict system a_i + b_i^T u <= 0.
Vec solve_min_norm_qp(const ConstraintParams& p);

/// Euclidean projection of v onto {u : a_i + b_i^T u <= -margin}.
Vec project_onto_polytope(const ConstraintParams& p, const Eigen::Ref<const Vec>& v,
                          double margin);

}  // namespace unisafe::qp
