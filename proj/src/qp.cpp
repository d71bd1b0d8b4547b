#include "unisafe/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "unisafe/errors.hpp"

namespace unisafe::qp {

namespace {

[[noreturn]] void throw_infeasible(int index, double violation) {
  std::ostringstream msg;
  msg << "tightened constraint system is infeasible (constraint " << index
      << " cannot be satisfied, violation " << violation << ")";
  throw InfeasibleError(msg.str(), violation);
}

}  // namespace

QpSolution solve_projection(const ConstraintParams& p, const Eigen::Ref<const Vec>& v,
                            double margin) {
  const int n = p.num_constraints();
  const int m = p.input_dim();
  if (v.size() != m) throw ContractError("solve_projection: v has the wrong dimension");
  if (!(margin >= 0.0) || !std::isfinite(margin)) {
    throw ContractError("solve_projection: margin must be finite and nonnegative");
  }

  const Vec row_norm = p.b().rowwise().norm();
  std::vector<int> candidates;
  for (int i = 0; i < n; ++i) {
    if (row_norm(i) > 0.0) {
      candidates.push_back(i);
    } else if (p.a()(i) > -margin) {
      throw_infeasible(i, p.a()(i) + margin);
    }
  }

  QpSolution sol;
  sol.u = v;
  sol.active.multipliers = Vec::Zero(n);
  std::vector<int>& active = sol.active.working_set;
  Vec& lambda = sol.active.multipliers;

  const double tol = 1e-13 * std::max({1.0, p.a().cwiseAbs().maxCoeff(),
                                       row_norm.maxCoeff() * (1.0 + v.norm())});
  const int max_iter = 20 * (n + m) + 100;

  for (int iter = 0; iter < max_iter; ++iter) {
    const Vec s = (p.a() + p.b() * sol.u).array() + margin;
    int entering = -1;
    double worst = tol;
    for (int i : candidates) {
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      if (s(i) > worst) {  // strict: lowest index wins ties
        worst = s(i);
        entering = i;
      }
    }
    if (entering < 0) return sol;
    ++sol.iterations;

    const Vec normal = p.b().row(entering).transpose();
    double violation = s(entering);
    double entering_lambda = 0.0;
    for (;;) {
      const int q = static_cast<int>(active.size());
      Mat normals(m, q);
      for (int j = 0; j < q; ++j) normals.col(j) = p.b().row(active[j]).transpose();
      Vec dual_dir = Vec::Zero(q);
      if (q > 0) dual_dir = normals.colPivHouseholderQr().solve(normal);
      const Vec primal_dir = normal - normals * dual_dir;

      const double z2 = primal_dir.squaredNorm();
      const double full_step = z2 > 1e-24 * normal.squaredNorm()
                                   ? violation / z2
                                   : std::numeric_limits<double>::infinity();
      double partial_step = std::numeric_limits<double>::infinity();
      int blocking = -1;
      for (int j = 0; j < q; ++j) {
        if (dual_dir(j) > 1e-14) {
          const double ratio = lambda(active[j]) / dual_dir(j);
          if (ratio < partial_step) {
            partial_step = ratio;
            blocking = j;
          }
        }
      }
      if (!std::isfinite(full_step) && !std::isfinite(partial_step)) {
        throw_infeasible(entering, violation);
      }

      const double t = std::min(full_step, partial_step);
      for (int j = 0; j < q; ++j) lambda(active[j]) -= t * dual_dir(j);
      entering_lambda += t;
      if (std::isfinite(full_step)) {
        sol.u -= t * primal_dir;
        violation -= t * z2;
      }
      if (full_step <= partial_step) {
        lambda(entering) = entering_lambda;
        active.push_back(entering);
        break;
      }
      lambda(active[blocking]) = 0.0;
      active.erase(active.begin() + blocking);
    }
  }
  throw NumericError("solve_projection: active-set iteration limit reached");
}

Vec solve_min_norm_qp(const ConstraintParams& p) {
  return solve_projection(p, Vec::Zero(p.input_dim()), 0.0).u;
}

Vec project_onto_polytope(const ConstraintParams& p, const Eigen::Ref<const Vec>& v,
                          double margin) {
  return solve_projection(p, v, margin).u;
}

}  // namespace unisafe::qp
