#include "unisafe/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "unisafe/errors.hpp"
#include "unisafe/qp.hpp"

namespace unisafe {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged:
      return "Converged";
    case SolveStatus::MaxIter:
      return "MaxIter";
    case SolveStatus::Degenerate:
      return "Degenerate";
  }
  return "Unknown";
}

void SolverOptions::validate() const {
  if (!(grad_tol > 0.0) || max_iter < 1 || !(armijo > 0.0) || !(boundary_fraction > 0.0) ||
      !(boundary_fraction < 1.0) || centering_steps < 0) {
    throw ContractError("SolverOptions: invalid value");
  }
}

bool rows_span_input_space(const Mat& b) {
  Eigen::ColPivHouseholderQR<Mat> qr(b);
  qr.setThreshold(1e-12);
  return qr.rank() == b.cols();
}

namespace {

constexpr double kWarmstartMargin = 1e-3;

[[noreturn]] void throw_not_feasible(const FeasibilityResult& feas) {
  std::ostringstream msg;
  msg << (feas.status == FeasibilityStatus::Infeasible ? "infeasible" : "indeterminate")
      << " constraint system: best max-margin " << feas.best_margin;
  throw InfeasibleError(msg.str(), feas.best_margin);
}

// Min-norm point keeping distance rho from every facet, with rho shrunk from
// the min-norm solution's length until the tightened polytope is nonempty.
std::optional<Vec> tightened_interior_point(const ConstraintParams& p) {
  const int n = p.num_constraints();
  std::vector<int> rows;
  for (int i = 0; i < n; ++i) {
    const double len = p.b().row(i).norm();
    if (len > 0.0) {
      rows.push_back(i);
    } else if (!(p.a()(i) < kBoundaryMargin)) {
      return std::nullopt;
    }
  }
  if (rows.empty()) return Vec::Zero(p.input_dim());
  Vec a(rows.size());
  Mat b(rows.size(), p.input_dim());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double len = p.b().row(rows[j]).norm();
    a(j) = p.a()(rows[j]) / len;
    b.row(j) = p.b().row(rows[j]) / len;
  }
  const ConstraintParams unit(std::move(a), std::move(b));
  const Vec origin = Vec::Zero(p.input_dim());
  double rho;
  try {
    rho = std::max(1e-3, qp::project_onto_polytope(unit, origin, 0.0).norm());
  } catch (const InfeasibleError&) {
    return std::nullopt;
  }
  for (int attempt = 0; attempt < 8; ++attempt, rho *= 0.1) {
    try {
      Vec u = qp::project_onto_polytope(unit, origin, rho);
      if (max_margin(p, u) < kBoundaryMargin) return u;
    } catch (const InfeasibleError&) {
    }
  }
  return std::nullopt;
}

Vec certified_interior_point(const ConstraintParams& p) {
  if (auto u = tightened_interior_point(p)) return *u;
  FeasibilityResult feas = find_interior_point(p);
  if (feas.status != FeasibilityStatus::Feasible) throw_not_feasible(feas);
  return feas.certificate->interior_point;
}

// Interior starting point, honoring a warmstart when one is given.
Vec starting_point(const ConstraintParams& p, const std::optional<Vec>& warmstart, bool& center) {
  center = true;
  if (warmstart) {
    if (warmstart->size() != p.input_dim()) {
      throw ContractError("warmstart has dimension " + std::to_string(warmstart->size()) +
                          ", expected " + std::to_string(p.input_dim()));
    }
    if (warmstart->allFinite()) {
      if (max_margin(p, *warmstart) < kBoundaryMargin) {
        center = false;
        return *warmstart;
      }
      try {
        Vec moved = qp::project_onto_polytope(p, *warmstart, kWarmstartMargin);
        if (max_margin(p, moved) < kBoundaryMargin) {
          // projected point hugs the boundary; keep the centering pass
          return moved;
        }
      } catch (const InfeasibleError&) {
        // polytope thinner than the interiorization margin
      }
    }
  }
  return certified_interior_point(p);
}

// Largest step along dir keeping each margin at least (1 - fraction) of its current value.
double boundary_step(const ConstraintParams& p, const Vec& d, const Vec& dir, double fraction) {
  const Vec rate = p.b() * dir;
  double cap = 1.0;
  for (Eigen::Index i = 0; i < rate.size(); ++i) {
    if (rate(i) > 0.0) cap = std::min(cap, fraction * (-d(i)) / rate(i));
  }
  return cap;
}

struct LineSearch {
  bool accepted = false;
  Vec k;
  double value = 0.0;
};

LineSearch backtrack(const ObjectiveView& obj, const Vec& k, double value, const Vec& grad,
                     const Vec& dir, double step, double armijo) {
  const double slope = grad.dot(dir);
  for (int bt = 0; bt < 60; ++bt) {
    Vec trial = k + step * dir;
    if (auto v = try_value(obj, trial); v && *v <= value + armijo * step * slope && *v < value) {
      return {true, std::move(trial), *v};
    }
    step *= 0.5;
  }
  return {};
}

SolveResult newton(const ObjectiveView& obj, Vec k, bool center, const SolverOptions& opts) {
  const ConstraintParams& p = *obj.params;
  SolveResult res;
  auto record = [&](double v) {
    if (opts.record_history) res.history.push_back(v);
  };

  if (center) {
    for (int s = 0; s < opts.centering_steps; ++s) {
      ObjectiveEval e = evaluate(obj, k, EvalOrder::Gradient);
      const double gnorm = e.gradient.norm();
      if (gnorm <= opts.grad_tol) break;
      const Vec dir = -e.gradient;
      const double cap = boundary_step(p, e.margins, dir, opts.boundary_fraction);
      LineSearch ls = backtrack(obj, k, e.value, e.gradient, dir,
                                std::min(cap, (1.0 + k.norm()) / gnorm), opts.armijo);
      if (!ls.accepted) break;
      k = std::move(ls.k);
      ++res.iterations;
      record(ls.value);
    }
  }

  int polish = 0;
  for (int it = 0; it < opts.max_iter; ++it) {
    ObjectiveEval e = evaluate(obj, k, EvalOrder::Hessian);
    res.grad_norm = e.gradient.norm();
    res.objective = e.value;
    Vec dir;
    Eigen::LLT<Mat> llt(e.hessian);
    const bool well_posed = llt.info() == Eigen::Success && llt.rcond() > 1e-12;
    if (well_posed) dir = -llt.solve(e.gradient);

    if (res.grad_norm <= opts.grad_tol) {
      // A small gradient on a flat objective can still leave k far from the
      // minimizer; up to two full Newton steps close that gap.
      if (well_posed && polish < 2 && dir.allFinite() &&
          dir.norm() > 1e-13 * (1.0 + k.norm())) {
        Vec trial = k + dir;
        if (max_margin(p, trial) < kBoundaryMargin) {
          ObjectiveEval t = evaluate(obj, trial, EvalOrder::Gradient);
          if (t.gradient.norm() <= opts.grad_tol) {
            ++polish;
            k = std::move(trial);
            ++res.iterations;
            record(t.value);
            continue;
          }
        }
      }
      res.status = SolveStatus::Converged;
      res.k_star = std::move(k);
      return res;
    }

    if (!well_posed || !dir.allFinite() || e.gradient.dot(dir) >= 0.0) dir = -e.gradient;

    const double cap = boundary_step(p, e.margins, dir, opts.boundary_fraction);
    LineSearch ls = backtrack(obj, k, e.value, e.gradient, dir, cap, opts.armijo);
    if (!ls.accepted && well_posed) {
      // J decrease lost in roundoff: judge the Newton step by the gradient instead
      Vec trial = k + std::min(1.0, cap) * dir;
      if (max_margin(p, trial) < kBoundaryMargin) {
        ObjectiveEval t = evaluate(obj, trial, EvalOrder::Gradient);
        if (t.gradient.norm() < 0.5 * res.grad_norm) ls = {true, std::move(trial), t.value};
      }
    }
    if (!ls.accepted) break;  // roundoff floor
    k = std::move(ls.k);
    ++res.iterations;
    record(ls.value);
  }

  ObjectiveEval e = evaluate(obj, k, EvalOrder::Gradient);
  res.objective = e.value;
  res.grad_norm = e.gradient.norm();
  res.status = res.grad_norm <= opts.grad_tol ? SolveStatus::Converged : SolveStatus::MaxIter;
  res.k_star = std::move(k);
  return res;
}

SolveResult solve_view(const ObjectiveView& obj, const SolverOptions& opts,
                       const std::optional<Vec>& warmstart) {
  opts.validate();
  bool center = true;
  Vec k0 = starting_point(*obj.params, warmstart, center);
  return newton(obj, std::move(k0), center, opts);
}

}  // namespace

SolveResult solve_exact(const ConstraintParams& p, const SolverOptions& opts,
                        const std::optional<Vec>& warmstart) {
  return solve_view(ObjectiveView::plain(p), opts, warmstart);
}

SolveResult solve_exact(const ScaledParams& q, const SolverOptions& opts,
                        const std::optional<Vec>& warmstart) {
  if (q.r == 0.0 && !rows_span_input_space(q.base.b())) {
    SolveResult res;
    res.status = SolveStatus::Degenerate;
    res.k_star = Vec::Zero(q.base.input_dim());
    res.objective = std::numeric_limits<double>::quiet_NaN();
    res.grad_norm = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  return solve_view(ObjectiveView::scaled(q), opts, warmstart);
}

SolveResult solve_exact(const ConstraintParams& p, const WeightVector& w,
                        const SolverOptions& opts, const std::optional<Vec>& warmstart) {
  return solve_view(ObjectiveView::weighted(p, w), opts, warmstart);
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> kC{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr std::array<double, 7> kErr{71.0 / 57600,      0.0, -71.0 / 16695, 71.0 / 1920,
                                     -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

SolveResult flow_view(const ObjectiveView& obj, const FlowOptions& opts,
                      const std::optional<Vec>& warmstart) {
  if (!(opts.tol > 0.0) || !(opts.rtol > 0.0) || !(opts.atol > 0.0) || opts.max_steps < 1) {
    throw ContractError("FlowOptions: invalid value");
  }
  bool center = true;
  Vec k = starting_point(*obj.params, warmstart, center);
  const int m = static_cast<int>(k.size());

  auto rhs = [&](const Vec& x, Vec& out) -> bool {
    const Vec d = margins(*obj.params, x);
    if (!(d.maxCoeff() < kBoundaryMargin)) return false;
    out = -evaluate(obj, x, EvalOrder::Gradient).gradient;
    return out.allFinite();
  };

  SolveResult res;
  std::array<Vec, 7> stages;
  for (auto& s : stages) s.resize(m);
  if (!rhs(k, stages[0])) throw NumericError("gradient flow: start point is not interior");

  double h = 0.01 * (1.0 + k.norm()) / std::max(stages[0].norm(), 1e-12);
  double t = 0.0;
  Vec trial(m);
  // On flat objectives a small gradient can still sit far from the minimizer,
  // so the estimated distance |H^-1 g| must also be below tol.
  auto settled = [&](const Vec& x, const Vec& g) {
    if (!(g.norm() <= opts.tol)) return false;
    const Mat hess = evaluate(obj, x, EvalOrder::Hessian).hessian;
    Eigen::LLT<Mat> llt(hess);
    if (llt.info() != Eigen::Success) return true;
    return llt.solve(g).norm() <= opts.tol;
  };
  for (int step = 0; step < opts.max_steps; ++step) {
    res.grad_norm = stages[0].norm();
    if (settled(k, stages[0])) {
      res.status = SolveStatus::Converged;
      break;
    }
    if (h < 1e-15 * (1.0 + t)) break;

    bool inside = true;
    for (int s = 1; s < 7 && inside; ++s) {
      trial = k;
      for (int j = 0; j < s; ++j) trial += h * kA[s][j] * stages[j];
      inside = rhs(trial, stages[s]);
    }
    if (!inside) {
      h *= 0.25;
      continue;
    }
    // stage 6 is evaluated at the 5th-order solution (FSAL)
    Vec err = Vec::Zero(m);
    for (int s = 0; s < 7; ++s) err += h * kErr[s] * stages[s];
    // Error measured against the step's own displacement, so the noise left
    // in stiff directions shrinks with the gradient instead of flooring it.
    const double allowed = opts.atol + opts.rtol * h * stages[0].norm();
    const double err_norm = err.norm() / allowed;
    if (err_norm <= 1.0) {
      t += h;
      k = trial;
      stages[0] = stages[6];
      ++res.iterations;
    }
    const double factor = err_norm > 0.0 ? 0.9 * std::pow(err_norm, -0.2) : 5.0;
    h *= std::clamp(factor, 0.2, 5.0);
  }
  res.k_star = k;
  res.objective = evaluate(obj, k, EvalOrder::Value).value;
  res.grad_norm = stages[0].norm();
  if (res.grad_norm <= opts.tol) res.status = SolveStatus::Converged;
  return res;
}

}  // namespace

SolveResult solve_gradient_flow(const ConstraintParams& p, const FlowOptions& opts,
                                const std::optional<Vec>& warmstart) {
  return flow_view(ObjectiveView::plain(p), opts, warmstart);
}

SolveResult solve_gradient_flow(const ScaledParams& q, const FlowOptions& opts,
                                const std::optional<Vec>& warmstart) {
  if (q.r == 0.0 && !rows_span_input_space(q.base.b())) {
    SolveResult res;
    res.status = SolveStatus::Degenerate;
    res.k_star = Vec::Zero(q.base.input_dim());
    res.objective = std::numeric_limits<double>::quiet_NaN();
    res.grad_norm = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  return flow_view(ObjectiveView::scaled(q), opts, warmstart);
}

double closed_form_1d(double a, double b) {
  if (b == 0.0) {
    if (a < 0.0) return 0.0;
    throw InfeasibleError("closed_form_1d: b = 0 requires a < 0", a);
  }
  const double root = std::hypot(a, b * b);
  // -(a + root) / b, rearranged to avoid cancellation when a < 0
  if (a >= 0.0) return -(a + root) / b;
  return -(b * b * b) / (root - a);
}

}  // namespace unisafe
