#include "unisafe/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "unisafe/errors.hpp"

namespace unisafe {

ConstraintParams::ConstraintParams(Vec a, Mat b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() < 1) throw ContractError("ConstraintParams: need at least one constraint");
  if (b_.cols() < 1) throw ContractError("ConstraintParams: input dimension must be >= 1");
  if (b_.rows() != a_.size()) {
    throw ContractError("ConstraintParams: b has " + std::to_string(b_.rows()) + " rows but a has " +
                        std::to_string(a_.size()) + " entries");
  }
  if (!a_.allFinite() || !b_.allFinite()) {
    throw ContractError("ConstraintParams: non-finite coefficient");
  }
}

double ConstraintParams::scale() const {
  double m = std::max(1.0, a_.cwiseAbs().maxCoeff());
  return std::max(m, b_.rowwise().norm().maxCoeff());
}

ScaledParams::ScaledParams(ConstraintParams base_, double r_) : base(std::move(base_)), r(r_) {
  constexpr double kSlack = 1e-12;
  if (!(r >= 0.0 && r <= 1.0)) throw ContractError("ScaledParams: r must lie in [0, 1]");
  if (base.a().cwiseAbs().maxCoeff() > 1.0 + kSlack ||
      base.b().rowwise().norm().maxCoeff() > 1.0 + kSlack) {
    throw ContractError("ScaledParams: coefficients exceed the unit box");
  }
}

Vec margins(const ConstraintParams& p, const Eigen::Ref<const Vec>& u) {
  if (u.size() != p.input_dim()) {
    throw ContractError("margins: input has dimension " + std::to_string(u.size()) + ", expected " +
                        std::to_string(p.input_dim()));
  }
  return p.a() + p.b() * u;
}

double max_margin(const ConstraintParams& p, const Eigen::Ref<const Vec>& u) {
  return margins(p, u).maxCoeff();
}

namespace {

// Smoothed max of normalized margins, (1/beta) log sum exp(beta * m_i).
struct SmoothMax {
  double value;
  Vec grad;
};

SmoothMax smooth_max(const ConstraintParams& p, double inv_scale, double beta, const Vec& u) {
  const Vec m = (p.a() + p.b() * u) * inv_scale;
  const double top = m.maxCoeff();
  const Vec w = (beta * (m.array() - top)).exp().matrix();
  const double total = w.sum();
  SmoothMax out;
  out.value = top + std::log(total) / beta;
  out.grad = p.b().transpose() * (w / total) * inv_scale;
  return out;
}

struct DescentRun {
  Vec best_point;
  double best_margin;
  int iterations = 0;
};

constexpr int kSettleIterations = 200;

// Gradient descent with Armijo backtracking on the smoothed max, tracking the
// iterate with the lowest exact max-margin. Stops early once the point is
// deeper than one scale unit, or a few hundred iterations after a certified
// point turned up.
void descend(const ConstraintParams& p, double beta, int budget, double certified, Vec& u,
             DescentRun& run) {
  const double inv_scale = 1.0 / p.scale();
  const double deep_enough = -1.0;  // in normalized units
  const double grad_floor = 1e-12;
  double step = 1.0;
  SmoothMax cur = smooth_max(p, inv_scale, beta, u);
  for (int it = 0; it < budget; ++it) {
    ++run.iterations;
    const double gnorm2 = cur.grad.squaredNorm();
    if (std::sqrt(gnorm2) <= grad_floor) return;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      Vec trial = u - step * cur.grad;
      SmoothMax next = smooth_max(p, inv_scale, beta, trial);
      if (next.value <= cur.value - 1e-4 * step * gnorm2) {
        u = std::move(trial);
        const double improvement = cur.value - next.value;
        cur = std::move(next);
        accepted = true;
        step *= 2.0;
        const double mm = max_margin(p, u);
        if (mm < run.best_margin) {
          run.best_margin = mm;
          run.best_point = u;
        }
        if (mm * inv_scale < deep_enough) return;
        if (run.best_margin < -certified && it >= kSettleIterations) return;
        if (improvement <= 1e-15 * (1.0 + std::abs(cur.value))) return;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return;
  }
}

DescentRun run_schedule(const ConstraintParams& p, Vec start, const FeasibilityOptions& opts) {
  DescentRun run;
  run.best_point = start;
  run.best_margin = max_margin(p, start);
  Vec u = std::move(start);
  for (double beta : {1.0, 10.0, 100.0}) {
    descend(p, beta, opts.budget, opts.feas_tol, u, run);
    if (run.best_margin < -opts.feas_tol) return run;
  }
  // The smoothed problem can only resolve max-margins to within log(N)/beta;
  // sharpen further when the best point is still inside that band.
  const double band = std::log(static_cast<double>(p.num_constraints())) / 100.0 * p.scale();
  for (double beta : {1e3, 1e4, 1e5}) {
    if (run.best_margin < -opts.feas_tol || run.best_margin > band) break;
    u = run.best_point;
    descend(p, beta, opts.budget, opts.feas_tol, u, run);
  }
  return run;
}

}  // namespace

FeasibilityResult find_interior_point(const ConstraintParams& p, const FeasibilityOptions& opts) {
  if (!(opts.feas_tol > 0.0) || opts.budget < 1) {
    throw ContractError("find_interior_point: feas_tol must be > 0 and budget >= 1");
  }
  const Vec heuristic = -p.b().colwise().sum().transpose();
  DescentRun run = run_schedule(p, heuristic, opts);
  int total_iterations = run.iterations;
  if (!(run.best_margin < -opts.feas_tol)) {
    DescentRun second = run_schedule(p, Vec::Zero(p.input_dim()), opts);
    total_iterations += second.iterations;
    if (second.best_margin < run.best_margin) run = std::move(second);
  }

  FeasibilityResult out;
  out.best_point = run.best_point;
  out.best_margin = run.best_margin;
  out.iterations = total_iterations;
  if (run.best_margin < -opts.feas_tol) {
    out.status = FeasibilityStatus::Feasible;
    out.certificate = FeasibilityCertificate{run.best_point, run.best_margin};
  } else if (run.best_margin > opts.feas_tol) {
    out.status = FeasibilityStatus::Infeasible;
  } else {
    out.status = FeasibilityStatus::Indeterminate;
  }
  return out;
}

std::pair<ScaledParams, double> scale_params(const ConstraintParams& p) {
  const double m = p.scale();
  ConstraintParams base(p.a() / m, p.b() / m);
  return {ScaledParams(std::move(base), 1.0 / (m * m)), m};
}

Vec flatten(const ScaledParams& q) {
  const int n = q.base.num_constraints();
  const int m = q.base.input_dim();
  Vec out(n * (m + 1) + 1);
  out.head(n) = q.base.a();
  for (int i = 0; i < n; ++i) out.segment(n + i * m, m) = q.base.b().row(i).transpose();
  out(out.size() - 1) = q.r;
  return out;
}

std::pair<ConstraintParams, double> unflatten(const Eigen::Ref<const Vec>& q_flat, int n_constraints,
                                              int input_dim) {
  if (n_constraints < 1 || input_dim < 1 ||
      q_flat.size() != n_constraints * (input_dim + 1) + 1) {
    throw ContractError("unflatten: width does not match N(m+1)+1");
  }
  Vec a = q_flat.head(n_constraints);
  Mat b(n_constraints, input_dim);
  for (int i = 0; i < n_constraints; ++i) {
    b.row(i) = q_flat.segment(n_constraints + i * input_dim, input_dim).transpose();
  }
  return {ConstraintParams(std::move(a), std::move(b)), q_flat(q_flat.size() - 1)};
}

}  // namespace unisafe
