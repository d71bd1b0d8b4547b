#include "unisafe/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "unisafe/csv.hpp"
#include "unisafe/errors.hpp"
#include "unisafe/objective.hpp"
#include "unisafe/random.hpp"

namespace unisafe::sim {

Vec ControlAffineSystem::dynamics(const Vec& x, const Vec& u) const {
  return drift(x) + input_matrix(x) * u;
}

namespace {

void require_finite(double a, const Vec& b, const char* what) {
  if (!std::isfinite(a) || !b.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite constraint coefficients");
  }
}

}  // namespace

AffineConstraint clf_constraint(const ScalarField& lyapunov,
                                const std::function<double(const Vec&)>& decay,
                                const ControlAffineSystem& system, const Vec& x) {
  const Vec grad = lyapunov.gradient(x);
  AffineConstraint c{grad.dot(system.drift(x)) + decay(x),
                     system.input_matrix(x).transpose() * grad};
  require_finite(c.a, c.b, "clf_constraint");
  return c;
}

AffineConstraint cbf_constraint(const ScalarField& barrier,
                                const std::function<double(double)>& alpha,
                                const ControlAffineSystem& system, const Vec& x) {
  const Vec grad = barrier.gradient(x);
  AffineConstraint c{-grad.dot(system.drift(x)) - alpha(barrier.value(x)),
                     -(system.input_matrix(x).transpose() * grad)};
  require_finite(c.a, c.b, "cbf_constraint");
  return c;
}

ConstraintParams ControlProblem::constraints_at(const Vec& x) const {
  if (x.size() != system.state_dim) {
    throw ContractError(name + ": state has dimension " + std::to_string(x.size()) + ", expected " +
                        std::to_string(system.state_dim));
  }
  ConstraintParams p = constraint_map(x);
  if (p.num_constraints() != num_constraints || p.input_dim() != system.input_dim) {
    throw ContractError(name + ": constraint map changed dimensions");
  }
  return p;
}

double ControlProblem::min_barrier(const Vec& x) const {
  double out = std::numeric_limits<double>::infinity();
  for (const auto& h : barriers) out = std::min(out, h.value(x));
  return out;
}

namespace {

ControlAffineSystem single_integrator(int n) {
  return {n, n, [n](const Vec&) -> Vec { return Vec::Zero(n); },
          [n](const Vec&) -> Mat { return Mat::Identity(n, n); }};
}

ScalarField half_square_norm() {
  return {[](const Vec& x) { return 0.5 * x.squaredNorm(); }, [](const Vec& x) -> Vec { return x; }};
}

ScalarField disc_barrier(const Obstacle& o) {
  return {[o](const Vec& x) { return (x - o.center).squaredNorm() - o.radius * o.radius; },
          [o](const Vec& x) -> Vec { return 2.0 * (x - o.center); }};
}

// 8 (1 - r^2 / |x - c|^2)
ScalarField reciprocal_barrier(const Obstacle& o) {
  const double r2 = o.radius * o.radius;
  return {[o, r2](const Vec& x) { return 8.0 * (1.0 - r2 / (x - o.center).squaredNorm()); },
          [o, r2](const Vec& x) -> Vec {
            const Vec d = x - o.center;
            const double s = d.squaredNorm();
            return (16.0 * r2 / (s * s)) * d;
          }};
}

ScalarField product_barrier(std::vector<ScalarField> factors) {
  auto value = [factors](const Vec& x) {
    double h = 1.0;
    for (const auto& f : factors) h *= f.value(x);
    return h;
  };
  auto gradient = [factors](const Vec& x) -> Vec {
    const std::size_t n = factors.size();
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = factors[i].value(x);
    Vec g = Vec::Zero(x.size());
    for (std::size_t i = 0; i < n; ++i) {
      double others = 1.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) others *= vals[j];
      }
      g += others * factors[i].gradient(x);
    }
    return g;
  };
  return {value, gradient};
}

std::vector<Obstacle> planar_preset() {
  return {{Eigen::Vector2d(0.0, 2.5), 1.0}, {Eigen::Vector2d(-2.0, -2.0), 1.0}, {Eigen::Vector2d(2.0, -2.0), 1.0}};
}

}  // namespace

std::vector<Obstacle> sample_obstacles_10d(std::uint64_t seed, int count, double radius) {
  Rng rng(seed);
  std::vector<Obstacle> out;
  while (static_cast<int>(out.size()) < count) {
    Vec c(10);
    for (int i = 0; i < 10; ++i) c(i) = uniform(rng, -2.5, 2.5);
    if (c.norm() >= 1.2 * radius) out.push_back({c, radius});
  }
  return out;
}

ControlProblem make_example_1(const Example1Config& config) {
  const bool planar = config.dimension == Example1Dim::Planar;
  const int n = planar ? 2 : 10;
  std::vector<Obstacle> obstacles = config.obstacles;
  if (obstacles.empty()) obstacles = planar ? planar_preset() : sample_obstacles_10d(config.seed);
  for (const auto& o : obstacles) {
    if (o.center.size() != n) throw ContractError("make_example_1: obstacle center dimension");
    if (!(o.radius > 0.0)) throw ContractError("make_example_1: obstacle radius must be > 0");
  }

  ControlProblem prob;
  prob.system = single_integrator(n);
  prob.lyapunov = half_square_norm();
  const auto decay = [](const Vec& x) { return 0.1 * x.squaredNorm(); };
  const auto identity = [](double s) { return s; };

  if (planar) {
    prob.name = "example1-2d";
    std::vector<ScalarField> discs;
    for (const auto& o : obstacles) discs.push_back(disc_barrier(o));
    prob.barriers = discs;
    prob.num_constraints = 2;
    const ScalarField h = product_barrier(discs);
    prob.constraint_map = [sys = prob.system, lyap = prob.lyapunov, h, decay,
                           identity](const Vec& x) {
      const AffineConstraint clf = clf_constraint(lyap, decay, sys, x);
      const AffineConstraint cbf = cbf_constraint(h, identity, sys, x);
      Vec a(2);
      a << clf.a, cbf.a;
      Mat b(2, 2);
      b.row(0) = clf.b.transpose();
      b.row(1) = cbf.b.transpose();
      return ConstraintParams(std::move(a), std::move(b));
    };
  } else {
    prob.name = "example1-10d";
    for (const auto& o : obstacles) prob.barriers.push_back(reciprocal_barrier(o));
    const int nb = static_cast<int>(obstacles.size());
    prob.num_constraints = nb + 1;
    prob.constraint_map = [sys = prob.system, lyap = prob.lyapunov, hs = prob.barriers, decay,
                           identity, nb, n](const Vec& x) {
      Vec a(nb + 1);
      Mat b(nb + 1, n);
      for (int i = 0; i < nb; ++i) {
        const AffineConstraint c = cbf_constraint(hs[i], identity, sys, x);
        a(i) = c.a;
        b.row(i) = c.b.transpose();
      }
      const AffineConstraint clf = clf_constraint(lyap, decay, sys, x);
      a(nb) = clf.a;
      b.row(nb) = clf.b.transpose();
      return ConstraintParams(std::move(a), std::move(b));
    };
  }
  return prob;
}

ControlProblem make_example_2() {
  ControlProblem prob;
  prob.name = "example2-unicycle";
  prob.system.state_dim = 3;
  prob.system.input_dim = 2;
  prob.system.drift = [](const Vec& s) -> Vec { return Eigen::Vector3d(0.0, -s(1), 0.0); };
  prob.system.input_matrix = [](const Vec& s) -> Mat {
    Mat g = Mat::Zero(3, 2);
    g(0, 0) = std::cos(s(2));
    g(1, 0) = std::sin(s(2));
    g(2, 1) = 1.0;
    return g;
  };
  prob.lyapunov = half_square_norm();
  const ScalarField h{
      [](const Vec& s) { return -s(1) + (2.0 * s(0) + 1.0) * (2.0 * s(0) + 1.0) + 1.0; },
      [](const Vec& s) -> Vec { return Eigen::Vector3d(4.0 * (2.0 * s(0) + 1.0), -1.0, 0.0); }};
  prob.barriers = {h};
  prob.num_constraints = 2;
  prob.constraint_map = [sys = prob.system, lyap = prob.lyapunov, h](const Vec& s) {
    const AffineConstraint clf =
        clf_constraint(lyap, [](const Vec& x) { return 0.1 * x.squaredNorm(); }, sys, s);
    // alpha(s) = 2s reproduces a_2 = -y - 2h
    const AffineConstraint cbf = cbf_constraint(h, [](double v) { return 2.0 * v; }, sys, s);
    Vec a(2);
    a << clf.a, cbf.a;
    Mat b(2, 2);
    b.row(0) = clf.b.transpose();
    b.row(1) = cbf.b.transpose();
    return ConstraintParams(std::move(a), std::move(b));
  };
  return prob;
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Completed:
      return "completed";
    case Termination::ReachedOrigin:
      return "reached_origin";
    case Termination::ControllerFailed:
      return "controller_failed";
    case Termination::LeftPolytope:
      return "left_polytope";
    case Termination::NonFinite:
      return "non_finite";
  }
  return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_options(const SimOptions& opts) {
  if (!(opts.dt > 0.0) || !(opts.horizon >= 0.0) || !(opts.origin_tol >= 0.0)) {
    throw ContractError("SimOptions: dt must be > 0, horizon and origin_tol >= 0");
  }
}

int step_count(const SimOptions& opts) {
  return static_cast<int>(std::floor(opts.horizon / opts.dt + 1e-9));
}

std::string describe_state(const Vec& x) {
  std::ostringstream s;
  s << "x = [";
  for (Eigen::Index i = 0; i < x.size(); ++i) s << (i ? ", " : "") << x(i);
  s << "]";
  return s.str();
}

void record_row(Trajectory& traj, const ControlProblem& problem, double t, const Vec& x,
                const Vec& u) {
  traj.times.push_back(t);
  traj.states.push_back(x);
  traj.inputs.push_back(u);
  traj.margins.push_back(margins(problem.constraints_at(x), u));
  traj.lyapunov.push_back(problem.lyapunov.value ? problem.lyapunov.value(x) : 0.0);
  traj.min_barrier.push_back(problem.min_barrier(x));
}

}  // namespace

Trajectory simulate(const ControlProblem& problem, const Controller& controller, const Vec& x0,
                    const SimOptions& opts) {
  check_options(opts);
  if (x0.size() != problem.system.state_dim || !x0.allFinite()) {
    throw ContractError("simulate: x0 must be a finite state vector");
  }
  const int steps = step_count(opts);
  const double dt = opts.dt;
  Trajectory traj;
  Vec x = x0;

  // Controller call with bookkeeping; false on a feasibility failure.
  auto call = [&](const Vec& state, ControlOutput& out, double& ms, int& iters) -> bool {
    const auto start = Clock::now();
    try {
      out = controller(state);
    } catch (const InfeasibleError& e) {
      ms += elapsed_ms(start);
      traj.termination = Termination::ControllerFailed;
      traj.diagnostic = std::string(e.what()) + " at " + describe_state(state);
      return false;
    }
    ms += elapsed_ms(start);
    iters += out.iterations;
    if (out.u.size() != problem.system.input_dim || !out.u.allFinite()) {
      traj.termination = Termination::NonFinite;
      traj.diagnostic = "controller returned a non-finite input at " + describe_state(state);
      return false;
    }
    return true;
  };

  for (int k = 0; k <= steps; ++k) {
    double ms = 0.0;
    int iters = 0;
    ControlOutput out;
    if (!call(x, out, ms, iters)) break;
    record_row(traj, problem, k * dt, x, out.u);
    traj.solver_iters.push_back(iters);
    traj.solver_ms.push_back(ms);
    if (k == steps) break;
    if (opts.origin_tol > 0.0 && x.norm() < opts.origin_tol) {
      traj.termination = Termination::ReachedOrigin;
      break;
    }

    const auto& sys = problem.system;
    Vec k1 = sys.dynamics(x, out.u);
    Vec k2, k3, k4;
    bool ok = true;
    if (opts.mode == HoldMode::SampleAndHold) {
      k2 = sys.dynamics(x + 0.5 * dt * k1, out.u);
      k3 = sys.dynamics(x + 0.5 * dt * k2, out.u);
      k4 = sys.dynamics(x + dt * k3, out.u);
    } else {
      ControlOutput stage;
      Vec xs = x + 0.5 * dt * k1;
      ok = call(xs, stage, ms, iters);
      if (ok) {
        k2 = sys.dynamics(xs, stage.u);
        xs = x + 0.5 * dt * k2;
        ok = call(xs, stage, ms, iters);
      }
      if (ok) {
        k3 = sys.dynamics(xs, stage.u);
        xs = x + dt * k3;
        ok = call(xs, stage, ms, iters);
      }
      if (ok) k4 = sys.dynamics(xs, stage.u);
      traj.solver_iters.back() = iters;
      traj.solver_ms.back() = ms;
    }
    if (!ok) break;
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) {
      traj.termination = Termination::NonFinite;
      traj.diagnostic = "state became non-finite after t = " + std::to_string(k * dt);
      break;
    }
  }
  return traj;
}

constexpr int kMaxSubsteps = 20000;

Trajectory simulate_interconnection(const ControlProblem& problem, double tau, const Vec& x0,
                                    const Vec& u0, const SimOptions& opts) {
  check_options(opts);
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw ContractError("interconnection: tau must be >= 0");
  if (x0.size() != problem.system.state_dim || u0.size() != problem.system.input_dim) {
    throw ContractError("interconnection: x0/u0 dimension mismatch");
  }
  if (!(max_margin(problem.constraints_at(x0), u0) < kBoundaryMargin)) {
    throw ContractError("interconnection: u0 is not strictly interior at x0");
  }

  const int steps = step_count(opts);
  const double dt = opts.dt;
  const double max_substep = dt / 10.0;
  const auto& sys = problem.system;
  Trajectory traj;
  Vec x = x0;
  Vec u = u0;
  double h = max_substep;

  auto input_rate = [&](const Vec& state, const Vec& input) -> Vec {
    const ConstraintParams p = problem.constraints_at(state);
    return -tau * grad_J(p, input);
  };

  for (int k = 0; k <= steps; ++k) {
    record_row(traj, problem, k * dt, x, u);
    traj.input_rates.push_back(input_rate(x, u));
    traj.solver_iters.push_back(0);
    traj.solver_ms.push_back(0.0);
    if (k == steps) break;
    if (opts.origin_tol > 0.0 && x.norm() < opts.origin_tol) {
      traj.termination = Termination::ReachedOrigin;
      break;
    }

    const auto start = Clock::now();
    double remaining = dt;
    int substeps = 0;
    int rejected = 0;
    bool failed = false;
    while (remaining > 1e-15 * dt) {
      if (substeps + rejected > kMaxSubsteps) {
        failed = true;
        break;
      }
      const double step = std::min(h, remaining);
      const Vec k1 = sys.dynamics(x, u);
      const Vec k2 = sys.dynamics(x + 0.5 * step * k1, u);
      const Vec k3 = sys.dynamics(x + 0.5 * step * k2, u);
      const Vec k4 = sys.dynamics(x + step * k3, u);
      const Vec x_next = x + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

      bool accepted = false;
      Vec u_next = u;
      const ConstraintParams p = problem.constraints_at(x_next);
      if (tau == 0.0) {
        accepted = true;
      } else if (max_margin(p, u) < kBoundaryMargin) {
        const ObjectiveEval e = evaluate(ObjectiveView::plain(p), u, EvalOrder::Hessian);
        Mat lhs = step * tau * e.hessian;
        lhs.diagonal().array() += 1.0;
        u_next = u - lhs.ldlt().solve(step * tau * e.gradient);
        accepted = u_next.allFinite() && max_margin(p, u_next) < kBoundaryMargin;
      }
      if (!accepted) {
        h = 0.5 * step;
        ++rejected;
        if (h < 1e-12 * dt) {
          failed = true;
          break;
        }
        continue;
      }
      x = x_next;
      u = u_next;
      remaining -= step;
      ++substeps;
      h = std::min(max_substep, 2.0 * step);
    }
    traj.solver_iters.back() = substeps;
    traj.solver_ms.back() = elapsed_ms(start);
    if (failed) {
      traj.termination = Termination::LeftPolytope;
      traj.diagnostic = "input left the feasible polytope near " + describe_state(x);
      break;
    }
    if (!x.allFinite() || !u.allFinite()) {
      traj.termination = Termination::NonFinite;
      traj.diagnostic = "state became non-finite";
      break;
    }
  }
  return traj;
}

Metrics metrics(const Trajectory& traj, const ControlProblem& problem) {
  if (traj.size() == 0) throw ContractError("metrics: empty trajectory");
  Metrics out;
  out.min_barrier.reserve(traj.size());
  out.lyapunov.reserve(traj.size());
  for (const Vec& x : traj.states) {
    out.min_barrier.push_back(problem.min_barrier(x));
    out.lyapunov.push_back(problem.lyapunov.value(x));
  }
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (out.min_barrier[i] < 0.0) ++out.violations;
    if (i > 0 && out.lyapunov[i] > out.lyapunov[i - 1] + 1e-9) ++out.lyapunov_increases;
  }
  out.final_norm = traj.states.back().norm();
  out.min_barrier_min = *std::min_element(out.min_barrier.begin(), out.min_barrier.end());
  out.lyapunov_final = out.lyapunov.back();
  return out;
}

double sup_state_distance(const Trajectory& a, const Trajectory& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < n; ++i) sup = std::max(sup, (a.states[i] - b.states[i]).norm());
  return sup;
}

namespace {

std::string trajectory_header(int n, int m, int nc) {
  std::string h = "t";
  for (int i = 0; i < n; ++i) h += ",x_" + std::to_string(i);
  for (int i = 0; i < m; ++i) h += ",u_" + std::to_string(i);
  for (int i = 0; i < nc; ++i) h += ",margin_" + std::to_string(i);
  h += ",V,min_h,solver_iters,solver_ms";
  return h;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const int n = traj.size() ? static_cast<int>(traj.states[0].size()) : 0;
  const int m = traj.size() ? static_cast<int>(traj.inputs[0].size()) : 0;
  const int nc = traj.size() ? static_cast<int>(traj.margins[0].size()) : 0;
  out << trajectory_header(n, m, nc) << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << csv::format_double(traj.times[k]);
    for (int i = 0; i < n; ++i) out << ',' << csv::format_double(traj.states[k](i));
    for (int i = 0; i < m; ++i) out << ',' << csv::format_double(traj.inputs[k](i));
    for (int i = 0; i < nc; ++i) out << ',' << csv::format_double(traj.margins[k](i));
    out << ',' << csv::format_double(traj.lyapunov[k]) << ','
        << csv::format_double(traj.min_barrier[k]) << ',' << traj.solver_iters[k] << ','
        << csv::format_double(traj.solver_ms[k]) << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& in, int state_dim, int input_dim,
                               int num_constraints) {
  csv::Reader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError("trajectory CSV: missing header", 0);
  if (line != trajectory_header(state_dim, input_dim, num_constraints)) {
    throw SchemaError("trajectory CSV: header does not match the expected dimensions");
  }
  const std::size_t width = 1 + state_dim + input_dim + num_constraints + 4;
  Trajectory traj;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto row = csv::parse_row(line, width, reader.line_offset());
    std::size_t c = 0;
    traj.times.push_back(row[c++]);
    Vec x(state_dim), u(input_dim), mg(num_constraints);
    for (int i = 0; i < state_dim; ++i) x(i) = row[c++];
    for (int i = 0; i < input_dim; ++i) u(i) = row[c++];
    for (int i = 0; i < num_constraints; ++i) mg(i) = row[c++];
    traj.states.push_back(std::move(x));
    traj.inputs.push_back(std::move(u));
    traj.margins.push_back(std::move(mg));
    traj.lyapunov.push_back(row[c++]);
    traj.min_barrier.push_back(row[c++]);
    traj.solver_iters.push_back(static_cast<int>(row[c++]));
    traj.solver_ms.push_back(row[c++]);
  }
  return traj;
}

}  // namespace unisafe::sim
