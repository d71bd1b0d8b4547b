#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "unisafe/params.hpp"

namespace unisafe::sim {

/// dx/dt = f(x) + g(x) u.
struct ControlAffineSystem {
  int state_dim = 0;
  int input_dim = 0;
  std::function<Vec(const Vec&)> drift;
  std::function<Mat(const Vec&)> input_matrix;

  Vec dynamics(const Vec& x, const Vec& u) const;
};

/// Scalar function with its gradient.
struct ScalarField {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

/// One inequality a + b^T u < 0.
struct AffineConstraint {
  double a;
  Vec b;
};

/// a = grad V^T f + W,  b = g^T grad V.
AffineConstraint clf_constraint(const ScalarField& lyapunov,
                                const std::function<double(const Vec&)>& decay,
                                const ControlAffineSystem& system, const Vec& x);

/// a = -grad h^T f - alpha(h),  b = -g^T grad h.
AffineConstraint cbf_constraint(const ScalarField& barrier,
                                const std::function<double(double)>& alpha,
                                const ControlAffineSystem& system, const Vec& x);

/// A control-affine system together with its state-dependent input constraints.
/// `lyapunov` and `barriers` are kept for the safety/stability metrics.
struct ControlProblem {
  std::string name;
  ControlAffineSystem system;
  int num_constraints = 0;
  std::function<ConstraintParams(const Vec&)> constraint_map;
  ScalarField lyapunov;
  std::vector<ScalarField> barriers;

  /// constraint_map(x) with a dimension check against num_constraints and input_dim.
  ConstraintParams constraints_at(const Vec& x) const;
  double min_barrier(const Vec& x) const;
};

struct Obstacle {
  Vec center;
  double radius;
};

enum class Example1Dim { Planar, TenD };

struct Example1Config {
  Example1Dim dimension = Example1Dim::Planar;
  /// Empty selects the preset: three unit discs in 2D, nine seeded balls of radius 0.8 in 10D.
  std::vector<Obstacle> obstacles;
  std::uint64_t seed = 2024;
};

/// Single integrator with V = |x|^2/2, W = 0.1|x|^2 and obstacle barriers.
///
/// Planar: constraints (CLF, product CBF h1 h2 h3). TenD: nine reciprocal CBFs
/// 8(1 - r^2/|x - c|^2) followed by the CLF.
ControlProblem make_example_1(const Example1Config& config = {});

/// Obstacle centers of the 10D preset: uniform in [-2.5, 2.5]^10, rejected within 1.2 r of the origin.
std::vector<Obstacle> sample_obstacles_10d(std::uint64_t seed, int count = 9, double radius = 0.8);

/// Unicycle with drift, constraints (CLF, CBF) and safe set -y + (2x+1)^2 + 1 >= 0.
ControlProblem make_example_2();

struct ControlOutput {
  Vec u;
  int iterations = 0;
};

/// State feedback. May throw InfeasibleError when x is outside the feasible set.
using Controller = std::function<ControlOutput(const Vec& x)>;

enum class HoldMode { Continuous, SampleAndHold };

enum class Termination { Completed, ReachedOrigin, ControllerFailed, LeftPolytope, NonFinite };

std::string_view to_string(Termination t);

struct SimOptions {
  double horizon = 20.0;
  double dt = 1e-2;
  HoldMode mode = HoldMode::Continuous;
  /// Halt once |x| drops below this; 0 disables.
  double origin_tol = 1e-6;
};

/// Sampled closed-loop run. Row k holds the state at times[k] and the input
/// the controller returns there.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;
  std::vector<Vec> margins;
  std::vector<double> lyapunov;
  std::vector<double> min_barrier;
  std::vector<int> solver_iters;
  std::vector<double> solver_ms;
  /// du/dt at each row; interconnection runs only.
  std::vector<Vec> input_rates;
  Termination termination = Termination::Completed;
  std::string diagnostic;

  std::size_t size() const { return times.size(); }
};

/// Fixed-step RK4. In Continuous mode the controller runs at every stage; in
/// SampleAndHold the input is frozen over each dt.
Trajectory simulate(const ControlProblem& problem, const Controller& controller, const Vec& x0,
                    const SimOptions& opts = {});

/// Jointly integrates dx/dt = f + g u and du/dt = -tau grad_u J(x, u).
///
/// x advances with RK4 over substeps during which u is held; u advances with
/// a linearly implicit Euler step, which stays stable for large tau. The
/// substep shrinks until u remains strictly inside the polytope.
Trajectory simulate_interconnection(const ControlProblem& problem, double tau, const Vec& x0,
                                    const Vec& u0, const SimOptions& opts = {});

struct Metrics {
  std::vector<double> min_barrier;
  std::vector<double> lyapunov;
  int violations = 0;          // samples with min_i h_i < 0
  double final_norm = 0.0;
  int lyapunov_increases = 0;  // steps where V grows by more than 1e-9
  double min_barrier_min = 0.0;
  double lyapunov_final = 0.0;
};

/// Throws ContractError on an empty trajectory.
Metrics metrics(const Trajectory& traj, const ControlProblem& problem);

/// Sup over shared rows of |x_a(t) - x_b(t)|.
double sup_state_distance(const Trajectory& a, const Trajectory& b);

/// Header `t,x_0..,u_0..,margin_0..,V,min_h,solver_iters,solver_ms`, one row per sample.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

/// Reads back a file produced by write_trajectory_csv for known dimensions.
Trajectory read_trajectory_csv(std::istream& in, int state_dim, int input_dim,
                               int num_constraints);

}  // namespace unisafe::sim
