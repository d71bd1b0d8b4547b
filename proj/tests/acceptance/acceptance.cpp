// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/oracles.hpp"
#include "unisafe/bench.hpp"
#include "unisafe/controllers.hpp"
#include "unisafe/dataset.hpp"
#include "unisafe/errors.hpp"
#include "unisafe/mlp.hpp"
#include "unisafe/nn_control.hpp"
#include "unisafe/objective.hpp"
#include "unisafe/qp.hpp"
#include "unisafe/sim.hpp"
#include "unisafe/solver.hpp"

using namespace unisafe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <class... T>
std::string cat(const T&... parts) {
  std::ostringstream s;
  s.precision(4);
  (s << ... << parts);
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Bookkeeping for criterion 4, fed by every exact solve below.
struct Audit {
  long converged = 0;
  long nonnegative_margin = 0;
  long samples = 0;  // closed-loop rows of the exact controller
  long sample_violations = 0;
  int exceptions = 0;

  void solve(const ConstraintParams& p, const SolveResult& r) {
    if (r.status != SolveStatus::Converged) return;
    ++converged;
    if (!(max_margin(p, r.k_star) < 0.0)) ++nonnegative_margin;
  }
  void solve(const ScaledParams& q, const SolveResult& r) { solve(q.base, r); }
  void trajectory(const sim::Trajectory& t) {
    for (const Vec& m : t.margins) {
      ++samples;
      if (!(m.maxCoeff() < 0.0)) ++sample_violations;
    }
  }
} audit;

// Trained in criterion 11, reused by 12.
std::shared_ptr<nn::MlpModel> trained;

Outcome sontag_equivalence() {
  Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    double a = uniform(rng, -10, 10), b = uniform(rng, -10, 10);
    if (b == 0.0 && a >= 0.0) a = -a - 1.0;
    const ConstraintParams p((Vec(1) << a).finished(), (Mat(1, 1) << b).finished());
    const SolveResult r = solve_exact(p);
    audit.solve(p, r);
    worst = std::max(worst, std::abs(r.k_star(0) - oracle::sontag(a, b)));
  }
  return {worst <= 1e-6, cat("max |k - closed form| = ", worst)};
}

Outcome strict_convexity() {
  const int sizes[] = {1, 2, 5, 10};
  Rng rng(202);
  double min_eig = INFINITY, worst_rel = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = sizes[t % 4], m = sizes[(t / 4) % 4];
    const auto inst = oracle::random_instance(rng, n, m);
    const ConstraintParams p(inst.a, inst.b);
    const Mat h = hess_J(p, inst.interior);
    const Mat fd = oracle::fd_hessian(
        [&](const Vec& k) { return oracle::barrier_sum(inst.a, inst.b, 1.0, k); }, inst.interior,
        1e-4);
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat>(h).eigenvalues().minCoeff());
    worst_rel = std::max(worst_rel, (h - fd).norm() / h.norm());
  }
  return {min_eig > 0.0 && worst_rel <= 1e-4,
          cat("min eigenvalue ", min_eig, ", max relative FD gap ", worst_rel)};
}

Outcome scaling() {
  Rng rng(303);
  double worst_obj = 0.0, worst_k = 0.0;
  int max_iter = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + t % 4, m = 1 + (t / 4) % 3;
    const double spread = std::exp(uniform(rng, std::log(0.2), std::log(30.0)));
    const auto inst = oracle::random_instance(rng, n, m, spread);
    const ConstraintParams p(inst.a, inst.b);
    const auto [q, scale] = scale_params(p);
    // J_p(k) = M J~_q(k)
    const double j_p = oracle::barrier_sum(inst.a, inst.b, 1.0, inst.interior);
    worst_obj = std::max(worst_obj, std::abs(scale * eval_J_scaled(q, inst.interior) - j_p) /
                                        std::abs(j_p));
    const SolveResult rp = solve_exact(p), rq = solve_exact(q);
    audit.solve(p, rp);
    audit.solve(q, rq);
    if (rp.status == SolveStatus::MaxIter) ++max_iter;
    if (rq.status != SolveStatus::Converged || rp.status == SolveStatus::Degenerate) {
      worst_k = INFINITY;
      continue;
    }
    worst_k = std::max(worst_k, (rp.k_star - rq.k_star).norm());
  }
  return {worst_obj <= 1e-12 && worst_k <= 1e-8,
          cat("objective rel gap ", worst_obj, ", max |k*(p) - k*(q)| ", worst_k, " (",
              max_iter, " unscaled solves stopped at the roundoff floor)")};
}

Outcome analytic_point() {
  const ConstraintParams p((Vec(2) << -1, -1).finished(), (Mat(2, 1) << 1, -1).finished());
  const SolveResult r = solve_exact(p);
  audit.solve(p, r);
  const double j = oracle::barrier_sum(p.a(), p.b(), 1.0, r.k_star);
  // Taylor at 0: J(k) = 1 + 2k^2 + O(k^4), so J'' = 4
  const double h = hess_J(p, Vec::Zero(1))(0, 0);
  const bool ok = r.status == SolveStatus::Converged && std::abs(r.k_star(0)) <= 1e-10 &&
                  std::abs(j - 1.0) <= 1e-10 && std::abs(h - 4.0) <= 1e-8;
  return {ok, cat("k* = ", r.k_star(0), ", J = ", j, ", hessian ", h)};
}

Outcome qp_oracle() {
  Rng rng(404);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const int n = 1 + t % 3, m = 1 + (t / 3) % 2;
    const auto inst = oracle::random_instance(rng, n, m, 2.0);
    const ConstraintParams p(inst.a, inst.b);
    Vec v(m);
    for (int j = 0; j < m; ++j) v(j) = uniform(rng, -3, 3);
    const double margin = t % 2 ? 0.0 : 1e-3;
    const Vec expect = oracle::enumerate_projection(inst.a, inst.b, v, margin);
    const Vec got = qp::solve_projection(p, v, margin).u;
    worst = std::max(worst, (got - expect).norm());
  }
  return {worst <= 1e-9, cat("max |active set - enumeration| = ", worst)};
}

sim::Controller audited_ustar(const sim::ControlProblem& problem) {
  return [problem](const Vec& x) {
    const ConstraintParams p = problem.constraints_at(x);
    const SolveResult r = solve_exact(p);
    audit.solve(p, r);
    return sim::ControlOutput{r.k_star, r.iterations};
  };
}

Outcome planar_closed_loop() {
  const sim::ControlProblem ex = sim::make_example_1();
  // three unit discs
  const double centers[3][2] = {{0.0, 2.5}, {-2.0, -2.0}, {2.0, -2.0}};
  const double starts[4][2] = {{-5.5, 0.0}, {5.5, 0.0}, {0.0, -5.0}, {-2.0, -6.0}};
  bool ok = true;
  double worst_norm = 0.0;
  int violations = 0;
  for (const auto& s : starts) {
    for (const auto& c : centers) {
      ok = ok && std::hypot(s[0] - c[0], s[1] - c[1]) - 1.0 >= 2.0;
    }
    const Vec x0 = (Vec(2) << s[0], s[1]).finished();
    const sim::SimOptions opts{20.0, 1e-2, sim::HoldMode::Continuous, 1e-6};
    const sim::Trajectory exact = sim::simulate(ex, audited_ustar(ex), x0, opts);
    audit.trajectory(exact);
    const sim::Metrics me = sim::metrics(exact, ex);
    const sim::Metrics mq = sim::metrics(sim::simulate(ex, sim::make_qp_controller(ex), x0, opts), ex);
    violations += me.violations + mq.violations;
    worst_norm = std::max(worst_norm, me.final_norm);
    ok = ok && exact.termination != sim::Termination::ControllerFailed;
  }
  ok = ok && violations == 0 && worst_norm <= 1e-2;
  return {ok, cat("violations ", violations, ", max |x(T)| ", worst_norm)};
}

Outcome ten_d_closed_loop() {
  sim::Example1Config cfg;
  cfg.dimension = sim::Example1Dim::TenD;
  const sim::ControlProblem ex = sim::make_example_1(cfg);
  double min_h = INFINITY;
  int increases = 0;
  bool ok = true;
  for (int s = 0; s < 3; ++s) {
    Rng rng(derive_seed(99, s));
    Vec x0(10);
    do {
      for (int i = 0; i < 10; ++i) x0(i) = uniform(rng, -3, 3);
    } while (!(ex.min_barrier(x0) > 0.5));
    const sim::Trajectory t = sim::simulate(ex, audited_ustar(ex), x0);
    audit.trajectory(t);
    const sim::Metrics m = sim::metrics(t, ex);
    min_h = std::min(min_h, m.min_barrier_min);
    increases += m.lyapunov_increases;
    ok = ok && (t.termination == sim::Termination::Completed ||
                t.termination == sim::Termination::ReachedOrigin);
  }
  ok = ok && min_h >= -1e-6 && increases == 0;
  return {ok, cat("min barrier ", min_h, ", V increases ", increases)};
}

Outcome unicycle() {
  const sim::ControlProblem ex = sim::make_example_2();
  const double pi = std::acos(-1.0);
  const double starts[4][2] = {{2.0, 1.0}, {-1.0, 1.0}, {1.5, -1.0}, {0.5, 2.0}};
  double min_h = INFINITY, worst = 0.0;
  bool ok = true;
  for (const auto& s : starts) {
    const Vec x0 = (Vec(3) << s[0], s[1], pi + 0.1).finished();
    const sim::Trajectory t =
        sim::simulate(ex, audited_ustar(ex), x0, {30.0, 1e-2, sim::HoldMode::Continuous, 1e-6});
    audit.trajectory(t);
    min_h = std::min(min_h, sim::metrics(t, ex).min_barrier_min);
    worst = std::max(worst, t.states.back().head(2).norm());
    ok = ok && t.termination != sim::Termination::ControllerFailed;
  }
  ok = ok && min_h >= -1e-6 && worst <= 5e-2;
  return {ok, cat("min h ", min_h, ", max |(x, y)| at the end ", worst)};
}

Outcome interconnection() {
  const sim::ControlProblem ex = sim::make_example_1();
  const Vec x0 = (Vec(2) << 0.0, -3.0).finished();
  const sim::SimOptions opts{5.0, 1e-2, sim::HoldMode::Continuous, 1e-6};
  const sim::Trajectory ref = sim::simulate(ex, audited_ustar(ex), x0, opts);
  const Vec u0 = sim::solve_at_state(ex, x0).k_star;
  std::vector<double> dist;
  for (double tau : {1e2, 1e3, 1e4}) {
    dist.push_back(sim::sup_state_distance(ref, sim::simulate_interconnection(ex, tau, x0, u0, opts)));
  }
  const bool ok = dist[1] < dist[0] && dist[2] < dist[1] && dist[2] <= 0.05;
  return {ok, cat("sup distance ", dist[0], ", ", dist[1], ", ", dist[2])};
}

Outcome nn_pipeline() {
  const nn::Dataset data = nn::sample_dataset(2, 2, 5000, 11);
  const auto [train_set, val_set] = nn::split_dataset(data, 0.1, 0);
  trained = std::make_shared<nn::MlpModel>(nn::MlpModel::default_for(2, 2, 0));
  nn::TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 64;
  const Mat xt = train_set.inputs.transpose(), yt = train_set.labels.transpose();
  const Mat xv = val_set.inputs.transpose(), yv = val_set.labels.transpose();
  const nn::TrainHistory h = nn::train(*trained, xt, yt, cfg, &xv, &yv);
  const double ratio = h.validation_loss.front() / h.validation_loss.back();

  Mat pred = trained->forward_batch(xv);
  int satisfied = 0;
  for (int i = 0; i < val_set.count(); ++i) {
    const ConstraintParams q = unflatten(xv.col(i), 2, 2).first;
    const Vec hard = qp::solve_projection(q, pred.col(i), 0.0).u;
    if (max_margin(q, hard) <= 1e-9) ++satisfied;
  }
  const double rate = static_cast<double>(satisfied) / val_set.count();

  // backprop against central differences on a small residual model
  Rng rng(505);
  nn::MlpModel small(2, 2, {6, 6}, {false, true}, 3);
  Mat xs(7, 8), ys(2, 8);
  for (int i = 0; i < xs.size(); ++i) xs(i) = uniform(rng, -1, 1);
  for (int i = 0; i < ys.size(); ++i) ys(i) = uniform(rng, -1, 1);
  nn::Gradients g;
  nn::mse_loss_and_gradient(small, xs, ys, &g);
  double worst = 0.0;
  for (std::size_t l = 0; l < small.layers().size(); ++l) {
    auto probe = [&](double* slot, double analytic) {
      const double keep = *slot;
      *slot = keep + 1e-6;
      const double up = nn::mse(small, xs, ys);
      *slot = keep - 1e-6;
      const double down = nn::mse(small, xs, ys);
      *slot = keep;
      const double fd = (up - down) / 2e-6;
      worst = std::max(worst, std::abs(fd - analytic) / std::max(1.0, std::abs(fd)));
    };
    Mat& w = small.layers()[l].weight;
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) probe(&w(r, c), g.weight[l](r, c));
      probe(&small.layers()[l].bias(r), g.bias[l](r));
    }
  }
  const bool ok = ratio >= 10.0 && rate == 1.0 && worst <= 1e-5;
  return {ok, cat("validation MSE epoch 1 ", h.validation_loss.front(), " -> ",
                  h.validation_loss.back(), " (ratio ", ratio, "), hard satisfaction ", rate,
                  ", backprop FD gap ", worst)};
}

Outcome warmstart_benefit() {
  if (!trained) return {false, "no trained model"};
  Rng rng(606);
  std::vector<double> cold, warm;
  for (int t = 0; t < 500; ++t) {
    const double spread = std::exp(uniform(rng, std::log(0.3), std::log(3.0)));
    const auto inst = oracle::random_instance(rng, 2, 2, spread);
    const ConstraintParams p(inst.a, inst.b);
    const SolveResult c = solve_exact(p);
    const SolveResult w = nn::warmstart_solve(*trained, p);
    audit.solve(p, c);
    audit.solve(p, w);
    cold.push_back(c.iterations);
    warm.push_back(w.iterations);
  }

  const sim::ControlProblem ex = sim::make_example_1();
  const Vec x0 = (Vec(2) << 0.0, -5.0).finished();
  const auto states = bench::state_sequence(ex, sim::make_ustar_controller(ex), x0, 200);
  const std::vector<bench::NamedController> named{
      {"ustar", sim::make_ustar_controller(ex)},
      {"nn", nn::make_nn_controller(trained, ex, false)}};
  const auto rows = bench::run_bench(ex, named, states, x0);
  const double exact_ms = rows[0].median_ms, nn_ms = rows[1].median_ms;

  const bool ok = median(warm) <= median(cold) && nn_ms < exact_ms;
  return {ok, cat("median iterations warm ", median(warm), " vs cold ", median(cold),
                  "; median ms nn ", nn_ms, " vs exact ", exact_ms)};
}

Outcome flow_vs_newton() {
  double worst = 0.0;
  int used = 0, unfinished = 0;
  FlowOptions fo;
  fo.tol = 1e-6;
  for (std::uint64_t s = 0; used < 500 && s < 100000; ++s) {
    const ScaledParams q = nn::sample_scaled_params(derive_seed(707, s), 2, 2);
    if (find_interior_point(q.base).status != FeasibilityStatus::Feasible) continue;
    if (q.r == 0.0 && !rows_span_input_space(q.base.b())) continue;
    ++used;
    const SolveResult newton = solve_exact(q);
    const SolveResult flow = solve_gradient_flow(q, fo);
    audit.solve(q, newton);
    audit.solve(q, flow);
    if (flow.status != SolveStatus::Converged) ++unfinished;
    worst = std::max(worst, (flow.k_star - newton.k_star).norm());
  }
  return {used == 500 && worst <= 1e-4, cat(used, " instances, max |k_flow - k_newton| ", worst,
                                             ", ", unfinished, " flows out of steps")};
}

Outcome strict_satisfaction() {
  // extra sweep on top of every solve made by the other criteria
  Rng rng(808);
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + t % 10, m = 1 + (t / 10) % 10;
    const auto inst = oracle::random_instance(rng, n, m, uniform(rng, 0.1, 10.0));
    const ConstraintParams p(inst.a, inst.b);
    audit.solve(p, solve_exact(p));
  }
  const bool ok = audit.nonnegative_margin == 0 && audit.sample_violations == 0 &&
                  audit.exceptions == 0;
  return {ok, cat(audit.converged, " converged solves, ", audit.nonnegative_margin,
                  " with a margin >= 0; ", audit.samples, " closed-loop samples, ",
                  audit.sample_violations, " violating; ", audit.exceptions, " exceptions")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 for none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "closed form in one dimension", 5.0, sontag_equivalence},
      {2, "strict convexity", 30.0, strict_convexity},
      {3, "scaling", 0.0, scaling},
      {5, "symmetric fixed point", 0.0, analytic_point},
      {6, "projection QP vs enumeration", 0.0, qp_oracle},
      {7, "planar closed loop", 60.0, planar_closed_loop},
      {8, "ten-dimensional closed loop", 0.0, ten_d_closed_loop},
      {9, "unicycle", 0.0, unicycle},
      {10, "input dynamics", 0.0, interconnection},
      {11, "network pipeline", 0.0, nn_pipeline},
      {12, "warmstart", 0.0, warmstart_benefit},
      {13, "gradient flow vs Newton", 0.0, flow_vs_newton},
      {4, "strict constraint satisfaction", 0.0, strict_satisfaction},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      ++audit.exceptions;
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += cat("; over the ", c.budget_s, " s budget");
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2d %-32s %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
