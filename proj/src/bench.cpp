#include "unisafe/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "unisafe/csv.hpp"
#include "unisafe/errors.hpp"

namespace unisafe::bench {

namespace {

using Clock = std::chrono::steady_clock;

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

}  // namespace

std::vector<Vec> state_sequence(const sim::ControlProblem& problem,
                                const sim::Controller& reference, const Vec& x0, int count,
                                const sim::SimOptions& opts) {
  if (count < 1) throw ContractError("state_sequence: count must be >= 1");
  const sim::Trajectory traj = sim::simulate(problem, reference, x0, opts);
  if (traj.size() == 0) throw InfeasibleError("state_sequence: " + traj.diagnostic, 0.0);
  std::vector<Vec> out;
  const std::size_t n = traj.size();
  const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < take; ++i) out.push_back(traj.states[i * n / take]);
  return out;
}

std::vector<BenchRow> run_bench(const sim::ControlProblem& problem,
                                const std::vector<NamedController>& controllers,
                                const std::vector<Vec>& states, const Vec& x0,
                                const BenchOptions& opts) {
  if (states.empty()) throw ContractError("run_bench: empty state sequence");
  std::vector<BenchRow> rows;
  for (const auto& c : controllers) {
    BenchRow row;
    row.name = c.name;
    for (int i = 0; i < opts.warmup_calls; ++i) c.controller(states[i % states.size()]);
    std::vector<double> times;
    times.reserve(states.size());
    double iterations = 0.0;
    for (const Vec& x : states) {
      const auto start = Clock::now();
      const sim::ControlOutput out = c.controller(x);
      times.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
      iterations += out.iterations;
    }
    double sum = 0.0;
    for (double t : times) sum += t;
    row.mean_ms = sum / times.size();
    double var = 0.0;
    for (double t : times) var += (t - row.mean_ms) * (t - row.mean_ms);
    row.std_ms = times.size() > 1 ? std::sqrt(var / (times.size() - 1)) : 0.0;
    row.median_ms = median_of(times);
    row.mean_iterations = iterations / times.size();

    const sim::Trajectory traj = sim::simulate(problem, c.controller, x0, opts.closed_loop);
    row.termination = std::string(sim::to_string(traj.termination));
    if (traj.size() > 0) {
      const sim::Metrics m = sim::metrics(traj, problem);
      row.safety_violations = m.violations;
      row.final_norm = m.final_norm;
    } else {
      row.final_norm = x0.norm();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_report_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "controller,mean_ms,std_ms,median_ms,mean_iterations,safety_violations,final_norm,"
         "termination\n";
  for (const auto& r : rows) {
    out << r.name << ',' << csv::format_double(r.mean_ms) << ',' << csv::format_double(r.std_ms)
        << ',' << csv::format_double(r.median_ms) << ',' << csv::format_double(r.mean_iterations)
        << ',' << r.safety_violations << ',' << csv::format_double(r.final_norm) << ','
        << r.termination << '\n';
  }
}

void print_report_table(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << std::left << std::setw(16) << "controller" << std::right << std::setw(22)
      << "time ms (mean +- sd)" << std::setw(12) << "median ms" << std::setw(10) << "iters"
      << std::setw(12) << "violations" << std::setw(14) << "final |x|" << '\n';
  for (const auto& r : rows) {
    std::ostringstream t;
    t << std::setprecision(3) << r.mean_ms << " +- " << r.std_ms;
    out << std::left << std::setw(16) << r.name << std::right << std::setw(22) << t.str()
        << std::setw(12) << std::setprecision(3) << r.median_ms << std::setw(10)
        << std::setprecision(3) << r.mean_iterations << std::setw(12) << r.safety_violations
        << std::setw(14) << std::setprecision(3) << r.final_norm << '\n';
  }
  out << "Absolute times depend on hardware; compare rows only within one run.\n";
}

}  // namespace unisafe::bench
