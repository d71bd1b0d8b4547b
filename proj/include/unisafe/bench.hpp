#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "unisafe/sim.hpp"

namespace unisafe::bench {

struct NamedController {
  std::string name;
  sim::Controller controller;
};

struct BenchRow {
  std::string name;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double median_ms = 0.0;
  double mean_iterations = 0.0;
  int safety_violations = 0;  // along the controller's own closed-loop run
  double final_norm = 0.0;
  std::string termination;
};

struct BenchOptions {
  int warmup_calls = 10;
  sim::SimOptions closed_loop{20.0, 1e-2, sim::HoldMode::Continuous, 1e-6};
};

/// Every controller is timed per call on the same `states` (paired
/// comparison, warm-up calls discarded) and then run in closed loop from x0.
std::vector<BenchRow> run_bench(const sim::ControlProblem& problem,
                                const std::vector<NamedController>& controllers,
                                const std::vector<Vec>& states, const Vec& x0,
                                const BenchOptions& opts = {});

/// States visited by a sample-and-hold run of `reference`, thinned to at most `count`.
std::vector<Vec> state_sequence(const sim::ControlProblem& problem,
                                const sim::Controller& reference, const Vec& x0, int count,
                                const sim::SimOptions& opts = {20.0, 1e-2,
                                                               sim::HoldMode::SampleAndHold,
                                                               1e-6});

void write_report_csv(std::ostream& out, const std::vector<BenchRow>& rows);
void print_report_table(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace unisafe::bench
