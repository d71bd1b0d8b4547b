#pragma once

#include <cstdint>
#include <string>

#include "unisafe/params.hpp"
#include "unisafe/sim.hpp"

namespace unisafe::nn {

/// Rows of (flattened q, minimizer label). Inputs are count x N(m+1)+1,
/// labels count x m.
struct Dataset {
  int n_constraints = 0;
  int input_dim = 0;
  std::uint64_t seed = 0;
  double label_tol = 1e-6;
  Mat inputs;
  Mat labels;

  int count() const { return static_cast<int>(inputs.rows()); }
};

struct DatasetOptions {
  double label_tol = 1e-6;
  /// Largest tolerated gap between the flow label and the Newton minimizer.
  double cross_check_tol = 1e-4;
};

/// Rejection-samples q uniformly from [-1,1]^N x (unit ball)^N x [0,1],
/// keeping strictly feasible, non-degenerate draws, and labels each with the
/// gradient flow. Flow labels that fail or disagree with Newton are replaced
/// by the Newton minimizer. Row i uses its own stream derived from (seed, i),
/// so the output does not depend on the thread count.
///
/// Throws NumericError when fewer than 1% of a probe batch is feasible.
Dataset sample_dataset(int n_constraints, int input_dim, int count, std::uint64_t seed,
                       const DatasetOptions& opts = {});

/// Task-specific rows for fine-tuning: states drawn uniformly from
/// [-box, box]^n, kept when every barrier is positive and the constraints at
/// the state are strictly feasible, labelled with the exact minimizer of the
/// scaled constraints at that state.
Dataset sample_state_dataset(const sim::ControlProblem& problem, int count, std::uint64_t seed,
                             double box = 3.0, const DatasetOptions& opts = {});

/// Draws one q uniformly from the box; not necessarily feasible.
ScaledParams sample_scaled_params(std::uint64_t stream_seed, int n_constraints, int input_dim);

/// Shuffled split by seed; `validation_fraction` of rows go to the second set.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double validation_fraction,
                                          std::uint64_t seed);

/// CSV with header q_0..q_{d-1},k_0..k_{m-1} plus `<path>.meta.json`.
void write_dataset(const Dataset& data, const std::string& csv_path);

/// Throws FileError, ParseError or SchemaError.
Dataset read_dataset(const std::string& csv_path);

}  // namespace unisafe::nn
