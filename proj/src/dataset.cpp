#include "unisafe/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "unisafe/csv.hpp"
#include "unisafe/errors.hpp"
#include "unisafe/parallel.hpp"
#include "unisafe/random.hpp"
#include "unisafe/solver.hpp"

namespace unisafe::nn {

namespace {

constexpr int kMaxDrawsPerRow = 100000;
constexpr int kProbeSize = 200;

ScaledParams draw(Rng& rng, int n_constraints, int input_dim) {
  Vec a(n_constraints);
  Mat b(n_constraints, input_dim);
  for (int i = 0; i < n_constraints; ++i) a(i) = uniform(rng, -1.0, 1.0);
  for (int i = 0; i < n_constraints; ++i) b.row(i) = uniform_in_ball(rng, input_dim).transpose();
  const double r = uniform01(rng);
  return ScaledParams(ConstraintParams(std::move(a), std::move(b)), r);
}

bool strictly_feasible(const ScaledParams& q) {
  return find_interior_point(q.base).status == FeasibilityStatus::Feasible;
}

}  // namespace

ScaledParams sample_scaled_params(std::uint64_t stream_seed, int n_constraints, int input_dim) {
  Rng rng(stream_seed);
  return draw(rng, n_constraints, input_dim);
}

Dataset sample_dataset(int n_constraints, int input_dim, int count, std::uint64_t seed,
                       const DatasetOptions& opts) {
  if (n_constraints < 1 || input_dim < 1 || count < 1) {
    throw ContractError("sample_dataset: N, m and count must be >= 1");
  }
  if (!(opts.label_tol > 0.0)) throw ContractError("sample_dataset: label_tol must be > 0");

  Rng probe(derive_seed(seed, ~std::uint64_t{0}));
  int accepted = 0;
  for (int i = 0; i < kProbeSize; ++i) accepted += strictly_feasible(draw(probe, n_constraints, input_dim));
  if (accepted * 100 < kProbeSize) {
    throw NumericError("sample_dataset: only " + std::to_string(accepted) + " of " +
                       std::to_string(kProbeSize) + " probe draws are feasible for N = " +
                       std::to_string(n_constraints) + ", m = " + std::to_string(input_dim));
  }

  const int width = n_constraints * (input_dim + 1) + 1;
  Dataset data;
  data.n_constraints = n_constraints;
  data.input_dim = input_dim;
  data.seed = seed;
  data.label_tol = opts.label_tol;
  data.inputs.resize(count, width);
  data.labels.resize(count, input_dim);

  FlowOptions flow;
  flow.tol = opts.label_tol;
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t row) {
    Rng rng(derive_seed(seed, row));
    for (int attempt = 0; attempt < kMaxDrawsPerRow; ++attempt) {
      const ScaledParams q = draw(rng, n_constraints, input_dim);
      if (!strictly_feasible(q)) continue;
      SolveResult newton;
      try {
        newton = solve_exact(q);
      } catch (const InfeasibleError&) {
        continue;
      }
      if (newton.status != SolveStatus::Converged) continue;
      Vec label = newton.k_star;
      try {
        const SolveResult f = solve_gradient_flow(q, flow);
        if (f.status == SolveStatus::Converged &&
            (f.k_star - newton.k_star).norm() <= opts.cross_check_tol) {
          label = f.k_star;
        }
      } catch (const InfeasibleError&) {
      }
      data.inputs.row(static_cast<Eigen::Index>(row)) = flatten(q).transpose();
      data.labels.row(static_cast<Eigen::Index>(row)) = label.transpose();
      return;
    }
    throw NumericError("sample_dataset: no feasible draw for row " + std::to_string(row));
  });
  return data;
}

Dataset sample_state_dataset(const sim::ControlProblem& problem, int count, std::uint64_t seed,
                             double box, const DatasetOptions& opts) {
  if (count < 1 || !(box > 0.0)) throw ContractError("sample_state_dataset: count >= 1, box > 0");
  const int n = problem.num_constraints;
  const int m = problem.system.input_dim;
  Dataset data;
  data.n_constraints = n;
  data.input_dim = m;
  data.seed = seed;
  data.label_tol = opts.label_tol;
  data.inputs.resize(count, n * (m + 1) + 1);
  data.labels.resize(count, m);

  SolverOptions solver;
  solver.grad_tol = std::min(solver.grad_tol, opts.label_tol);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t row) {
    Rng rng(derive_seed(seed, row));
    for (int attempt = 0; attempt < kMaxDrawsPerRow; ++attempt) {
      Vec x(problem.system.state_dim);
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = uniform(rng, -box, box);
      if (!(problem.min_barrier(x) > 0.0)) continue;
      const ScaledParams q = scale_params(problem.constraints_at(x)).first;
      if (!strictly_feasible(q)) continue;
      SolveResult r;
      try {
        r = solve_exact(q, solver);
      } catch (const InfeasibleError&) {
        continue;
      }
      if (r.status != SolveStatus::Converged) continue;
      data.inputs.row(static_cast<Eigen::Index>(row)) = flatten(q).transpose();
      data.labels.row(static_cast<Eigen::Index>(row)) = r.k_star.transpose();
      return;
    }
    throw NumericError("sample_state_dataset: no admissible state for row " + std::to_string(row));
  });
  return data;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double validation_fraction,
                                          std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ContractError("split_dataset: fraction must be in [0, 1)");
  }
  const int n = data.count();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5B11));
  for (int i = n - 1; i > 0; --i) {
    const int j = std::min(i, static_cast<int>(uniform01(rng) * (i + 1)));
    std::swap(order[i], order[j]);
  }
  const int n_val = static_cast<int>(std::floor(validation_fraction * n));
  auto take = [&](int begin, int end) {
    Dataset d = data;
    d.inputs.resize(end - begin, data.inputs.cols());
    d.labels.resize(end - begin, data.labels.cols());
    for (int i = begin; i < end; ++i) {
      d.inputs.row(i - begin) = data.inputs.row(order[i]);
      d.labels.row(i - begin) = data.labels.row(order[i]);
    }
    return d;
  };
  return {take(n_val, n), take(0, n_val)};
}

namespace {

std::string dataset_header(int width, int m) {
  std::string h;
  for (int i = 0; i < width; ++i) h += (i ? ",q_" : "q_") + std::to_string(i);
  for (int i = 0; i < m; ++i) h += ",k_" + std::to_string(i);
  return h;
}

}  // namespace

void write_dataset(const Dataset& data, const std::string& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw FileError("cannot write dataset " + csv_path);
  const int width = static_cast<int>(data.inputs.cols());
  const int m = static_cast<int>(data.labels.cols());
  out << dataset_header(width, m) << '\n';
  for (int r = 0; r < data.count(); ++r) {
    for (int c = 0; c < width; ++c) out << (c ? "," : "") << csv::format_double(data.inputs(r, c));
    for (int c = 0; c < m; ++c) out << ',' << csv::format_double(data.labels(r, c));
    out << '\n';
  }
  nlohmann::json meta{{"N", data.n_constraints}, {"m", data.input_dim},
                      {"seed", data.seed},        {"count", data.count()},
                      {"label_tol", data.label_tol}};
  std::ofstream side(csv_path + ".meta.json", std::ios::binary);
  if (!side) throw FileError("cannot write dataset metadata for " + csv_path);
  side << meta.dump(2) << '\n';
}

Dataset read_dataset(const std::string& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw FileError("cannot open dataset " + csv_path);
  csv::Reader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError("dataset: empty file", 0);

  int width = 0, m = 0;
  for (std::string_view f : csv::split(line)) {
    if (f.rfind("q_", 0) == 0 && m == 0 && f == "q_" + std::to_string(width)) {
      ++width;
    } else if (f == "k_" + std::to_string(m)) {
      ++m;
    } else {
      throw SchemaError("dataset: unexpected header field '" + std::string(f) + "'");
    }
  }
  if (m < 1 || (width - 1) % (m + 1) != 0 || width < m + 2) {
    throw SchemaError("dataset: header widths do not match N(m+1)+1 inputs");
  }
  Dataset data;
  data.input_dim = m;
  data.n_constraints = (width - 1) / (m + 1);

  const std::string meta_path = csv_path + ".meta.json";
  int expected_count = -1;
  if (std::filesystem::exists(meta_path)) {
    std::ifstream side(meta_path, std::ios::binary);
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(side);
      if (meta.at("N").get<int>() != data.n_constraints || meta.at("m").get<int>() != m) {
        throw SchemaError("dataset: metadata N/m disagree with the CSV header");
      }
      data.seed = meta.at("seed").get<std::uint64_t>();
      data.label_tol = meta.at("label_tol").get<double>();
      expected_count = meta.at("count").get<int>();
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("dataset metadata: ") + e.what(), e.byte);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("dataset metadata: ") + e.what());
    }
  }

  std::vector<std::vector<double>> rows;
  while (reader.next(line)) {
    if (line.empty()) continue;
    rows.push_back(csv::parse_row(line, static_cast<std::size_t>(width + m), reader.line_offset()));
  }
  if (expected_count >= 0 && expected_count != static_cast<int>(rows.size())) {
    throw SchemaError("dataset: metadata count " + std::to_string(expected_count) + " but " +
                      std::to_string(rows.size()) + " rows");
  }
  data.inputs.resize(static_cast<Eigen::Index>(rows.size()), width);
  data.labels.resize(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < width; ++c) data.inputs(r, c) = rows[r][c];
    for (int c = 0; c < m; ++c) data.labels(r, c) = rows[r][width + c];
  }
  return data;
}

}  // namespace unisafe::nn
