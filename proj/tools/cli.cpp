#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "unisafe/bench.hpp"
#include "unisafe/controllers.hpp"
#include "unisafe/csv.hpp"
#include "unisafe/dataset.hpp"
#include "unisafe/errors.hpp"
#include "unisafe/mlp.hpp"
#include "unisafe/nn_control.hpp"
#include "unisafe/qp.hpp"
#include "unisafe/random.hpp"
#include "unisafe/sim.hpp"
#include "unisafe/solver.hpp"

namespace unisafe::cli {

namespace {

using nlohmann::json;

/// Bad flag combinations or values; mapped to the usage exit code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) {
      throw UsageError("not a number: '" + item + "'");
    }
    out.push_back(value);
  }
  if (out.empty()) throw UsageError("empty numeric list");
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ConstraintParams params_from_lists(const std::vector<double>& a,
                                   const std::vector<std::string>& b_rows) {
  if (a.size() != b_rows.size()) {
    throw UsageError("--A has " + std::to_string(a.size()) + " entries but --B has " +
                     std::to_string(b_rows.size()) + " rows");
  }
  std::vector<std::vector<double>> rows;
  for (const auto& r : b_rows) rows.push_back(parse_numbers(r));
  const std::size_t m = rows.front().size();
  Mat b(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m) throw UsageError("--B rows have different lengths");
    for (std::size_t j = 0; j < m; ++j) b(i, j) = rows[i][j];
  }
  return ConstraintParams(to_vec(a), b);
}

/// {"A": [...], "B": [[...], ...]} given inline or as a file path.
ConstraintParams params_from_json(const std::string& arg) {
  const std::string text = (!arg.empty() && arg.front() == '{') ? arg : read_file(arg);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("problem JSON: ") + e.what(), e.byte);
  }
  try {
    const auto a = j.at("A").get<std::vector<double>>();
    const auto rows = j.at("B").get<std::vector<std::vector<double>>>();
    if (rows.empty() || a.size() != rows.size()) {
      throw SchemaError("problem JSON: A and B must have the same nonzero number of rows");
    }
    Mat b(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size()) throw SchemaError("problem JSON: ragged B");
      for (std::size_t c = 0; c < rows[i].size(); ++c) b(i, c) = rows[i][c];
    }
    return ConstraintParams(to_vec(a), b);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("problem JSON: ") + e.what());
  }
}

std::string describe_system(const ConstraintParams& p) {
  std::ostringstream s;
  for (int i = 0; i < p.num_constraints(); ++i) {
    s << (i ? "; " : "") << p.a()(i) << " + (" << p.b().row(i) << ") u < 0";
  }
  return s.str();
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::vector<double> a;
  std::vector<std::string> b;
  std::string problem;
  std::string method = "newton";
  std::string warmstart_model;
  double tol = 1e-10;
  double flow_tol = 1e-6;
};

ConstraintParams problem_from(const SolveArgs& args) {
  if (!args.problem.empty()) {
    if (!args.a.empty() || !args.b.empty()) throw UsageError("give either --problem or --A/--B");
    return params_from_json(args.problem);
  }
  if (args.a.empty() || args.b.empty()) throw UsageError("missing --A/--B or --problem");
  return params_from_lists(args.a, args.b);
}

int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err) {
  const ConstraintParams p = problem_from(args);
  SolveResult r;
  try {
    if (args.method == "sontag") {
      if (p.num_constraints() != 1 || p.input_dim() != 1) {
        throw UsageError("--method sontag needs one constraint and a scalar input");
      }
      const double a = p.a()(0), b = p.b()(0, 0);
      if (b == 0.0 && a >= 0.0) throw InfeasibleError("no input satisfies the constraint", a);
      r.k_star = Vec::Constant(1, closed_form_1d(a, b));
      r.objective = eval_J(p, r.k_star);
      r.grad_norm = grad_J(p, r.k_star).norm();
      r.status = SolveStatus::Converged;
    } else if (args.method == "newton") {
      SolverOptions opts;
      opts.grad_tol = args.tol;
      if (args.warmstart_model.empty()) {
        r = solve_exact(p, opts);
      } else {
        r = nn::warmstart_solve(nn::load_model(args.warmstart_model), p, opts);
      }
    } else if (args.method == "flow") {
      FlowOptions opts;
      opts.tol = args.flow_tol;
      r = solve_gradient_flow(p, opts);
    } else {
      throw UsageError("unknown method " + args.method);
    }
  } catch (const InfeasibleError& e) {
    err << "infeasible: no strict solution of " << describe_system(p) << " (" << e.what()
        << ")\n";
    return kInfeasible;
  }
  json j{{"k_star", to_vector(r.k_star)},
         {"objective", r.objective},
         {"grad_norm", r.grad_norm},
         {"iterations", r.iterations},
         {"status", std::string(to_string(r.status))},
         {"margins", to_vector(margins(p, r.k_star))}};
  out << j.dump(2) << '\n';
  return r.status == SolveStatus::Converged ? kOk : kInternal;
}

int cmd_feasible(const SolveArgs& args, std::ostream& out) {
  const ConstraintParams p = problem_from(args);
  const FeasibilityResult f = find_interior_point(p);
  json j{{"status", f.status == FeasibilityStatus::Feasible     ? "feasible"
                    : f.status == FeasibilityStatus::Infeasible ? "infeasible"
                                                                : "indeterminate"},
         {"best_margin", f.best_margin},
         {"point", to_vector(f.best_point)},
         {"iterations", f.iterations}};
  out << j.dump(2) << '\n';
  return f.status == FeasibilityStatus::Feasible ? kOk : kInfeasible;
}

// ---------------------------------------------------------------- nn pipeline

struct DatasetArgs {
  int n = 2, m = 2, count = 5000;
  std::uint64_t seed = 0;
  double label_tol = 1e-6;
  std::string out_path;
  std::string example;
  std::uint64_t obstacle_seed = 2024;
  double box = 3.0;
};

sim::ControlProblem make_problem(const std::string& example, std::uint64_t seed);

int cmd_dataset(const DatasetArgs& args, std::ostream& out) {
  nn::DatasetOptions opts;
  opts.label_tol = args.label_tol;
  const nn::Dataset d =
      args.example.empty()
          ? nn::sample_dataset(args.n, args.m, args.count, args.seed, opts)
          : nn::sample_state_dataset(make_problem(args.example, args.obstacle_seed), args.count,
                                     args.seed, args.box, opts);
  nn::write_dataset(d, args.out_path);
  out << json{{"path", args.out_path}, {"N", d.n_constraints}, {"m", d.input_dim},
              {"count", d.count()},    {"seed", args.seed}}
             .dump(2)
      << '\n';
  return kOk;
}

void check_model_matches(const nn::MlpModel& model, int n, int m, const std::string& what) {
  if (model.n_constraints() != n || model.output_dim() != m) {
    throw SchemaError("model is for N = " + std::to_string(model.n_constraints()) +
                      ", m = " + std::to_string(model.output_dim()) + " but " + what +
                      " has N = " + std::to_string(n) + ", m = " + std::to_string(m));
  }
}

struct TrainArgs {
  std::string data, out_path, init_model, history;
  nn::TrainConfig config;
  double val_fraction = 0.1;
  std::uint64_t split_seed = 0;
  std::uint64_t init_seed = 0;
};

int cmd_train(const TrainArgs& args, std::ostream& out) {
  const nn::Dataset data = nn::read_dataset(args.data);
  auto [train_set, val_set] = nn::split_dataset(data, args.val_fraction, args.split_seed);
  nn::MlpModel model = args.init_model.empty()
                           ? nn::MlpModel::default_for(data.n_constraints, data.input_dim,
                                                       args.init_seed)
                           : nn::load_model(args.init_model);
  check_model_matches(model, data.n_constraints, data.input_dim, "the dataset");

  const Mat xt = train_set.inputs.transpose(), yt = train_set.labels.transpose();
  const Mat xv = val_set.inputs.transpose(), yv = val_set.labels.transpose();
  const bool has_val = val_set.count() > 0;
  const nn::TrainHistory h = nn::train(model, xt, yt, args.config, has_val ? &xv : nullptr,
                                       has_val ? &yv : nullptr);
  nn::save_model(model, args.out_path);

  const std::string history_path =
      args.history.empty() ? args.out_path + ".history.csv" : args.history;
  std::ofstream hist(history_path, std::ios::binary);
  if (!hist) throw FileError("cannot write " + history_path);
  hist << "epoch,train_mse" << (has_val ? ",validation_mse" : "") << '\n';
  for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
    hist << e + 1 << ',' << csv::format_double(h.train_loss[e]);
    if (has_val) hist << ',' << csv::format_double(h.validation_loss[e]);
    hist << '\n';
  }
  json j{{"model", args.out_path},
         {"history", history_path},
         {"epochs", args.config.epochs},
         {"train_mse_final", h.train_loss.back()}};
  if (has_val) {
    j["validation_mse_first"] = h.validation_loss.front();
    j["validation_mse_final"] = h.validation_loss.back();
  }
  out << j.dump(2) << '\n';
  return kOk;
}

struct EvalArgs {
  std::string data, model;
  bool hard = false;
  double val_fraction = 0.1;
  std::uint64_t split_seed = 0;
  double satisfaction_tol = 1e-9;
};

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const nn::Dataset data = nn::read_dataset(args.data);
  const nn::MlpModel model = nn::load_model(args.model);
  check_model_matches(model, data.n_constraints, data.input_dim, "the dataset");
  const nn::Dataset eval_set = args.val_fraction > 0.0
                                   ? nn::split_dataset(data, args.val_fraction, args.split_seed).second
                                   : data;
  if (eval_set.count() == 0) throw UsageError("evaluation set is empty");

  Mat pred = model.forward_batch(eval_set.inputs.transpose());
  int satisfied = 0;
  for (int i = 0; i < eval_set.count(); ++i) {
    const ConstraintParams q =
        unflatten(eval_set.inputs.row(i).transpose(), data.n_constraints, data.input_dim).first;
    if (args.hard) pred.col(i) = qp::solve_projection(q, pred.col(i), 0.0).u;
    if (max_margin(q, pred.col(i)) <= args.satisfaction_tol) ++satisfied;
  }
  const Mat diff = pred - eval_set.labels.transpose();
  const double mse = diff.squaredNorm() / static_cast<double>(diff.size());
  out << json{{"mode", args.hard ? "hard" : "soft"},
              {"count", eval_set.count()},
              {"validation_mse", mse},
              {"constraint_satisfaction_rate",
               static_cast<double>(satisfied) / eval_set.count()}}
             .dump(2)
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------- simulation

struct SimArgs {
  std::string example = "1-2d";
  std::string controller = "ustar";
  std::vector<double> x0;
  std::optional<double> horizon;
  double dt = 1e-2;
  double tau = 1e3;
  std::string model;
  std::string out_path, metrics_path;
  std::string mode = "continuous";
  std::uint64_t seed = 2024;
  double origin_tol = 1e-6;
};

sim::ControlProblem make_problem(const std::string& example, std::uint64_t seed) {
  if (example == "1-2d") return sim::make_example_1();
  if (example == "1-10d") {
    sim::Example1Config c;
    c.dimension = sim::Example1Dim::TenD;
    c.seed = seed;
    return sim::make_example_1(c);
  }
  if (example == "2") return sim::make_example_2();
  throw UsageError("unknown example '" + example + "' (1-2d, 1-10d, 2)");
}

std::shared_ptr<const nn::MlpModel> require_model(const std::string& path,
                                                  const sim::ControlProblem& problem) {
  if (path.empty()) throw UsageError("this controller needs --model");
  auto model = std::make_shared<const nn::MlpModel>(nn::load_model(path));
  check_model_matches(*model, problem.num_constraints, problem.system.input_dim,
                      "example " + problem.name);
  return model;
}

sim::Controller make_named_controller(const std::string& name, const sim::ControlProblem& problem,
                                      const std::string& model_path) {
  if (name == "ustar") return sim::make_ustar_controller(problem);
  if (name == "ustar-prev") return sim::make_ustar_controller(problem, {}, true);
  if (name == "qp") return sim::make_qp_controller(problem);
  if (name == "qp-warm") return sim::make_qp_warmstarted_controller(problem);
  if (name == "nn") return nn::make_nn_controller(require_model(model_path, problem), problem, false);
  if (name == "nn-hard") {
    return nn::make_nn_controller(require_model(model_path, problem), problem, true);
  }
  if (name == "warmstart") {
    return nn::make_warmstart_controller(require_model(model_path, problem), problem);
  }
  throw UsageError("unknown controller '" + name + "'");
}

Vec state_arg(const std::vector<double>& x0, const sim::ControlProblem& problem) {
  if (static_cast<int>(x0.size()) != problem.system.state_dim) {
    throw UsageError("--x0 needs " + std::to_string(problem.system.state_dim) + " entries for " +
                     problem.name);
  }
  return to_vec(x0);
}

/// Exit code 2 with the failing margins when u*(x0) does not exist.
bool report_if_infeasible(const sim::ControlProblem& problem, const Vec& x0, std::ostream& err) {
  const ConstraintParams p = problem.constraints_at(x0);
  const FeasibilityResult f = find_interior_point(p);
  if (f.status == FeasibilityStatus::Feasible) return false;
  json j{{"error", "no strictly feasible input at x0"},
         {"x0", to_vector(x0)},
         {"best_margins", to_vector(margins(p, f.best_point))}};
  err << j.dump() << '\n';
  return true;
}

json metrics_json(const sim::Metrics& m, const sim::Trajectory& traj) {
  return json{{"min_h_min", m.min_barrier_min},
              {"V_final", m.lyapunov_final},
              {"violations", m.violations},
              {"V_increase_count", m.lyapunov_increases},
              {"final_norm", m.final_norm},
              {"samples", traj.size()},
              {"termination", std::string(sim::to_string(traj.termination))}};
}

int cmd_simulate(const SimArgs& args, std::ostream& out, std::ostream& err) {
  const sim::ControlProblem problem = make_problem(args.example, args.seed);
  const Vec x0 = state_arg(args.x0, problem);
  sim::SimOptions opts;
  opts.horizon = args.horizon.value_or(args.example == "2" ? 30.0 : 20.0);
  opts.dt = args.dt;
  opts.origin_tol = args.origin_tol;
  if (args.mode == "continuous") {
    opts.mode = sim::HoldMode::Continuous;
  } else if (args.mode == "sample-and-hold") {
    opts.mode = sim::HoldMode::SampleAndHold;
  } else {
    throw UsageError("unknown --mode " + args.mode);
  }
  if (!(opts.dt > 0.0) || !(opts.horizon > 0.0)) throw UsageError("--dt and --T must be > 0");
  if (report_if_infeasible(problem, x0, err)) return kInfeasible;

  sim::Trajectory traj;
  if (args.controller == "interconnect") {
    if (!(args.tau > 0.0)) throw UsageError("--tau must be > 0");
    const Vec u0 = sim::solve_at_state(problem, x0).k_star;
    traj = sim::simulate_interconnection(problem, args.tau, x0, u0, opts);
  } else {
    traj = sim::simulate(problem, make_named_controller(args.controller, problem, args.model), x0,
                         opts);
  }

  std::ofstream csv_out(args.out_path, std::ios::binary);
  if (!csv_out) throw FileError("cannot write " + args.out_path);
  sim::write_trajectory_csv(csv_out, traj);

  json j = traj.size() > 0 ? metrics_json(sim::metrics(traj, problem), traj)
                           : json{{"samples", 0}};
  j["trajectory"] = args.out_path;
  const std::string metrics_path =
      args.metrics_path.empty() ? args.out_path + ".metrics.json" : args.metrics_path;
  std::ofstream m_out(metrics_path, std::ios::binary);
  if (!m_out) throw FileError("cannot write " + metrics_path);
  m_out << j.dump(2) << '\n';
  out << j.dump(2) << '\n';

  switch (traj.termination) {
    case sim::Termination::Completed:
    case sim::Termination::ReachedOrigin:
      return kOk;
    case sim::Termination::ControllerFailed:
      err << "controller failed: " << traj.diagnostic << '\n';
      return kInfeasible;
    default:
      err << "simulation stopped: " << traj.diagnostic << '\n';
      return kInternal;
  }
}

struct BenchArgs {
  std::string example = "1-2d";
  std::vector<std::string> controllers{"ustar", "qp", "qp-warm"};
  int samples = 200;
  std::uint64_t seed = 2024;
  std::vector<double> x0;
  std::string model;
  std::string out_path;
  double horizon = 20.0;
  double dt = 1e-2;
};

Vec default_bench_state(const std::string& example, const sim::ControlProblem& problem,
                        std::uint64_t seed) {
  if (example == "1-2d") return (Vec(2) << 0.0, -5.0).finished();
  if (example == "2") return (Vec(3) << 2.0, 1.0, std::numbers::pi + 0.1).finished();
  // 10D: first seeded draw in [-3, 3]^10 comfortably outside every obstacle.
  Rng rng(derive_seed(seed, 0xBE4C));
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Vec x(problem.system.state_dim);
    for (int i = 0; i < x.size(); ++i) x(i) = uniform(rng, -3.0, 3.0);
    if (problem.min_barrier(x) > 0.5) return x;
  }
  throw NumericError("bench: no initial state found outside the obstacles");
}

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  const sim::ControlProblem problem = make_problem(args.example, args.seed);
  const Vec x0 = args.x0.empty() ? default_bench_state(args.example, problem, args.seed)
                                 : state_arg(args.x0, problem);
  if (args.samples < 1) throw UsageError("--samples must be >= 1");
  if (report_if_infeasible(problem, x0, err)) return kInfeasible;

  std::vector<bench::NamedController> named;
  for (const auto& name : args.controllers) {
    named.push_back({name, make_named_controller(name, problem, args.model)});
  }
  const sim::SimOptions sim_opts{args.horizon, args.dt, sim::HoldMode::SampleAndHold, 1e-6};
  const std::vector<Vec> states =
      bench::state_sequence(problem, sim::make_ustar_controller(problem), x0, args.samples,
                            sim_opts);
  bench::BenchOptions opts;
  // sample-and-hold at this dt is unstable on the stiff planar example
  opts.closed_loop = {args.horizon, args.dt, sim::HoldMode::Continuous, 1e-6};
  const auto rows = bench::run_bench(problem, named, states, x0, opts);

  out << "example " << problem.name << ", " << states.size() << " states\n";
  bench::print_report_table(out, rows);
  if (!args.out_path.empty()) {
    std::ofstream f(args.out_path, std::ios::binary);
    if (!f) throw FileError("cannot write " + args.out_path);
    bench::write_report_csv(f, rows);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Universal safe stabilizing controllers: solver, simulation and NN tools"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  auto add_problem = [](CLI::App* sub, SolveArgs& a) {
    sub->add_option("--A", a.a, "Constraint offsets, one per row")->allow_extra_args();
    sub->add_option("--B", a.b, "Constraint rows, entries separated by commas")
        ->allow_extra_args();
    sub->add_option("--problem", a.problem, "JSON {\"A\": [...], \"B\": [[...]]} or a file with it");
  };
  auto* solve = app.add_subcommand("solve", "Minimize the barrier objective for one problem");
  add_problem(solve, solve_args);
  solve->add_option("--method", solve_args.method, "newton, flow or sontag")
      ->check(CLI::IsMember({"newton", "flow", "sontag"}));
  solve->add_option("--warmstart-model", solve_args.warmstart_model,
                    "Model file used to warmstart Newton");
  solve->add_option("--tol", solve_args.tol, "Newton gradient tolerance");
  solve->add_option("--flow-tol", solve_args.flow_tol, "Gradient-flow stopping tolerance");

  auto* feasible = app.add_subcommand("feasible", "Search for a strictly feasible input");
  add_problem(feasible, solve_args);

  DatasetArgs dataset_args;
  auto* dataset = app.add_subcommand("dataset", "Generate a labelled training set");
  dataset->add_option("--N", dataset_args.n, "Constraints")->check(CLI::PositiveNumber);
  dataset->add_option("--m", dataset_args.m, "Input dimension")->check(CLI::PositiveNumber);
  dataset->add_option("--count", dataset_args.count, "Rows")->check(CLI::PositiveNumber);
  dataset->add_option("--seed", dataset_args.seed, "Seed");
  dataset->add_option("--label-tol", dataset_args.label_tol, "Gradient-flow label tolerance");
  dataset->add_option("--out", dataset_args.out_path, "Output CSV")->required();
  dataset->add_option("--example", dataset_args.example,
                      "Sample states of this example instead of the parameter box")
      ->check(CLI::IsMember({"1-2d", "1-10d", "2"}));
  dataset->add_option("--obstacle-seed", dataset_args.obstacle_seed, "Obstacle seed for 1-10d");
  dataset->add_option("--box", dataset_args.box, "State box half-width for --example");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Fit a model to a dataset with Adam");
  train->add_option("--data", train_args.data, "Dataset CSV")->required();
  train->add_option("--out", train_args.out_path, "Model JSON to write")->required();
  train->add_option("--lr", train_args.config.learning_rate, "Learning rate");
  train->add_option("--epochs", train_args.config.epochs, "Epochs");
  train->add_option("--batch", train_args.config.batch_size, "Minibatch size, 0 for full batch");
  train->add_option("--seed", train_args.config.seed, "Minibatch shuffling seed");
  train->add_option("--init-seed", train_args.init_seed, "Weight initialization seed");
  train->add_flag("--freeze-last", train_args.config.freeze_all_but_last,
                  "Train only the output layer");
  train->add_option("--init-model", train_args.init_model, "Start from this model");
  train->add_option("--val-fraction", train_args.val_fraction, "Validation share")
      ->check(CLI::Range(0.0, 0.99));
  train->add_option("--split-seed", train_args.split_seed, "Train/validation split seed");
  train->add_option("--history", train_args.history, "Loss history CSV");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Validation error and constraint satisfaction");
  eval->add_option("--data", eval_args.data, "Dataset CSV")->required();
  eval->add_option("--model", eval_args.model, "Model JSON")->required();
  eval->add_flag("--hard", eval_args.hard, "Project predictions onto the constraint polytope");
  eval->add_option("--val-fraction", eval_args.val_fraction,
                   "Evaluate on this validation share (0 for all rows)")
      ->check(CLI::Range(0.0, 0.99));
  eval->add_option("--split-seed", eval_args.split_seed, "Train/validation split seed");
  eval->add_option("--tol", eval_args.satisfaction_tol, "Margin tolerance counted as satisfied");

  SimArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop run of one example");
  simulate->add_option("--example", sim_args.example, "1-2d, 1-10d or 2")
      ->check(CLI::IsMember({"1-2d", "1-10d", "2"}));
  simulate->add_option("--controller", sim_args.controller,
                       "ustar, ustar-prev, qp, qp-warm, nn, nn-hard, warmstart or interconnect");
  simulate->add_option("--x0", sim_args.x0, "Initial state")->required()->allow_extra_args();
  simulate->add_option("--T", sim_args.horizon, "Horizon (20, or 30 for example 2)");
  simulate->add_option("--dt", sim_args.dt, "Sample period");
  simulate->add_option("--tau", sim_args.tau, "Input dynamics gain for interconnect");
  simulate->add_option("--model", sim_args.model, "Model JSON for nn controllers");
  simulate->add_option("--mode", sim_args.mode, "continuous or sample-and-hold");
  simulate->add_option("--seed", sim_args.seed, "Obstacle seed for 1-10d");
  simulate->add_option("--origin-tol", sim_args.origin_tol, "Stop once |x| is below this");
  simulate->add_option("--out", sim_args.out_path, "Trajectory CSV")->required();
  simulate->add_option("--metrics", sim_args.metrics_path, "Metrics JSON (default <out>.metrics.json)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Per-call timing of controllers on shared states");
  bench->add_option("--example", bench_args.example, "1-2d, 1-10d or 2")
      ->check(CLI::IsMember({"1-2d", "1-10d", "2"}));
  bench->add_option("--controllers", bench_args.controllers, "Controllers to compare")
      ->allow_extra_args()
      ->delimiter(',');
  bench->add_option("--samples", bench_args.samples, "States in the timing sequence");
  bench->add_option("--seed", bench_args.seed, "Seed for the 10D obstacles and start state");
  bench->add_option("--x0", bench_args.x0, "Start state")->allow_extra_args();
  bench->add_option("--model", bench_args.model, "Model JSON for nn controllers");
  bench->add_option("--T", bench_args.horizon, "Horizon of the state sequence");
  bench->add_option("--dt", bench_args.dt, "Sample period");
  bench->add_option("--out", bench_args.out_path, "Report CSV");

  std::vector<const char*> argv{"unisafe"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*solve) return cmd_solve(solve_args, out, err);
    if (*feasible) return cmd_feasible(solve_args, out);
    if (*dataset) return cmd_dataset(dataset_args, out);
    if (*train) return cmd_train(train_args, out);
    if (*eval) return cmd_eval(eval_args, out);
    if (*simulate) return cmd_simulate(sim_args, out, err);
    if (*bench) return cmd_bench(bench_args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ContractError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const FileError& e) {
    err << "file error: " << e.what() << '\n';
    return kMissingFile;
  } catch (const ParseError& e) {
    err << "parse error at byte " << e.offset() << ": " << e.what() << '\n';
    return kDataFormat;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kDataFormat;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace unisafe::cli
