#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "unisafe/controllers.hpp"
#include "unisafe/dataset.hpp"
#include "unisafe/errors.hpp"
#include "unisafe/mlp.hpp"
#include "unisafe/nn_control.hpp"
#include "unisafe/objective.hpp"
#include "unisafe/solver.hpp"

using namespace unisafe;
using namespace unisafe::nn;

namespace {
std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "unisafe_test_nn";
  std::filesystem::create_directories(dir);
  return dir;
}

Mat random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = uniform(rng, -scale, scale);
  return m;
}

bool same_parameters(const MlpModel& a, const MlpModel& b, std::size_t layers) {
  for (std::size_t i = 0; i < layers; ++i) {
    if (a.layers()[i].weight != b.layers()[i].weight) return false;
    if (a.layers()[i].bias != b.layers()[i].bias) return false;
  }
  return true;
}

/// Total loss as a function of a single parameter, for finite differences.
double loss_with(MlpModel model, std::size_t layer, bool is_weight, int r, int c, double value,
                 const Mat& x, const Mat& y) {
  if (is_weight) {
    model.layers()[layer].weight(r, c) = value;
  } else {
    model.layers()[layer].bias(r) = value;
  }
  return mse(model, x, y);
}
}  // namespace

TEST_CASE("silu") {
  CHECK(silu(0.0) == 0.0);
  CHECK(silu(10.0) == doctest::Approx(9.999546).epsilon(1e-7));
  CHECK(silu(-800.0) == doctest::Approx(0.0));
  for (double s : {-3.0, -0.5, 0.0, 0.2, 4.0}) {
    const double fd = (silu(s + 1e-6) - silu(s - 1e-6)) / 2e-6;
    CHECK(silu_derivative(s) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("architectures and shapes") {
  const MlpModel small = MlpModel::default_for(2, 2, 1);
  CHECK(small.input_width() == 7);
  CHECK(small.layers().size() == 5);
  for (int i = 0; i < 4; ++i) CHECK(small.layers()[i].weight.rows() == 64);

  const MlpModel big = MlpModel::default_for(10, 10, 1);
  CHECK(big.input_width() == 111);
  REQUIRE(big.layers().size() == 7);
  CHECK(big.layers()[4].weight.rows() == 256);
  CHECK(big.layers()[5].weight.rows() == 128);
  CHECK(big.layers()[6].weight.rows() == 10);
  CHECK(big.layers()[1].residual);
  CHECK_FALSE(big.layers()[5].residual);

  CHECK_THROWS_AS(MlpModel(2, 2, {8, 4}, {false, true}, 0), ContractError);
  CHECK_THROWS_AS(MlpModel(2, 2, {8}, {false, true}, 0), ContractError);
  CHECK_THROWS_AS(small.forward(Vec::Zero(6)), ContractError);
  const Vec out = small.forward(Vec::Ones(7));
  CHECK(out.size() == 2);
  CHECK(out.allFinite());
}

TEST_CASE("a model with zero weights returns the output bias") {
  MlpModel model(2, 2, {5, 5}, {false, true}, 3);
  for (auto& l : model.layers()) l.weight.setZero();
  model.layers().back().bias = Vec::Constant(2, 0.375);
  CHECK(model.forward(Vec::Constant(7, 2.0)) == Vec::Constant(2, 0.375));
}

TEST_CASE("batched and single forward passes agree") {
  Rng rng(4);
  const MlpModel model(2, 2, {6, 6, 3}, {false, true, false}, 9);
  const Mat x = random_matrix(rng, 7, 5);
  const Mat y = model.forward_batch(x);
  for (int c = 0; c < 5; ++c) CHECK((y.col(c) - model.forward(x.col(c))).norm() <= 1e-14);
}

TEST_CASE("backprop matches central differences") {
  Rng rng(8);
  const MlpModel model(2, 2, {4, 4}, {false, true}, 21);
  const Mat x = random_matrix(rng, 7, 5);
  const Mat y = random_matrix(rng, 2, 5);
  Gradients g;
  mse_loss_and_gradient(model, x, y, &g);
  REQUIRE(g.weight.size() == model.layers().size());
  double worst = 0.0;
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const Mat& w = model.layers()[l].weight;
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) {
        const double h = 1e-6;
        const double fd = (loss_with(model, l, true, r, c, w(r, c) + h, x, y) -
                           loss_with(model, l, true, r, c, w(r, c) - h, x, y)) /
                          (2 * h);
        worst = std::max(worst, std::abs(fd - g.weight[l](r, c)) / std::max(1.0, std::abs(fd)));
      }
      const double b = model.layers()[l].bias(r);
      const double fd = (loss_with(model, l, false, r, 0, b + 1e-6, x, y) -
                         loss_with(model, l, false, r, 0, b - 1e-6, x, y)) /
                        2e-6;
      worst = std::max(worst, std::abs(fd - g.bias[l](r)) / std::max(1.0, std::abs(fd)));
    }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("linear regression sanity") {
  Rng rng(12);
  Layer linear{random_matrix(rng, 2, 7, 0.1), Vec::Zero(2), false};
  MlpModel model(2, 2, {linear});
  const Mat w_true = random_matrix(rng, 2, 7);
  const Mat x = random_matrix(rng, 7, 200);
  const Mat y = w_true * x;
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.learning_rate = 3e-2;
  const TrainHistory h = train(model, x, y, cfg);
  CHECK(h.train_loss.back() < 1e-6);
  CHECK(h.train_loss.size() == 500);
}

TEST_CASE("training lowers the loss and freezing keeps hidden layers") {
  Rng rng(14);
  const Mat x = random_matrix(rng, 7, 128);
  Mat y(2, 128);
  for (int c = 0; c < 128; ++c) y.col(c) << std::sin(x(0, c)) + x(3, c), x(1, c) * x(2, c);

  MlpModel model(2, 2, {16, 16}, {false, true}, 5);
  const MlpModel before = model;
  TrainConfig cfg;
  cfg.epochs = 100;
  const TrainHistory h = train(model, x, y, cfg, &x, &y);
  auto mean = [](const std::vector<double>& v, std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += v[i];
    return s / static_cast<double>(to - from);
  };
  CHECK(mean(h.train_loss, 90, 100) < mean(h.train_loss, 0, 10));
  CHECK(h.validation_loss.size() == 100);
  CHECK_FALSE(same_parameters(model, before, 2));

  MlpModel frozen = before;
  cfg.freeze_all_but_last = true;
  cfg.batch_size = 32;
  train(frozen, x, y, cfg);
  CHECK(same_parameters(frozen, before, 2));
  CHECK(frozen.layers()[2].weight != before.layers()[2].weight);
}

TEST_CASE("minibatch training is reproducible") {
  Rng rng(15);
  const Mat x = random_matrix(rng, 7, 64);
  const Mat y = random_matrix(rng, 2, 64);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 10;
  cfg.seed = 77;
  MlpModel a(2, 2, {8}, {false}, 1), b(2, 2, {8}, {false}, 1);
  train(a, x, y, cfg);
  train(b, x, y, cfg);
  CHECK(same_parameters(a, b, 2));
}

TEST_CASE("training rejects bad configuration and aborts on NaN") {
  Rng rng(16);
  const Mat x = random_matrix(rng, 7, 8);
  Mat y = random_matrix(rng, 2, 8);
  MlpModel model(2, 2, {4}, {false}, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train(model, x, y, cfg), ContractError);
  cfg = {};
  CHECK_THROWS_AS(train(model, x.topRows(6), y, cfg), ContractError);
  y(0, 3) = std::nan("");
  cfg.epochs = 3;
  try {
    train(model, x, y, cfg);
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("model files") {
  const auto dir = scratch_dir();
  const MlpModel model = MlpModel::default_for(2, 2, 99);
  const std::string path = (dir / "model.json").string();
  save_model(model, path);
  const MlpModel back = load_model(path);
  REQUIRE(back.layers().size() == model.layers().size());
  CHECK(same_parameters(back, model, model.layers().size()));
  CHECK(model_to_json(back) == model_to_json(model));

  const MlpModel big = MlpModel::default_for(10, 10, 2);
  CHECK(same_parameters(model_from_json(model_to_json(big)), big, big.layers().size()));

  std::string text = model_to_json(model);
  {
    std::ofstream cut(dir / "truncated.json");
    cut << text.substr(0, text.size() / 2);
  }
  try {
    load_model((dir / "truncated.json").string());
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() > 0);
  }

  auto j = nlohmann::json::parse(model_to_json(big));
  j["input_dim"] = 7;
  CHECK_THROWS_AS(model_from_json(j.dump()), SchemaError);
  auto j2 = nlohmann::json::parse(text);
  j2["activation"] = "relu";
  CHECK_THROWS_AS(model_from_json(j2.dump()), SchemaError);
  CHECK_THROWS_AS(load_model((dir / "missing.json").string()), FileError);
}

TEST_CASE("dataset rows are feasible and labelled to tolerance") {
  const Dataset d = sample_dataset(2, 2, 300, 7);
  REQUIRE(d.count() == 300);
  CHECK(d.inputs.cols() == 7);
  CHECK(d.labels.cols() == 2);
  for (int i = 0; i < d.count(); ++i) {
    const auto [p, r] = unflatten(d.inputs.row(i).transpose(), 2, 2);
    const ScaledParams q(p, r);
    const Vec k = d.labels.row(i).transpose();
    CHECK(max_margin(p, k) < 0.0);
    CHECK(grad_J(q, k).norm() <= 1e-6);
    CHECK(p.a().cwiseAbs().maxCoeff() <= 1.0);
    CHECK(p.b().rowwise().norm().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("datasets are deterministic and independent of thread count") {
  const Dataset a = sample_dataset(2, 2, 64, 11);
  const Dataset b = sample_dataset(2, 2, 64, 11);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  setenv("UNISAFE_THREADS", "1", 1);
  const Dataset c = sample_dataset(2, 2, 64, 11);
  unsetenv("UNISAFE_THREADS");
  CHECK(a.inputs == c.inputs);
  CHECK(a.labels == c.labels);
  CHECK(sample_dataset(2, 2, 64, 12).inputs != a.inputs);
}

TEST_CASE("degenerate combinations are reported") {
  CHECK_THROWS_AS(sample_dataset(10, 1, 5, 1), NumericError);
  CHECK_THROWS_AS(sample_dataset(2, 2, 0, 1), ContractError);
}

TEST_CASE("dataset files round trip") {
  const auto dir = scratch_dir();
  const Dataset d = sample_dataset(3, 2, 40, 5);
  const std::string path = (dir / "data.csv").string();
  write_dataset(d, path);
  const Dataset back = read_dataset(path);
  CHECK(back.n_constraints == 3);
  CHECK(back.input_dim == 2);
  CHECK(back.seed == 5);
  CHECK(back.inputs == d.inputs);
  CHECK(back.labels == d.labels);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("q_0,q_1,", 0) == 0);
  CHECK(header.find("q_9,k_0,k_1") != std::string::npos);
  CHECK_THROWS_AS(read_dataset((dir / "nope.csv").string()), FileError);

  const auto [train_set, val_set] = split_dataset(d, 0.1, 0);
  CHECK(train_set.count() == 36);
  CHECK(val_set.count() == 4);
}

TEST_CASE("network controllers") {
  const auto model = std::make_shared<const MlpModel>(MlpModel::default_for(2, 2, 4));
  const sim::ControlProblem ex1 = sim::make_example_1();
  const sim::ControlProblem ex2 = sim::make_example_2();
  const sim::Controller soft = make_nn_controller(model, ex1, false);
  const sim::Controller hard = make_nn_controller(model, ex1, true);
  const sim::Controller hard2 = make_nn_controller(model, ex2, true);
  const std::string before = model_to_json(*model);

  Rng rng(44);
  for (int t = 0; t < 200; ++t) {
    const Vec x = (Vec(2) << uniform(rng, -6, 6), uniform(rng, -6, 6)).finished();
    if (ex1.min_barrier(x) <= 0.0) continue;
    const Vec u_soft = soft(x).u;
    CHECK(u_soft.size() == 2);
    CHECK(u_soft.allFinite());
    CHECK(max_margin(ex1.constraints_at(x), hard(x).u) <= 1e-9);
    const Vec s = (Vec(3) << x, uniform(rng, -3, 3)).finished();
    CHECK(max_margin(ex2.constraints_at(s), hard2(s).u) <= 1e-9);
  }
  // The same network serves both state dimensions without changes.
  CHECK(model_to_json(*model) == before);

  const auto ten = std::make_shared<const MlpModel>(MlpModel::default_for(10, 10, 4));
  CHECK_THROWS_AS(predict(*ten, ex1.constraints_at(Vec::Constant(2, 3.0))), ContractError);
}

TEST_CASE("network output is smooth in its input") {
  const MlpModel model = MlpModel::default_for(2, 2, 4);
  Rng rng(45);
  for (int line = 0; line < 10; ++line) {
    const Mat ends = random_matrix(rng, 7, 2);
    auto at = [&](double s) -> Vec { return model.forward((1 - s) * ends.col(0) + s * ends.col(1)); };
    double max_step = 0.0, max_curve = 0.0;
    const double h = 1e-2;
    for (double s = h; s < 1.0; s += h) {
      max_step = std::max(max_step, (at(s + h) - at(s)).norm() / h);
      max_curve = std::max(max_curve, (at(s + h) - 2 * at(s) + at(s - h)).norm() / (h * h));
    }
    // Difference quotients stay bounded and shrink with the step: no jumps.
    CHECK(std::isfinite(max_step));
    CHECK(max_curve * h <= max_step + 1e-9);
  }
}

TEST_CASE("warmstarted newton returns the exact minimizer") {
  MlpModel zero = MlpModel::default_for(2, 2, 1);
  for (auto& l : zero.layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  const MlpModel random = MlpModel::default_for(2, 2, 5);
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto inst = oracle::random_instance(rng, 2, 2, 3.0);
    const ConstraintParams p(inst.a, inst.b);
    const SolveResult cold = solve_exact(p);
    REQUIRE(cold.status == SolveStatus::Converged);
    const SolveResult warm = warmstart_solve(random, p);
    REQUIRE(warm.status == SolveStatus::Converged);
    CHECK((warm.k_star - cold.k_star).norm() <= 1e-8);
    const SolveResult from_zero = warmstart_solve(zero, p);
    const SolveResult at_origin = solve_exact(p, {}, Vec::Zero(2));
    CHECK(from_zero.k_star == at_origin.k_star);
    CHECK(from_zero.iterations == at_origin.iterations);
  }
}
