#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unisafe/params.hpp"

namespace unisafe::nn {

double silu(double s);
double silu_derivative(double s);

/// Affine map out = W in + b. Hidden layers apply SiLU; a residual hidden layer
/// adds its input to the activation.
struct Layer {
  Mat weight;  // out x in
  Vec bias;
  bool residual = false;
};

/// Feedforward network from flattened scaled parameters to an m-vector.
///
/// The last layer is linear. Input width is N(m+1)+1.
class MlpModel {
 public:
  /// Hidden widths and per-layer skip flags; the linear output layer is
  /// appended. Weights use a seeded scaled-normal init, biases start at zero.
  /// Throws ContractError when a skip joins layers of different widths.
  MlpModel(int n_constraints, int input_dim, const std::vector<int>& hidden_widths,
           const std::vector<bool>& residual_flags, std::uint64_t seed);

  /// Builds from explicit layers, checking all shapes.
  MlpModel(int n_constraints, int input_dim, std::vector<Layer> layers);

  /// Four 64-wide layers for N = m = 2; for N = m = 10 a residual stack
  /// 256 x 5 then 128; four 64-wide layers otherwise.
  static MlpModel default_for(int n_constraints, int input_dim, std::uint64_t seed);

  int n_constraints() const { return n_constraints_; }
  int output_dim() const { return input_dim_; }
  int input_width() const { return n_constraints_ * (input_dim_ + 1) + 1; }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Throws ContractError on width mismatch.
  Vec forward(const Eigen::Ref<const Vec>& q_flat) const;

  /// One sample per column.
  Mat forward_batch(const Mat& inputs) const;

 private:
  void check() const;

  int n_constraints_;
  int input_dim_;
  std::vector<Layer> layers_;
};

/// Parameter gradients with the same layout as the model layers.
struct Gradients {
  std::vector<Mat> weight;
  std::vector<Vec> bias;
};

/// Mean squared error over all entries and its exact gradient. Columns of
/// `inputs` and `targets` are samples.
double mse_loss_and_gradient(const MlpModel& model, const Mat& inputs, const Mat& targets,
                             Gradients* grads);

double mse(const MlpModel& model, const Mat& inputs, const Mat& targets);

struct TrainConfig {
  double learning_rate = 3e-3;
  int epochs = 2000;
  int batch_size = 0;  // 0 selects full batch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool freeze_all_but_last = false;
  std::uint64_t seed = 0;  // minibatch shuffling

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;       // per epoch, mean of the minibatch losses
  std::vector<double> validation_loss;  // empty without validation data
};

/// Adam on MSE. Throws NumericError naming the epoch when the loss turns NaN.
TrainHistory train(MlpModel& model, const Mat& inputs, const Mat& targets,
                   const TrainConfig& config, const Mat* val_inputs = nullptr,
                   const Mat* val_targets = nullptr);

/// JSON model file. Doubles round-trip exactly.
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);
void save_model(const MlpModel& model, const std::string& path);
/// Throws ParseError (with byte offset), SchemaError, or FileError when unreadable.
MlpModel load_model(const std::string& path);

}  // namespace unisafe::nn
