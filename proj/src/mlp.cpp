#include "unisafe/mlp.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "unisafe/errors.hpp"
#include "unisafe/random.hpp"

namespace unisafe::nn {

using json = nlohmann::json;

double silu(double s) { return s / (1.0 + std::exp(-s)); }

double silu_derivative(double s) {
  const double sig = 1.0 / (1.0 + std::exp(-s));
  return sig * (1.0 + s * (1.0 - sig));
}

namespace {

Mat silu_of(const Mat& z) { return z.unaryExpr([](double v) { return silu(v); }); }

Mat silu_derivative_of(const Mat& z) {
  return z.unaryExpr([](double v) { return silu_derivative(v); });
}

}  // namespace

MlpModel::MlpModel(int n_constraints, int input_dim, const std::vector<int>& hidden_widths,
                   const std::vector<bool>& residual_flags, std::uint64_t seed)
    : n_constraints_(n_constraints), input_dim_(input_dim) {
  if (n_constraints < 1 || input_dim < 1) throw ContractError("MlpModel: N and m must be >= 1");
  if (residual_flags.size() != hidden_widths.size()) {
    throw ContractError("MlpModel: one residual flag per hidden layer is required");
  }
  Rng rng(seed);
  int fan_in = input_width();
  auto make_layer = [&](int out, bool residual) {
    Layer l;
    l.weight.resize(out, fan_in);
    const double scale = std::sqrt(1.0 / fan_in);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < fan_in; ++j) l.weight(i, j) = scale * standard_normal(rng);
    }
    l.bias = Vec::Zero(out);
    l.residual = residual;
    fan_in = out;
    return l;
  };
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
    if (hidden_widths[i] < 1) throw ContractError("MlpModel: layer widths must be >= 1");
    layers_.push_back(make_layer(hidden_widths[i], residual_flags[i]));
  }
  layers_.push_back(make_layer(input_dim, false));
  check();
}

MlpModel::MlpModel(int n_constraints, int input_dim, std::vector<Layer> layers)
    : n_constraints_(n_constraints), input_dim_(input_dim), layers_(std::move(layers)) {
  if (n_constraints < 1 || input_dim < 1) throw ContractError("MlpModel: N and m must be >= 1");
  check();
}

void MlpModel::check() const {
  if (layers_.empty()) throw ContractError("MlpModel: no layers");
  Eigen::Index width = input_width();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.weight.cols() != width || l.bias.size() != l.weight.rows() || l.weight.rows() < 1) {
      throw ContractError("MlpModel: layer " + std::to_string(i) + " has inconsistent shape");
    }
    if (l.residual && (l.weight.rows() != width || i + 1 == layers_.size())) {
      throw ContractError("MlpModel: residual skip on layer " + std::to_string(i) +
                          " joins layers of different widths");
    }
    width = l.weight.rows();
  }
  if (width != input_dim_) throw ContractError("MlpModel: output width must equal m");
}

MlpModel MlpModel::default_for(int n_constraints, int input_dim, std::uint64_t seed) {
  if (n_constraints == 10 && input_dim == 10) {
    return MlpModel(n_constraints, input_dim, {256, 256, 256, 256, 256, 128},
                    {false, true, true, true, true, false}, seed);
  }
  return MlpModel(n_constraints, input_dim, {64, 64, 64, 64}, {false, false, false, false}, seed);
}

Vec MlpModel::forward(const Eigen::Ref<const Vec>& q_flat) const {
  if (q_flat.size() != input_width()) {
    throw ContractError("mlp forward: input width " + std::to_string(q_flat.size()) +
                        ", model expects " + std::to_string(input_width()));
  }
  Vec h = q_flat;
  const std::size_t last = layers_.size() - 1;
  for (std::size_t i = 0; i < last; ++i) {
    const Layer& l = layers_[i];
    Vec z = l.weight * h + l.bias;
    Vec a = z.unaryExpr([](double v) { return silu(v); });
    h = l.residual ? Vec(a + h) : a;
  }
  return layers_[last].weight * h + layers_[last].bias;
}

Mat MlpModel::forward_batch(const Mat& inputs) const {
  if (inputs.rows() != input_width()) throw ContractError("mlp forward: input width mismatch");
  Mat h = inputs;
  const std::size_t last = layers_.size() - 1;
  for (std::size_t i = 0; i < last; ++i) {
    const Layer& l = layers_[i];
    Mat z = l.weight * h;
    z.colwise() += l.bias;
    Mat a = silu_of(z);
    h = l.residual ? Mat(a + h) : a;
  }
  Mat out = layers_[last].weight * h;
  out.colwise() += layers_[last].bias;
  return out;
}

double mse_loss_and_gradient(const MlpModel& model, const Mat& inputs, const Mat& targets,
                             Gradients* grads) {
  const auto& layers = model.layers();
  const std::size_t count = layers.size();
  if (inputs.rows() != model.input_width() || targets.rows() != model.output_dim() ||
      inputs.cols() != targets.cols() || inputs.cols() == 0) {
    throw ContractError("mse: inputs/targets do not match the model");
  }
  std::vector<Mat> acts{inputs};
  std::vector<Mat> pre;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    Mat z = layers[i].weight * acts.back();
    z.colwise() += layers[i].bias;
    Mat a = silu_of(z);
    if (layers[i].residual) a += acts.back();
    pre.push_back(std::move(z));
    acts.push_back(std::move(a));
  }
  Mat y = layers.back().weight * acts.back();
  y.colwise() += layers.back().bias;
  const Mat diff = y - targets;
  const double denom = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / denom;
  if (!grads) return loss;

  grads->weight.assign(count, Mat());
  grads->bias.assign(count, Vec());
  Mat delta = (2.0 / denom) * diff;
  grads->weight[count - 1] = delta * acts[count - 1].transpose();
  grads->bias[count - 1] = delta.rowwise().sum();
  Mat upstream = layers.back().weight.transpose() * delta;
  for (std::size_t i = count - 1; i-- > 0;) {
    const Mat dz = upstream.cwiseProduct(silu_derivative_of(pre[i]));
    grads->weight[i] = dz * acts[i].transpose();
    grads->bias[i] = dz.rowwise().sum();
    Mat next = layers[i].weight.transpose() * dz;
    if (layers[i].residual) next += upstream;
    upstream = std::move(next);
  }
  return loss;
}

double mse(const MlpModel& model, const Mat& inputs, const Mat& targets) {
  return mse_loss_and_gradient(model, inputs, targets, nullptr);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || epochs < 1 || batch_size < 0 || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ContractError("TrainConfig: learning rate > 0, epochs >= 1, betas in [0, 1) required");
  }
}

namespace {

/// Activations entering the output layer, one column per sample.
Mat hidden_features(const MlpModel& model, const Mat& inputs) {
  const auto& layers = model.layers();
  Mat h = inputs;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    Mat z = layers[i].weight * h;
    z.colwise() += layers[i].bias;
    Mat a = silu_of(z);
    if (layers[i].residual) a += h;
    h = std::move(a);
  }
  return h;
}

/// MSE of the output layer alone on precomputed features.
double head_loss(const Layer& out, const Mat& features, const Mat& targets, Gradients* grads,
                 std::size_t layer_count) {
  Mat diff = out.weight * features;
  diff.colwise() += out.bias;
  diff -= targets;
  const double denom = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / denom;
  if (grads) {
    grads->weight.assign(layer_count, Mat());
    grads->bias.assign(layer_count, Vec());
    const Mat delta = (2.0 / denom) * diff;
    grads->weight.back() = delta * features.transpose();
    grads->bias.back() = delta.rowwise().sum();
  }
  return loss;
}

}  // namespace

TrainHistory train(MlpModel& model, const Mat& inputs, const Mat& targets,
                   const TrainConfig& config, const Mat* val_inputs, const Mat* val_targets) {
  config.validate();
  const Eigen::Index n = inputs.cols();
  if (n == 0) throw ContractError("train: empty dataset");
  if (inputs.rows() != model.input_width() || targets.rows() != model.output_dim() ||
      targets.cols() != n) {
    throw ContractError("train: dataset dimensions do not match the model");
  }
  const bool validate = val_inputs && val_targets && val_inputs->cols() > 0;

  auto& layers = model.layers();
  const std::size_t count = layers.size();
  const bool frozen = config.freeze_all_but_last;
  const std::size_t first_trainable = frozen ? count - 1 : 0;
  // Hidden layers stay fixed when frozen, so their outputs are computed once.
  const Mat source = frozen ? hidden_features(model, inputs) : Mat();
  const Mat val_source = frozen && validate ? hidden_features(model, *val_inputs) : Mat();
  const Mat& x_all = frozen ? source : inputs;
  auto batch_loss = [&](const Mat& x, const Mat& y, Gradients* grads) {
    return frozen ? head_loss(layers.back(), x, y, grads, count)
                  : mse_loss_and_gradient(model, x, y, grads);
  };
  std::vector<Mat> m_w(count), v_w(count);
  std::vector<Vec> m_b(count), v_b(count);
  for (std::size_t i = 0; i < count; ++i) {
    m_w[i] = v_w[i] = Mat::Zero(layers[i].weight.rows(), layers[i].weight.cols());
    m_b[i] = v_b[i] = Vec::Zero(layers[i].bias.size());
  }

  const Eigen::Index batch = (config.batch_size == 0 || config.batch_size >= n)
                                 ? n
                                 : static_cast<Eigen::Index>(config.batch_size);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);
  TrainHistory history;
  Gradients g;
  long step = 0;
  Mat xb, yb;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (batch < n) {
      for (Eigen::Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(i + 1));
        std::swap(order[i], order[std::min(j, i)]);
      }
    }
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      double loss;
      if (len == n) {
        loss = batch_loss(x_all, targets, &g);
      } else {
        xb.resize(x_all.rows(), len);
        yb.resize(targets.rows(), len);
        for (Eigen::Index j = 0; j < len; ++j) {
          xb.col(j) = x_all.col(order[start + j]);
          yb.col(j) = targets.col(order[start + j]);
        }
        loss = batch_loss(xb, yb, &g);
      }
      if (!std::isfinite(loss)) {
        throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
      }
      loss_sum += loss * static_cast<double>(len);
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      const double lr = config.learning_rate;
      const double eps = config.epsilon;
      for (std::size_t i = first_trainable; i < count; ++i) {
        m_w[i] = config.beta1 * m_w[i] + (1.0 - config.beta1) * g.weight[i];
        v_w[i] = config.beta2 * v_w[i] + (1.0 - config.beta2) * g.weight[i].cwiseAbs2();
        layers[i].weight.array() -=
            lr * (m_w[i].array() / c1) / ((v_w[i].array() / c2).sqrt() + eps);
        m_b[i] = config.beta1 * m_b[i] + (1.0 - config.beta1) * g.bias[i];
        v_b[i] = config.beta2 * v_b[i] + (1.0 - config.beta2) * g.bias[i].cwiseAbs2();
        layers[i].bias.array() -= lr * (m_b[i].array() / c1) / ((v_b[i].array() / c2).sqrt() + eps);
      }
    }
    history.train_loss.push_back(loss_sum / static_cast<double>(n));
    if (validate) {
      const double v = frozen ? head_loss(layers.back(), val_source, *val_targets, nullptr, count)
                              : mse(model, *val_inputs, *val_targets);
      if (!std::isfinite(v)) {
        throw NumericError("validation loss became non-finite at epoch " + std::to_string(epoch));
      }
      history.validation_loss.push_back(v);
    }
  }
  return history;
}

std::string model_to_json(const MlpModel& model) {
  json j;
  j["schema_version"] = 1;
  j["N"] = model.n_constraints();
  j["m"] = model.output_dim();
  j["input_dim"] = model.input_width();
  j["activation"] = "silu";
  json widths = json::array(), flags = json::array(), weights = json::array(),
       biases = json::array();
  for (const Layer& l : model.layers()) {
    widths.push_back(l.weight.rows());
    flags.push_back(l.residual);
    std::vector<double> w;
    w.reserve(l.weight.size());
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    }
    weights.push_back(w);
    biases.push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
  }
  j["layer_widths"] = widths;
  j["residual_flags"] = flags;
  j["weights"] = weights;
  j["biases"] = biases;
  return j.dump();
}

MlpModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what(), e.byte);
  }
  try {
    if (!j.is_object()) throw SchemaError("model file: top level must be an object");
    if (j.at("schema_version").get<int>() != 1) {
      throw SchemaError("model file: unsupported schema_version");
    }
    if (j.at("activation").get<std::string>() != "silu") {
      throw SchemaError("model file: only the silu activation is supported");
    }
    const int n_constraints = j.at("N").get<int>();
    const int m = j.at("m").get<int>();
    if (n_constraints < 1 || m < 1) throw SchemaError("model file: N and m must be >= 1");
    const int in_width = n_constraints * (m + 1) + 1;
    if (j.contains("input_dim") && j["input_dim"].get<int>() != in_width) {
      throw SchemaError("model file: input_dim disagrees with N and m");
    }
    const auto widths = j.at("layer_widths").get<std::vector<int>>();
    const auto flags = j.at("residual_flags").get<std::vector<bool>>();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (widths.empty() || flags.size() != widths.size() || weights.size() != widths.size() ||
        biases.size() != widths.size()) {
      throw SchemaError("model file: per-layer arrays have different lengths");
    }
    std::vector<Layer> layers;
    int fan_in = in_width;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const auto w = weights[i].get<std::vector<double>>();
      const auto b = biases[i].get<std::vector<double>>();
      if (widths[i] < 1 || w.size() != static_cast<std::size_t>(widths[i]) * fan_in ||
          b.size() != static_cast<std::size_t>(widths[i])) {
        throw SchemaError("model file: layer " + std::to_string(i) + " expects " +
                          std::to_string(widths[i]) + "x" + std::to_string(fan_in) +
                          " weights, found " + std::to_string(w.size()) + " values");
      }
      Layer l;
      l.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data(), widths[i], fan_in);
      l.bias = Eigen::Map<const Vec>(b.data(), widths[i]);
      l.residual = flags[i];
      layers.push_back(std::move(l));
      fan_in = widths[i];
    }
    try {
      return MlpModel(n_constraints, m, std::move(layers));
    } catch (const ContractError& e) {
      throw SchemaError(std::string("model file: ") + e.what());
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }
}

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write model file " + path);
  out << model_to_json(model) << '\n';
  if (!out) throw FileError("failed writing model file " + path);
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace unisafe::nn
