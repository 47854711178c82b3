#include "inhomarkov/neural_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

namespace inhomarkov {

namespace {

constexpr Eigen::Index kEvalChunk = 2048;

double gelu_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void for_each_tensor(MlpParams& p, const auto& fn) {
  for (auto& layer : p.layers) {
    fn(layer.weight);
    fn(layer.bias);
  }
}

}  // namespace

std::vector<std::size_t> MlpParams::widths() const {
  std::vector<std::size_t> w;
  if (layers.empty()) return w;
  w.push_back(input_width());
  for (const auto& layer : layers) w.push_back(static_cast<std::size_t>(layer.weight.rows()));
  return w;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

bool MlpParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  for (const auto& layer : layers)
    z.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
  return z;
}

void TrainConfig::validate() const {
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw InputError("dropout_p must lie in [0, 1)");
  if (patience < 1) throw InputError("patience must be at least 1");
  if (batch_size < 1) throw InputError("batch_size must be at least 1");
  if (max_epochs < 1) throw InputError("max_epochs must be at least 1");
  if (!(learning_rate >= 0.0)) throw InputError("learning_rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw InputError("weight_decay must be non-negative");
  if (!(grad_clip_norm > 0.0)) throw InputError("grad_clip_norm must be positive");
  if (!(label_smoothing_eps >= 0.0 && label_smoothing_eps < 0.5)) throw InputError("label_smoothing_eps must lie in [0, 0.5)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw InputError("Adam betas must lie in [0, 1)");
}

AdamState AdamState::for_params(const MlpParams& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

std::vector<std::size_t> default_widths(std::size_t input, std::size_t output) {
  std::vector<std::size_t> w{input};
  w.insert(w.end(), kHiddenWidths.begin(), kHiddenWidths.end());
  w.push_back(output);
  return w;
}

MlpParams init_params(std::span<const std::size_t> widths, std::uint64_t seed) {
  if (widths.size() < 2) throw InputError("a network needs at least an input and an output width");
  for (std::size_t i = 0; i < widths.size(); ++i)
    if (widths[i] == 0) throw InputError(fmt::format("layer width {} is zero", i));
  Rng rng(seed);
  MlpParams p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

double gelu(double x) { return x * gelu_cdf(x); }

double gelu_derivative(double x) {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return gelu_cdf(x) + x * pdf;
}

namespace {

Matrix forward_impl(const MlpParams& params, const Matrix& inputs, Mode mode, double dropout_p, Rng* rng,
                    const std::vector<Matrix>* replay_masks, ForwardCache* cache) {
  if (params.layers.empty()) throw InputError("empty network");
  if (static_cast<std::size_t>(inputs.rows()) != params.input_width())
    throw InputError(fmt::format("input width {} does not match network input {}", inputs.rows(), params.input_width()));
  if (inputs.hasNaN()) throw InputError("NaN in network input");
  const bool drop = mode == Mode::train && (replay_masks != nullptr || dropout_p > 0.0);
  if (drop && replay_masks == nullptr && rng == nullptr) throw InputError("train-mode dropout needs a random source");

  if (cache) {
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
    cache->masks.clear();
  }
  const double keep_scale = dropout_p > 0.0 ? 1.0 / (1.0 - dropout_p) : 1.0;
  Matrix a = inputs;
  const std::size_t hidden = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix z = layer.weight * a;
    z.colwise() += layer.bias;
    if (cache) cache->layer_inputs.push_back(std::move(a));
    if (l == hidden) return z;

    Matrix act = z.unaryExpr([](double v) { return gelu(v); });
    if (drop) {
      Matrix mask;
      if (replay_masks) {
        mask = (*replay_masks)[l];
      } else {
        mask.resize(act.rows(), act.cols());
        for (Eigen::Index c = 0; c < mask.cols(); ++c)
          for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = rng->uniform() < dropout_p ? 0.0 : keep_scale;
      }
      act.array() *= mask.array();
      if (cache) cache->masks.push_back(std::move(mask));
    }
    if (cache) cache->pre_activations.push_back(std::move(z));
    a = std::move(act);
  }
  return a;  // unreachable: the loop returns at the output layer
}

}  // namespace

Matrix forward(const MlpParams& params, const Matrix& inputs, Mode mode, double dropout_p, Rng* rng,
               ForwardCache* cache) {
  return forward_impl(params, inputs, mode, dropout_p, rng, nullptr, cache);
}

Matrix forward_with_masks(const MlpParams& params, const Matrix& inputs, const std::vector<Matrix>& masks,
                          ForwardCache* cache) {
  if (masks.empty()) return forward_impl(params, inputs, Mode::eval, 0.0, nullptr, nullptr, cache);
  if (masks.size() + 1 != params.layers.size()) throw InputError("one dropout mask per hidden layer is required");
  return forward_impl(params, inputs, Mode::train, 0.0, nullptr, &masks, cache);
}

Vector forward_eval(const MlpParams& params, const Vector& input) {
  return forward(params, Matrix(input), Mode::eval).col(0);
}

Vector softmax(const Vector& logits) {
  if (!logits.allFinite()) throw InputError("non-finite logits");
  const Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const auto col = logits.col(c);
    const Eigen::ArrayXd e = (col.array() - col.maxCoeff()).exp();
    out.col(c) = e / e.sum();
  }
  return out;
}

Vector smoothed_targets(std::size_t label, std::size_t m, double eps) {
  if (m < 2) throw InputError("smoothed targets need at least 2 classes");
  if (label >= m) throw InputError(fmt::format("label {} out of range for {} classes", label, m));
  if (!(eps >= 0.0 && eps < 0.5)) throw InputError("smoothing mass must lie in [0, 0.5)");
  Vector q = Vector::Zero(static_cast<Eigen::Index>(m));
  const auto j = static_cast<Eigen::Index>(label);
  q(j) = 1.0 - 2.0 * eps;
  if (j > 0) q(j - 1) = eps; else q(j) += eps;
  if (j + 1 < q.size()) q(j + 1) = eps; else q(j) += eps;
  return q;
}

double cross_entropy(const Vector& probs, const Vector& target) {
  if (probs.size() != target.size()) throw InputError("probability and target lengths differ");
  double loss = 0.0;
  for (Eigen::Index j = 0; j < probs.size(); ++j)
    if (target(j) != 0.0) loss -= target(j) * std::log(std::max(probs(j), kProbFloor));
  return loss;
}

MlpGradients backward(const MlpParams& params, const ForwardCache& cache, const Matrix& probs, const Matrix& targets) {
  const std::size_t layers = params.layers.size();
  if (cache.layer_inputs.size() != layers || cache.pre_activations.size() + 1 != layers)
    throw InputError("forward cache does not match the network");
  if (probs.rows() != targets.rows() || probs.cols() != targets.cols()) throw InputError("probs/targets shape mismatch");
  const bool masked = !cache.masks.empty();

  MlpGradients grads;
  grads.layers.resize(layers);
  Matrix delta = (probs - targets) / static_cast<double>(probs.cols());
  for (std::size_t l = layers; l-- > 0;) {
    grads.layers[l].weight = delta * cache.layer_inputs[l].transpose();
    grads.layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Matrix upstream = params.layers[l].weight.transpose() * delta;
    const Matrix& z = cache.pre_activations[l - 1];
    upstream.array() *= z.unaryExpr([](double v) { return gelu_derivative(v); }).array();
    if (masked) upstream.array() *= cache.masks[l - 1].array();
    delta = std::move(upstream);
  }
  return grads;
}

void adam_step(MlpParams& params, const MlpGradients& grads, AdamState& state, const TrainConfig& config) {
  if (grads.layers.size() != params.layers.size()) throw InputError("gradient shape mismatch");
  double sq = 0.0;
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    const auto& g = grads.layers[l];
    if (g.weight.rows() != params.layers[l].weight.rows() || g.weight.cols() != params.layers[l].weight.cols() ||
        g.bias.size() != params.layers[l].bias.size())
      throw InputError(fmt::format("gradient shape mismatch at layer {}", l));
    if (!g.weight.allFinite() || !g.bias.allFinite())
      throw NumericalError(fmt::format("non-finite gradient in layer {}; step rejected", l));
    sq += g.weight.squaredNorm() + g.bias.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double scale = norm > config.grad_clip_norm ? config.grad_clip_norm / norm : 1.0;

  ++state.step;
  const double lr = config.learning_rate;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * config.weight_decay;

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    p *= decay;
    m = b1 * m + (1.0 - b1) * scale * g;
    v = b2 * v + (1.0 - b2) * (scale * g).array().square().matrix();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.adam_eps);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, state.first_moment.layers[l].weight,
           state.second_moment.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.first_moment.layers[l].bias,
           state.second_moment.layers[l].bias);
  }
}

double dataset_nll(const MlpParams& params, const Dataset& data) {
  if (data.size() == 0) throw InputError("empty dataset");
  double sum = 0.0;
  const Eigen::Index n = data.inputs.cols();
  for (Eigen::Index start = 0; start < n; start += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, n - start);
    const Matrix probs = softmax_columns(forward(params, data.inputs.middleCols(start, len), Mode::eval));
    for (Eigen::Index c = 0; c < len; ++c)
      sum -= std::log(std::max(probs(data.labels[static_cast<std::size_t>(start + c)], c), kProbFloor));
  }
  return sum / static_cast<double>(n);
}

TrainResult train(const MlpParams& init, const Dataset& train_set, const Dataset& val_set, const TrainConfig& config) {
  config.validate();
  if (train_set.size() == 0 || val_set.size() == 0) throw InputError("training needs non-empty train and validation sets");
  if (static_cast<std::size_t>(train_set.inputs.cols()) != train_set.size() ||
      static_cast<std::size_t>(val_set.inputs.cols()) != val_set.size())
    throw InputError("dataset inputs and labels are misaligned");
  const std::size_t m = init.output_width();

  // Targets are fixed per sample; build them once.
  Matrix targets(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(train_set.size()));
  for (std::size_t s = 0; s < train_set.size(); ++s)
    targets.col(static_cast<Eigen::Index>(s)) =
        smoothed_targets(static_cast<std::size_t>(train_set.labels[s]), m, config.label_smoothing_eps);

  Rng rng(config.seed);
  TrainResult result;
  MlpParams params = init;
  AdamState adam = AdamState::for_params(params);
  result.best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto width = static_cast<Eigen::Index>(params.input_width());
  ForwardCache cache;
  Matrix batch_in;
  Matrix batch_targets;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const auto len = static_cast<Eigen::Index>(std::min(config.batch_size, order.size() - start));
        batch_in.resize(width, len);
        batch_targets.resize(static_cast<Eigen::Index>(m), len);
        for (Eigen::Index c = 0; c < len; ++c) {
          const auto s = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(c)]);
          batch_in.col(c) = train_set.inputs.col(s);
          batch_targets.col(c) = targets.col(s);
        }
        const Matrix logits = forward(params, batch_in, Mode::train, config.dropout_p, &rng, &cache);
        const MlpGradients grads = backward(params, cache, softmax_columns(logits), batch_targets);
        adam_step(params, grads, adam, config);
      }
    } catch (const NumericalError& e) {
      result.diverged = true;
      result.message = fmt::format("epoch {}: {}", epoch, e.what());
      break;
    }

    const EpochRecord record{epoch, dataset_nll(params, train_set), dataset_nll(params, val_set)};
    if (!std::isfinite(record.val_nll)) {
      result.diverged = true;
      result.message = fmt::format("epoch {}: validation NLL is not finite", epoch);
      break;
    }
    result.history.push_back(record);
    if (record.val_nll < best_val - config.min_improvement) {
      best_val = record.val_nll;
      result.best = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

nlohmann::ordered_json params_to_json(const MlpParams& params) {
  nlohmann::ordered_json j;
  j["widths"] = params.widths();
  auto layers = nlohmann::ordered_json::array();
  for (const auto& layer : params.layers) {
    nlohmann::ordered_json l;
    l["rows"] = layer.weight.rows();
    l["cols"] = layer.weight.cols();
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
    l["weight"] = std::move(w);
    l["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j;
}

MlpParams params_from_json(const nlohmann::json& j) {
  try {
    MlpParams p;
    for (const auto& l : j.at("layers")) {
      const auto rows = l.at("rows").get<Eigen::Index>();
      const auto cols = l.at("cols").get<Eigen::Index>();
      const auto w = l.at("weight").get<std::vector<double>>();
      const auto b = l.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
        throw InputError("checkpoint layer has inconsistent sizes");
      DenseLayer layer{Matrix(rows, cols), Eigen::Map<const Vector>(b.data(), rows)};
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      if (!p.layers.empty() && p.layers.back().weight.rows() != cols)
        throw InputError("checkpoint layers have incompatible widths");
      p.layers.push_back(std::move(layer));
    }
    if (p.layers.empty()) throw InputError("checkpoint has no layers");
    if (!p.all_finite()) throw InputError("checkpoint contains non-finite parameters");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("invalid checkpoint: {}", e.what()));
  }
}

nlohmann::ordered_json config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["weight_decay"] = c.weight_decay;
  j["grad_clip_norm"] = c.grad_clip_norm;
  j["dropout_p"] = c.dropout_p;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["label_smoothing_eps"] = c.label_smoothing_eps;
  j["min_improvement"] = c.min_improvement;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.label_smoothing_eps = j.value("label_smoothing_eps", c.label_smoothing_eps);
  c.min_improvement = j.value("min_improvement", c.min_improvement);
  return c;
}

}  // namespace inhomarkov
