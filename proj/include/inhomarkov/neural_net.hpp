#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "inhomarkov/common.hpp"
#include "inhomarkov/rng.hpp"

namespace inhomarkov {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Feed-forward network: hidden layers are affine -> GELU -> dropout, the last
/// layer is affine only and produces logits.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_width() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols()); }
  std::size_t output_width() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows()); }
  std::vector<std::size_t> widths() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  /// Same shapes, all zeros.
  MlpParams zeros_like() const;
};

/// Gradients share the parameter layout.
using MlpGradients = MlpParams;

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;
  double grad_clip_norm = 5.0;
  double dropout_p = 0.2;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  double label_smoothing_eps = 0.0;  // 0 disables; 0.05 is the usual setting when on
  double min_improvement = 1e-5;

  void validate() const;
};

struct AdamState {
  MlpParams first_moment;
  MlpParams second_moment;
  std::int64_t step = 0;

  static AdamState for_params(const MlpParams& params);
};

/// Hidden widths of the shared row estimator.
inline const std::vector<std::size_t> kHiddenWidths{64, 128, 256, 128, 64};

/// input -> 64 -> 128 -> 256 -> 128 -> 64 -> output.
std::vector<std::size_t> default_widths(std::size_t input, std::size_t output);

/// Glorot-uniform weights, zero biases.
MlpParams init_params(std::span<const std::size_t> widths, std::uint64_t seed);

/// Exact GELU, x * Phi(x).
double gelu(double x);
double gelu_derivative(double x);

enum class Mode { train, eval };

/// Intermediate values needed by `backward`. Column c of every matrix belongs
/// to sample c of the batch.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // input to each layer
  std::vector<Matrix> pre_activations;  // hidden layers only
  std::vector<Matrix> masks;  // hidden layers; entries 0 or 1/(1-p). Empty in eval mode.
};

/// Logits for a batch (inputs: width x batch). Train mode draws inverted
/// dropout masks from `rng`; eval mode is deterministic and ignores it.
Matrix forward(const MlpParams& params, const Matrix& inputs, Mode mode, double dropout_p = 0.0, Rng* rng = nullptr,
               ForwardCache* cache = nullptr);

/// Train-mode forward pass replaying recorded dropout masks.
Matrix forward_with_masks(const MlpParams& params, const Matrix& inputs, const std::vector<Matrix>& masks,
                          ForwardCache* cache = nullptr);

/// Single-sample eval-mode logits.
Vector forward_eval(const MlpParams& params, const Vector& input);

/// Max-subtracted softmax.
Vector softmax(const Vector& logits);
/// Column-wise softmax of a logits batch.
Matrix softmax_columns(const Matrix& logits);

/// 1-2*eps at the label, eps on each neighbour; a missing neighbour at the
/// boundary folds its mass back onto the label.
Vector smoothed_targets(std::size_t label, std::size_t m, double eps);

/// -sum q log p with p floored at 1e-12.
double cross_entropy(const Vector& probs, const Vector& target);

/// Gradient of the batch-mean cross-entropy. `probs` is softmax of the
/// forward logits, `targets` holds one target distribution per column.
MlpGradients backward(const MlpParams& params, const ForwardCache& cache, const Matrix& probs, const Matrix& targets);

/// Global-norm clipping, decoupled weight decay, then bias-corrected Adam.
/// Throws NumericalError (leaving params and state untouched) on a non-finite gradient.
void adam_step(MlpParams& params, const MlpGradients& grads, AdamState& state, const TrainConfig& config);

/// Inputs as columns (width x N) with integer targets.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;
  double val_nll = 0.0;
};

struct TrainResult {
  MlpParams best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string message;
};

/// Eval-mode mean NLL of hard labels.
double dataset_nll(const MlpParams& params, const Dataset& data);

/// Mini-batch Adam with early stopping on validation NLL; returns the best
/// epoch's parameters. Deterministic for a fixed config.seed.
TrainResult train(const MlpParams& init, const Dataset& train_set, const Dataset& val_set, const TrainConfig& config);

/// Checkpoint encoding. Doubles are written in shortest round-trip form, so a
/// save/load cycle is bit-exact.
nlohmann::ordered_json params_to_json(const MlpParams& params);
MlpParams params_from_json(const nlohmann::json& j);

nlohmann::ordered_json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

}  // namespace inhomarkov
