#ifndef RBR_DECODERS_HPP_
#define RBR_DECODERS_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbr/core.hpp"

namespace rbr {

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

/// Rows are the region vectors' values.
Matrix tokens_from_vectors(std::span<const RegionVector> vectors);

struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
};

enum class DecoderKind : std::uint32_t { kLinear = 0, kMlp = 1, kTransformer = 2 };

std::string_view decoder_kind_name(DecoderKind kind);
DecoderKind parse_decoder_kind(std::string_view name);

struct DecoderSpec {
  DecoderKind kind = DecoderKind::kLinear;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  /// MLP hidden width.
  std::size_t hidden = 1000;
  /// Transformer depth and head count.
  std::size_t blocks = 1;
  std::size_t heads = 8;

  void validate() const;
};

/// Per-token supervision. Tokens with label < 0 or weight 0 carry no loss.
struct TokenTarget {
  std::int32_t label = -1;
  double weight = 0.0;
};

/// One decoder input: T tokens, an optional attention mask (1 = real token;
/// empty means all real) and per-token targets.
struct Sequence {
  Matrix tokens;
  std::vector<std::uint8_t> mask;
  std::vector<TokenTarget> targets;
};

class Decoder {
 public:
  virtual ~Decoder() = default;

  DecoderKind kind() const { return spec_.kind; }
  const DecoderSpec& spec() const { return spec_; }

  /// Per-token logits (T x C). Throws kInvalidArgument on a width mismatch.
  virtual Matrix forward(const Matrix& tokens,
                         std::span<const std::uint8_t> mask = {}) const = 0;

  /// Forward pass, weighted cross-entropy of the targeted tokens divided by
  /// `weight_norm`, and backward pass adding into every Param::grad. Returns
  /// this sequence's contribution to the loss.
  virtual double accumulate_gradients(const Sequence& sequence,
                                      double weight_norm) = 0;

  virtual std::unique_ptr<Decoder> clone() const = 0;

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  void zero_grad();
  std::size_t num_parameters() const;

 protected:
  explicit Decoder(const DecoderSpec& spec) : spec_(spec) {}
  void check_input(const Matrix& tokens, std::span<const std::uint8_t> mask) const;

  DecoderSpec spec_;
  std::vector<Param> params_;
};

/// Truncated-normal(0.02) weights, zero biases, unit LayerNorm gains.
std::unique_ptr<Decoder> make_decoder(const DecoderSpec& spec, std::uint64_t seed);

/// Row-wise softmax of the logits.
Matrix softmax_rows(const Matrix& logits);

struct LossGrad {
  double loss = 0.0;
  Matrix dlogits;
};

/// Stable log-softmax cross entropy: sum_i w_i CE_i / weight_norm and its
/// gradient with respect to the logits.
LossGrad softmax_cross_entropy(const Matrix& logits,
                               std::span<const TokenTarget> targets,
                               double weight_norm);

/// Sum of target weights over the batch.
double total_weight(std::span<const Sequence> batch);

/// Zeroes gradients, then fills them with d(loss)/d(param) for the
/// pixel-weighted loss sum_i w_i CE_i / sum_i w_i over the whole batch.
/// Throws kEmptyBatch when the batch carries no weight.
double loss_and_grads(Decoder& decoder, std::span<const Sequence> batch);

/// Same loss without touching gradients.
double evaluate_loss(const Decoder& decoder, std::span<const Sequence> batch);

// ---- training ---------------------------------------------------------------

enum class OptimizerKind { kSgd, kAdamW };

struct TrainConfig {
  double lr = 5e-4;
  /// Sequences per optimisation step (regions for per-token decoders fed one
  /// region per sequence, images for the transformer).
  std::size_t batch = 32;
  std::size_t epochs = 20;
  OptimizerKind optimizer = OptimizerKind::kAdamW;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Linear learning-rate warm-up length in epochs.
  double warmup_epochs = 0.0;
  /// Epochs without validation improvement before stopping.
  std::size_t patience = 3;
  std::uint64_t seed = 0;

  void validate() const;

  // Presets for region segmentation, multi-view scenes and video activity
  // classification.
  static TrainConfig segmentation_linear();
  static TrainConfig segmentation_mlp();
  static TrainConfig segmentation_transformer();
  static TrainConfig multi_view();
  static TrainConfig video();
};

struct TrainResult {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

/// Mini-batch training with a seeded shuffle. With a validation set, training
/// stops once the validation loss has not decreased for `patience` epochs and
/// the best parameters are restored. Throws kDivergence on a non-finite loss.
TrainResult train(Decoder& decoder, std::span<const Sequence> train_set,
                  std::span<const Sequence> val_set, const TrainConfig& config);

}  // namespace rbr

#endif  // RBR_DECODERS_HPP_
