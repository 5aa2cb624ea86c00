#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "gcp/dataset.hpp"
#include "gcp/pairs.hpp"

namespace gcp {

struct EmbeddingDims {
  std::size_t descriptor = 64;   // D
  std::size_t feature = 32;      // F; also the branch hidden width
  std::size_t head_hidden = 16;  // H

  bool operator==(const EmbeddingDims&) const = default;
};

// Siamese context network over precomputed descriptors.
//
//   branch:  x (D) -> relu(W1 x + b1) (F) -> W2 h + b2 (F)       = context feature
//   head:    [f_i ; f_j] (2F) -> relu(W3 z + b3) (H) -> W4 u + b4 (2 logits)
//
// Both branches read the same W1/b1/W2/b2 storage. Parameters live in one
// flat vector in the order W1, b1, W2, b2, W3, b3, W4, b4 (matrices
// row-major, output-major); checkpoints use exactly this order.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  explicit EmbeddingModel(EmbeddingDims dims);  // all zeros

  // Uniform in +-sqrt(6 / (fan_in + fan_out)) for weights, zero biases.
  static EmbeddingModel glorot(EmbeddingDims dims, std::uint64_t seed);

  const EmbeddingDims& dims() const { return dims_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  enum Block : std::size_t { W1, B1, W2, B2, W3, B3, W4, B4, kBlocks };
  std::span<double> block(Block b) { return std::span<double>(params_).subspan(offset_[b], size_[b]); }
  std::span<const double> block(Block b) const {
    return std::span<const double>(params_).subspan(offset_[b], size_[b]);
  }
  std::size_t block_offset(Block b) const { return offset_[b]; }

  bool operator==(const EmbeddingModel& o) const { return dims_ == o.dims_ && params_ == o.params_; }

 private:
  EmbeddingDims dims_;
  std::array<std::size_t, kBlocks> offset_{};
  std::array<std::size_t, kBlocks> size_{};
  std::vector<double> params_;
};

std::vector<double> embed(const EmbeddingModel& model, std::span<const double> descriptor);
std::vector<double> embed(const EmbeddingModel& model, std::span<const float> descriptor);

// Embeds every row; result is count x F, row-major.
std::vector<double> embed_all(const EmbeddingModel& model, const DescriptorSet& descriptors);

std::array<double, 2> pair_logits(const EmbeddingModel& model, std::span<const double> desc_i,
                                  std::span<const double> desc_j);

// Softmax cross-entropy of the pair head against `label` (1 = similar).
// `grad` (size parameter_count) is incremented by scale * dLoss/dParams;
// branch gradients collect the contributions of both inputs. Returns the
// unscaled loss.
double accumulate_pair_gradient(const EmbeddingModel& model, std::span<const double> desc_i,
                                std::span<const double> desc_j, int label, std::span<double> grad,
                                double scale = 1.0);

struct PairLoss {
  double loss = 0.0;
  std::vector<double> grad;
};
PairLoss pair_loss(const EmbeddingModel& model, std::span<const double> desc_i, std::span<const double> desc_j,
                   int label);

struct TrainConfig {
  std::size_t positives_per_batch = 8;
  std::size_t negatives_per_batch = 8;
  double learning_rate = 0.01;
  double lr_drop_factor = 0.1;
  std::size_t lr_drop_step = 0;  // 0 = constant rate
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t max_iterations = 2000;
  std::uint64_t seed = 0;

  void validate() const;
  double rate_at(std::size_t step) const;
};

// Supplies the mini-batch for a step; `rng` is the trainer's single stream.
using PairSource = std::function<PairBatch(std::size_t step, std::mt19937_64& rng)>;

PairSource pool_source(const PairPool& pool, std::size_t n_pos, std::size_t n_neg);
PairSource sampler_source(const PairSampler& sampler, std::size_t n_pos, std::size_t n_neg);

struct TrainResult {
  EmbeddingModel model;
  std::vector<double> loss_trace;  // mean batch loss per step
};

// Mini-batch SGD with momentum and L2 weight decay:
//   v <- momentum * v - rate * (g + weight_decay * w);  w <- w + v
TrainResult train(EmbeddingModel model, const DescriptorSet& descriptors, const PairSource& source,
                  const TrainConfig& config);

// Fraction of pairs whose argmax logit matches the label.
double pair_accuracy(const EmbeddingModel& model, const DescriptorSet& descriptors, std::span<const Pair> pairs);

// "GCEM", u32 D, u32 F, u32 H, then parameter_count little-endian f64.
std::string encode_model(const EmbeddingModel& model);
EmbeddingModel decode_model(std::string_view bytes, const std::string& source);
void write_model(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel read_model(const std::filesystem::path& path);

std::string encode_loss_trace(std::span<const double> trace);

}  // namespace gcp
