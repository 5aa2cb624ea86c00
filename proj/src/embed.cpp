#include "gcp/embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gcp/binary_io.hpp"
#include "gcp/error.hpp"
#include "gcp/simd/kernels.hpp"

namespace gcp {
namespace {

// y = W x + b, W is rows x x.size()
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) y[r] = simd::dot(w.subspan(r * cols, cols), x) + b[r];
}

// dx += W^T dy
void affine_backward_input(std::span<const double> w, std::span<const double> dy, std::span<double> dx) {
  const std::size_t cols = dx.size();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    if (dy[r] != 0.0) simd::axpy(dy[r], w.subspan(r * cols, cols), dx);
  }
}

// gW += scale * dy x^T, gb += scale * dy
void affine_backward_params(std::span<const double> dy, std::span<const double> x, std::span<double> gw,
                            std::span<double> gb, double scale) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double s = scale * dy[r];
    if (s == 0.0) continue;
    simd::axpy(s, x, gw.subspan(r * cols, cols));
    gb[r] += s;
  }
}

void relu(std::span<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

struct BranchTrace {
  std::vector<double> pre;     // W1 x + b1
  std::vector<double> hidden;  // relu(pre)
  std::vector<double> out;     // feature
};

BranchTrace branch_forward(const EmbeddingModel& m, std::span<const double> x) {
  const auto& d = m.dims();
  if (x.size() != d.descriptor) {
    throw Error("embed: descriptor length " + std::to_string(x.size()) + " != model input " +
                std::to_string(d.descriptor));
  }
  BranchTrace t;
  t.pre.resize(d.feature);
  affine(m.block(EmbeddingModel::W1), m.block(EmbeddingModel::B1), x, t.pre);
  t.hidden = t.pre;
  relu(t.hidden);
  t.out.resize(d.feature);
  affine(m.block(EmbeddingModel::W2), m.block(EmbeddingModel::B2), t.hidden, t.out);
  return t;
}

void branch_backward(const EmbeddingModel& m, std::span<const double> x, const BranchTrace& t,
                     std::span<const double> dout, std::span<double> grad, double scale) {
  const auto& d = m.dims();
  auto g = [&](EmbeddingModel::Block b, std::size_t len) { return grad.subspan(m.block_offset(b), len); };
  affine_backward_params(dout, t.hidden, g(EmbeddingModel::W2, d.feature * d.feature), g(EmbeddingModel::B2, d.feature),
                         scale);
  std::vector<double> dh(d.feature, 0.0);
  affine_backward_input(m.block(EmbeddingModel::W2), dout, dh);
  for (std::size_t i = 0; i < dh.size(); ++i) {
    if (t.pre[i] <= 0.0) dh[i] = 0.0;
  }
  affine_backward_params(dh, x, g(EmbeddingModel::W1, d.feature * d.descriptor), g(EmbeddingModel::B1, d.feature),
                         scale);
}

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(std::string("pair_loss: non-finite ") + what);
  }
}

}  // namespace

EmbeddingModel::EmbeddingModel(EmbeddingDims dims) : dims_(dims) {
  if (dims.descriptor == 0 || dims.feature == 0 || dims.head_hidden == 0) {
    throw Error("EmbeddingModel: dimensions must be positive");
  }
  const std::size_t D = dims.descriptor, F = dims.feature, H = dims.head_hidden;
  size_ = {F * D, F, F * F, F, H * 2 * F, H, 2 * H, 2};
  std::size_t off = 0;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    offset_[b] = off;
    off += size_[b];
  }
  params_.assign(off, 0.0);
}

EmbeddingModel EmbeddingModel::glorot(EmbeddingDims dims, std::uint64_t seed) {
  EmbeddingModel m(dims);
  std::mt19937_64 rng(seed);
  const std::size_t D = dims.descriptor, F = dims.feature, H = dims.head_hidden;
  const std::array<std::pair<Block, std::array<std::size_t, 2>>, 4> layers{{
      {W1, {D, F}},
      {W2, {F, F}},
      {W3, {2 * F, H}},
      {W4, {H, 2}},
  }};
  for (const auto& [block, fans] : layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fans[0] + fans[1]));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& w : m.block(block)) w = u(rng);
  }
  return m;
}

std::vector<double> embed(const EmbeddingModel& model, std::span<const double> descriptor) {
  return branch_forward(model, descriptor).out;
}

std::vector<double> embed(const EmbeddingModel& model, std::span<const float> descriptor) {
  const auto x = to_double(descriptor);
  return embed(model, std::span<const double>(x));
}

std::vector<double> embed_all(const EmbeddingModel& model, const DescriptorSet& descriptors) {
  const std::size_t F = model.dims().feature;
  std::vector<double> out(descriptors.count() * F);
  for (std::size_t i = 0; i < descriptors.count(); ++i) {
    const auto f = embed(model, descriptors.row(i));
    std::copy(f.begin(), f.end(), out.begin() + static_cast<std::ptrdiff_t>(i * F));
  }
  return out;
}

namespace {

struct HeadTrace {
  std::vector<double> joint;  // [f_i ; f_j]
  std::vector<double> pre;    // W3 z + b3
  std::vector<double> hidden;
  std::array<double, 2> logits{};
};

HeadTrace head_forward(const EmbeddingModel& m, std::span<const double> fi, std::span<const double> fj) {
  HeadTrace t;
  t.joint.reserve(fi.size() + fj.size());
  t.joint.insert(t.joint.end(), fi.begin(), fi.end());
  t.joint.insert(t.joint.end(), fj.begin(), fj.end());
  t.pre.resize(m.dims().head_hidden);
  affine(m.block(EmbeddingModel::W3), m.block(EmbeddingModel::B3), t.joint, t.pre);
  t.hidden = t.pre;
  relu(t.hidden);
  affine(m.block(EmbeddingModel::W4), m.block(EmbeddingModel::B4), t.hidden, t.logits);
  return t;
}

}  // namespace

std::array<double, 2> pair_logits(const EmbeddingModel& model, std::span<const double> desc_i,
                                  std::span<const double> desc_j) {
  const auto bi = branch_forward(model, desc_i);
  const auto bj = branch_forward(model, desc_j);
  return head_forward(model, bi.out, bj.out).logits;
}

double accumulate_pair_gradient(const EmbeddingModel& model, std::span<const double> desc_i,
                                std::span<const double> desc_j, int label, std::span<double> grad, double scale) {
  if (label != 0 && label != 1) throw Error("pair_loss: label must be 0 or 1");
  if (grad.size() != model.parameter_count()) throw Error("pair_loss: gradient buffer has wrong size");
  const auto& d = model.dims();
  const auto bi = branch_forward(model, desc_i);
  const auto bj = branch_forward(model, desc_j);
  const auto head = head_forward(model, bi.out, bj.out);
  check_finite(head.logits, "logits");

  // Stable softmax cross-entropy.
  const double mx = std::max(head.logits[0], head.logits[1]);
  const double e0 = std::exp(head.logits[0] - mx), e1 = std::exp(head.logits[1] - mx);
  const double lse = mx + std::log(e0 + e1);
  const double loss = lse - head.logits[static_cast<std::size_t>(label)];
  std::array<double, 2> dlogits{e0 / (e0 + e1), e1 / (e0 + e1)};
  dlogits[static_cast<std::size_t>(label)] -= 1.0;

  auto g = [&](EmbeddingModel::Block b, std::size_t len) { return grad.subspan(model.block_offset(b), len); };
  const std::size_t F = d.feature, H = d.head_hidden;

  affine_backward_params(dlogits, head.hidden, g(EmbeddingModel::W4, 2 * H), g(EmbeddingModel::B4, 2), scale);
  std::vector<double> du(H, 0.0);
  affine_backward_input(model.block(EmbeddingModel::W4), dlogits, du);
  for (std::size_t i = 0; i < H; ++i) {
    if (head.pre[i] <= 0.0) du[i] = 0.0;
  }
  affine_backward_params(du, head.joint, g(EmbeddingModel::W3, H * 2 * F), g(EmbeddingModel::B3, H), scale);
  std::vector<double> dz(2 * F, 0.0);
  affine_backward_input(model.block(EmbeddingModel::W3), du, dz);
  check_finite(dz, "feature gradient");

  const std::span<const double> dzs(dz);
  branch_backward(model, desc_i, bi, dzs.first(F), grad, scale);
  branch_backward(model, desc_j, bj, dzs.subspan(F, F), grad, scale);
  return loss;
}

PairLoss pair_loss(const EmbeddingModel& model, std::span<const double> desc_i, std::span<const double> desc_j,
                   int label) {
  PairLoss out;
  out.grad.assign(model.parameter_count(), 0.0);
  out.loss = accumulate_pair_gradient(model, desc_i, desc_j, label, out.grad, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// training

void TrainConfig::validate() const {
  if (positives_per_batch == 0 && negatives_per_batch == 0) throw Error("train: empty batch");
  if ((positives_per_batch + negatives_per_batch) % 2 != 0) throw Error("train: batch size must be even");
  if (learning_rate < 0.0 || !std::isfinite(learning_rate)) throw Error("train: learning rate must be >= 0");
  if (!(lr_drop_factor > 0.0)) throw Error("train: lr drop factor must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw Error("train: momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw Error("train: weight decay must be >= 0");
}

double TrainConfig::rate_at(std::size_t step) const {
  if (lr_drop_step == 0) return learning_rate;
  return learning_rate * std::pow(lr_drop_factor, static_cast<double>(step / lr_drop_step));
}

PairSource pool_source(const PairPool& pool, std::size_t n_pos, std::size_t n_neg) {
  return [&pool, n_pos, n_neg](std::size_t, std::mt19937_64& rng) { return pool.draw(n_pos, n_neg, rng); };
}

PairSource sampler_source(const PairSampler& sampler, std::size_t n_pos, std::size_t n_neg) {
  return [&sampler, n_pos, n_neg](std::size_t, std::mt19937_64& rng) { return sampler.sample(n_pos, n_neg, rng); };
}

TrainResult train(EmbeddingModel model, const DescriptorSet& descriptors, const PairSource& source,
                  const TrainConfig& config) {
  config.validate();
  if (descriptors.dim != model.dims().descriptor) {
    throw Error("train: descriptor dim " + std::to_string(descriptors.dim) + " != model input " +
                std::to_string(model.dims().descriptor));
  }
  const std::size_t P = model.parameter_count();
  std::vector<double> velocity(P, 0.0), grad(P, 0.0);
  std::vector<std::vector<double>> rows(descriptors.count());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = to_double(descriptors.row(i));

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.loss_trace.reserve(config.max_iterations);
  for (std::size_t step = 0; step < config.max_iterations; ++step) {
    const PairBatch batch = source(step, rng);
    if (batch.pairs.empty()) throw Error("train: pair source returned an empty batch at step " + std::to_string(step));
    std::fill(grad.begin(), grad.end(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.pairs.size());
    double loss = 0.0;
    for (const Pair& p : batch.pairs) {
      if (p.i >= rows.size() || p.j >= rows.size()) {
        throw Error("train: pair (" + std::to_string(p.i) + "," + std::to_string(p.j) + ") out of range at step " +
                    std::to_string(step));
      }
      try {
        loss += accumulate_pair_gradient(model, rows[p.i], rows[p.j], p.label, grad, inv);
      } catch (const Error& e) {
        throw Error("train: diverged at step " + std::to_string(step) + " (" + e.what() + ")");
      }
    }
    loss *= inv;
    if (!std::isfinite(loss)) throw Error("train: diverged at step " + std::to_string(step) + " (non-finite loss)");
    result.loss_trace.push_back(loss);

    const double rate = config.rate_at(step);
    auto w = model.parameters();
    for (std::size_t k = 0; k < P; ++k) {
      velocity[k] = config.momentum * velocity[k] - rate * (grad[k] + config.weight_decay * w[k]);
      w[k] += velocity[k];
    }
    for (double x : w) {
      if (!std::isfinite(x)) throw Error("train: diverged at step " + std::to_string(step) + " (non-finite parameter)");
    }
  }
  result.model = std::move(model);
  return result;
}

double pair_accuracy(const EmbeddingModel& model, const DescriptorSet& descriptors, std::span<const Pair> pairs) {
  if (pairs.empty()) throw Error("pair_accuracy: no pairs");
  const auto features = embed_all(model, descriptors);
  const std::size_t F = model.dims().feature;
  const std::span<const double> fs(features);
  std::size_t correct = 0;
  for (const Pair& p : pairs) {
    const auto logits = head_forward(model, fs.subspan(p.i * F, F), fs.subspan(p.j * F, F)).logits;
    const int predicted = logits[1] > logits[0] ? 1 : 0;
    correct += predicted == p.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// persistence

std::string encode_model(const EmbeddingModel& model) {
  io::ByteWriter w;
  w.magic("GCEM");
  w.u32(static_cast<std::uint32_t>(model.dims().descriptor));
  w.u32(static_cast<std::uint32_t>(model.dims().feature));
  w.u32(static_cast<std::uint32_t>(model.dims().head_hidden));
  w.f64s(model.parameters());
  return w.bytes();
}

EmbeddingModel decode_model(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("GCEM");
  EmbeddingDims dims;
  dims.descriptor = r.u32();
  dims.feature = r.u32();
  dims.head_hidden = r.u32();
  EmbeddingModel m(dims);
  r.f64s(m.parameters());
  r.expect_end();
  return m;
}

void write_model(const EmbeddingModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_model(model));
}

EmbeddingModel read_model(const std::filesystem::path& path) {
  return decode_model(io::read_file(path), path.string());
}

std::string encode_loss_trace(std::span<const double> trace) {
  std::string out;
  char buf[32];
  for (double v : trace) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out += buf;
  }
  return out;
}

}  // namespace gcp
