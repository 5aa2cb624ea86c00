#pragma once

// Generators and brute-force oracles shared by the unit tests and the
// acceptance runner. The oracles deliberately avoid the library's helpers
// (no floor_band, no SIMD kernels, no histogram buffers) and test pixel
// membership one pixel at a time.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gcp/dataset.hpp"
#include "gcp/embed.hpp"
#include "gcp/pairs.hpp"
#include "gcp/encode.hpp"
#include "gcp/prior.hpp"
#include "gcp/pyramid.hpp"
#include "gcp/retrieval.hpp"
#include "gcp/synthetic.hpp"

namespace gcp::test {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("gcp_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline LabelMap random_label_map(std::mt19937_64& rng, std::size_t max_h, std::size_t max_w, std::size_t num_classes,
                                 double unlabeled_rate = 0.1) {
  std::uniform_int_distribution<std::size_t> hd(3, max_h), wd(3, max_w);
  std::uniform_int_distribution<int> cls(1, static_cast<int>(num_classes) - 1);
  std::bernoulli_distribution hole(unlabeled_rate);
  const std::size_t h = hd(rng), w = wd(rng);
  LabelMap m(h, w);
  // Blocky content so that classes cluster spatially like real annotations.
  const auto base = static_cast<ClassId>(cls(rng));
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) m.at(r, c) = base;
  }
  std::uniform_int_distribution<std::size_t> nblobs(0, 4);
  for (std::size_t b = nblobs(rng); b > 0; --b) {
    const auto v = static_cast<ClassId>(cls(rng));
    const std::size_t r0 = std::uniform_int_distribution<std::size_t>(0, h - 1)(rng);
    const std::size_t c0 = std::uniform_int_distribution<std::size_t>(0, w - 1)(rng);
    const std::size_t r1 = std::uniform_int_distribution<std::size_t>(r0, h - 1)(rng);
    const std::size_t c1 = std::uniform_int_distribution<std::size_t>(c0, w - 1)(rng);
    for (std::size_t r = r0; r <= r1; ++r) {
      for (std::size_t c = c0; c <= c1; ++c) m.at(r, c) = v;
    }
  }
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (hole(rng)) m.at(r, c) = kUnlabeled;
    }
  }
  return m;
}

// Histogram of one pyramid block, computed by testing every pixel for
// membership. Blocks: 0 = whole image, 1 + 3*i + j = grid cell (i, j).
inline std::vector<double> naive_block(const LabelMap& m, std::size_t block, std::size_t C,
                                       const std::vector<double>& weights, bool normalize) {
  std::vector<double> h(C, 0.0);
  for (std::size_t r = 0; r < m.height(); ++r) {
    for (std::size_t c = 0; c < m.width(); ++c) {
      bool inside = true;
      if (block > 0) {
        const std::size_t bi = (block - 1) / 3, bj = (block - 1) % 3;
        const std::size_t H = m.height(), W = m.width();
        inside = bi * H / 3 <= r && r < (bi + 1) * H / 3 && bj * W / 3 <= c && c < (bj + 1) * W / 3;
      }
      const ClassId v = m.at(r, c);
      if (inside && v != kUnlabeled) h[v] += 1.0;
    }
  }
  if (!weights.empty()) {
    for (std::size_t k = 0; k < C; ++k) h[k] /= weights[k];
  }
  if (normalize) {
    double s = 0.0;
    for (double x : h) s += x;
    if (s > 0.0) {
      for (double& x : h) x /= s;
    }
  }
  return h;
}

inline double naive_chi_square(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double s = a[k] + b[k];
    if (s == 0.0) continue;
    d += (a[k] - b[k]) * (a[k] - b[k]) / s;
  }
  return d;
}

inline double naive_distance(const LabelMap& a, const LabelMap& b, std::size_t C,
                             const std::vector<double>& weights = {}, bool normalize = true) {
  double d = 0.0;
  for (std::size_t s = 0; s < 10; ++s) {
    d += naive_chi_square(naive_block(a, s, C, weights, normalize), naive_block(b, s, C, weights, normalize));
  }
  return d;
}

// Symmetric matrix of Euclidean distances between random points; integer
// coordinates make ties likely, which exercises the tie-break rule.
inline DistanceMatrix random_distance_matrix(std::mt19937_64& rng, std::size_t n, bool ties = false) {
  std::vector<std::array<double, 3>> pts(n);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_int_distribution<int> ui(0, 3);
  for (auto& p : pts) {
    for (double& x : p) x = ties ? ui(rng) : u(rng);
  }
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
      d.at(i, j) = std::sqrt(s);
    }
  }
  return d;
}

// 1-based rank of j in row i by full sort on (distance, index).
inline std::size_t sorted_rank(const DistanceMatrix& d, std::size_t i, std::size_t j) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (k != i) order.push_back(k);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d.at(i, x) < d.at(i, y); });
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), j) - order.begin()) + 1;
}

inline ClassTable make_classes(std::size_t C) {
  ClassTable t;
  for (std::size_t c = 0; c < C; ++c) {
    t.names.push_back(c == 0 ? "unlabeled" : "c" + std::to_string(c));
    t.kinds.push_back(c == 0 ? ClassKind::unlabeled : (c % 2 ? ClassKind::stuff : ClassKind::things));
  }
  return t;
}

// Query Q: class 1 with one class-2 pixel in every level-2 block (12x12).
// R: the same rare pixels on a class-3 background. D: plain class 1. Fillers
// (half plain class 1, half plain class 3) make classes 1 and 3 common so
// f(2) = 2 is small by comparison.
struct RareClassScenario {
  Dataset dataset;
  std::size_t q = 0, r = 1, d = 2;
};

inline RareClassScenario rare_class_scenario(std::size_t fillers = 100) {
  RareClassScenario s;
  auto& ds = s.dataset;
  ds.classes = make_classes(4);
  auto with_rare = [](ClassId background) {
    LabelMap m(12, 12, background);
    for (std::size_t bi = 0; bi < 3; ++bi) {
      for (std::size_t bj = 0; bj < 3; ++bj) m.at(bi * 4 + 1, bj * 4 + 2) = 2;
    }
    return m;
  };
  ds.labels = {with_rare(1), with_rare(3), LabelMap(12, 12, 1)};
  for (std::size_t k = 0; k < fillers; ++k) ds.labels.emplace_back(12, 12, k % 2 ? ClassId{3} : ClassId{1});
  for (std::size_t i = 0; i < ds.labels.size(); ++i) ds.images.push_back({"img" + std::to_string(i), "", "train", {}});
  return s;
}

// Spatial prior by visiting every pixel of every map once per cell. Images
// are accumulated in retrieval order, matching the library's summation order
// so the comparison can be exact.
inline Tensor3<double> oracle_spatial_prior(const std::vector<LabelMap>& maps, std::size_t C, std::size_t S) {
  Tensor3<double> out(C, S, S);
  for (std::size_t p = 0; p < S; ++p) {
    for (std::size_t q = 0; q < S; ++q) {
      std::vector<double> sum(C, 0.0);
      std::size_t contributing = 0;
      for (const auto& m : maps) {
        std::vector<std::size_t> n(C, 0);
        std::size_t labelled = 0;
        for (std::size_t r = 0; r < m.height(); ++r) {
          for (std::size_t c = 0; c < m.width(); ++c) {
            const std::size_t H = m.height(), W = m.width();
            const bool in_cell = p * H / S <= r && r < (p + 1) * H / S && q * W / S <= c && c < (q + 1) * W / S;
            if (!in_cell || m.at(r, c) == kUnlabeled) continue;
            ++n[m.at(r, c)];
            ++labelled;
          }
        }
        if (labelled == 0) continue;
        ++contributing;
        for (std::size_t k = 1; k < C; ++k) sum[k] += static_cast<double>(n[k]) / static_cast<double>(labelled);
      }
      for (std::size_t k = 0; k < C; ++k) {
        out.at(k, p, q) = contributing == 0 ? 0.0 : sum[k] / static_cast<double>(contributing);
      }
    }
  }
  return out;
}

inline std::vector<double> oracle_global_prior(const std::vector<LabelMap>& maps, const std::vector<bool>& include) {
  std::vector<double> g(include.size(), 0.0);
  const double kp = static_cast<double>(maps.size());
  for (const auto& m : maps) {
    for (std::size_t k = 1; k < include.size(); ++k) {
      if (!include[k]) continue;
      std::size_t n = 0;
      for (std::size_t r = 0; r < m.height(); ++r) {
        for (std::size_t c = 0; c < m.width(); ++c) n += m.at(r, c) == k;
      }
      g[k] += static_cast<double>(n) / (static_cast<double>(m.height() * m.width()) * kp);
    }
  }
  return g;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

inline EmbeddingModel random_model(std::mt19937_64& rng, EmbeddingDims dims) {
  EmbeddingModel m(dims);
  std::normal_distribution<double> g(0.0, 0.5);
  for (double& p : m.parameters()) p = g(rng);
  return m;
}

inline double relative_error(double a, double b) {
  // Floor keeps entries that are zero up to rounding from dominating.
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Largest relative error between the analytic gradient and central finite
// differences of the pair loss.
inline double gradient_check(const EmbeddingModel& model, std::span<const double> di, std::span<const double> dj,
                             int label, double h = 1e-5) {
  const auto analytic = pair_loss(model, di, dj, label).grad;
  EmbeddingModel probe = model;
  double worst = 0.0;
  for (std::size_t k = 0; k < probe.parameter_count(); ++k) {
    const double saved = probe.parameters()[k];
    probe.parameters()[k] = saved + h;
    const double up = pair_loss(probe, di, dj, label).loss;
    probe.parameters()[k] = saved - h;
    const double down = pair_loss(probe, di, dj, label).loss;
    probe.parameters()[k] = saved;
    worst = std::max(worst, relative_error(analytic[k], (up - down) / (2.0 * h)));
  }
  return worst;
}

// Same-padded convolution written as the textbook six-deep loop nest.
template <class T>
Tensor3<T> oracle_convolve(const Tensor3<T>& in, const ConvEncoder<T>& enc) {
  const auto k = static_cast<std::ptrdiff_t>(enc.kernel);
  const auto pad = k / 2;
  const auto H = static_cast<std::ptrdiff_t>(in.height()), W = static_cast<std::ptrdiff_t>(in.width());
  Tensor3<T> out(enc.out, in.height(), in.width());
  for (std::size_t o = 0; o < enc.out; ++o) {
    for (std::ptrdiff_t y = 0; y < H; ++y) {
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        T acc = enc.bias[o];
        for (std::size_t i = 0; i < enc.in; ++i) {
          for (std::ptrdiff_t ky = 0; ky < k; ++ky) {
            for (std::ptrdiff_t kx = 0; kx < k; ++kx) {
              const auto sy = y + ky - pad, sx = x + kx - pad;
              if (sy < 0 || sx < 0 || sy >= H || sx >= W) continue;
              acc += enc.w(o, i, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx)) *
                     in.at(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
          }
        }
        out.at(o, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
      }
    }
  }
  return out;
}

template <class T>
Tensor3<T> random_tensor(std::mt19937_64& rng, std::size_t c, std::size_t h, std::size_t w) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor3<T> t(c, h, w);
  for (T& x : t.data()) x = static_cast<T>(g(rng));
  return t;
}

template <class T>
void randomize(std::mt19937_64& rng, std::vector<T>& v) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (T& x : v) x = static_cast<T>(g(rng));
}

template <class T>
double max_abs_diff(std::span<const T> a, std::span<const T> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

// Siamese training on the synthetic two-cluster dataset. Positives are the
// K_a = images_per_group - 1 nearest images under d_gt (exactly the rest of
// the layout group); negatives come from ranks (K_a, n/2]. Accuracy is
// measured on a fresh 500 + 500 draw from the same sampler.
struct LearningOutcome {
  std::size_t images = 0;
  std::size_t cross_group_positives = 0;
  double untrained_f2 = 0.0;
  double pair_accuracy = 0.0;
  double trained_f2 = 0.0;
  std::size_t steps = 0;
  std::vector<double> loss_trace;
};

inline LearningOutcome learning_experiment(const SyntheticConfig& cfg = {}, std::uint64_t seed = 1) {
  LearningOutcome out;
  const auto ds = make_synthetic_dataset(cfg);
  const auto& desc = *ds.descriptors;
  out.images = ds.size();
  const auto dist = pairwise_distances(ds);
  const auto aff = build_affinity(dist, cfg.images_per_group - 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j : aff.neighbors(i)) out.cross_group_positives += synthetic_group(cfg, i) != synthetic_group(cfg, j);
  }
  const PairSampler sampler(aff, dist, default_n_bound(ds.size()));

  EmbeddingDims dims;
  dims.descriptor = desc.dim;
  const auto init = EmbeddingModel::glorot(dims, seed);
  out.untrained_f2 = f_beta_retrieval(ds, FeatureIndex::from_model(init, desc), 5, 2.0).mean;

  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.lr_drop_step = 1500;
  tc.max_iterations = 2000;
  tc.seed = seed + 2;
  auto result = train(init, desc, sampler_source(sampler, 8, 8), tc);
  out.steps = result.loss_trace.size();
  out.loss_trace = std::move(result.loss_trace);

  std::mt19937_64 rng(seed + 98);
  const auto held = sampler.sample(500, 500, rng);
  out.pair_accuracy = pair_accuracy(result.model, desc, held.pairs);
  out.trained_f2 = f_beta_retrieval(ds, FeatureIndex::from_model(result.model, desc), 5, 2.0).mean;
  return out;
}

}  // namespace gcp::test
