#include "gcp/synthetic.hpp"

#include <array>
#include <cmath>
#include <random>

#include "gcp/error.hpp"
#include "gcp/pyramid.hpp"

namespace gcp {
namespace {

constexpr std::array<const char*, 45> kNames = {
    "unlabeled", "wall",     "floor",    "sky",     "grass",   "bed",    "chair",  "sofa",
    "table",     "lamp",     "cabinet",  "tv",      "shelf",   "plant",  "rug",    "desk",
    "mirror",    "curtain",  "sink",     "toilet",  "bathtub", "stove",  "fridge", "clock",
    "painting",  "car",      "person",   "tree",    "bench",   "sign",   "bicycle", "pole",
    "fence",     "dog",      "streetlight", "bus",  "truck",   "boat",   "bird",   "flower",
    "rock",      "house",    "bridge",   "umbrella", "mailbox"};

constexpr std::size_t kIndoorThings = 5;
constexpr std::size_t kOutdoorThings = 25;
constexpr std::size_t kMaxGroups = 10;  // two things per group, twenty per cluster

ClassTable synthetic_classes() {
  ClassTable t;
  for (std::size_t c = 0; c < kNames.size(); ++c) {
    t.names.emplace_back(kNames[c]);
    t.kinds.push_back(c == 0 ? ClassKind::unlabeled : c <= 4 ? ClassKind::stuff : ClassKind::things);
  }
  return t;
}

// Orthonormal rows via Gram-Schmidt on a Gaussian matrix.
std::vector<double> random_rotation(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> q(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    double* row = q.data() + r * n;
    for (;;) {
      for (std::size_t k = 0; k < n; ++k) row[k] = g(rng);
      for (std::size_t p = 0; p < r; ++p) {
        const double* prev = q.data() + p * n;
        double d = 0.0;
        for (std::size_t k = 0; k < n; ++k) d += row[k] * prev[k];
        for (std::size_t k = 0; k < n; ++k) row[k] -= d * prev[k];
      }
      double norm = 0.0;
      for (std::size_t k = 0; k < n; ++k) norm += row[k] * row[k];
      norm = std::sqrt(norm);
      if (norm < 1e-6) continue;
      for (std::size_t k = 0; k < n; ++k) row[k] /= norm;
      break;
    }
  }
  return q;
}

void fill_box(LabelMap& m, std::ptrdiff_t top, std::ptrdiff_t left, std::size_t size, ClassId cls) {
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const auto y = top + static_cast<std::ptrdiff_t>(r);
      const auto x = left + static_cast<std::ptrdiff_t>(c);
      if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(m.height()) || x >= static_cast<std::ptrdiff_t>(m.width())) {
        continue;
      }
      m.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = cls;
    }
  }
}

}  // namespace

std::size_t synthetic_group(const SyntheticConfig& config, std::size_t image) {
  return image / config.images_per_group;
}

Dataset make_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.groups_per_cluster == 0 || cfg.groups_per_cluster > kMaxGroups) {
    throw Error("synthetic: groups_per_cluster must be in [1, 10]");
  }
  if (cfg.styles == 0) throw Error("synthetic: need at least one style");
  if (cfg.images_per_group == 0) throw Error("synthetic: images_per_group must be positive");
  if (cfg.height < 24 || cfg.width < 24) throw Error("synthetic: maps must be at least 24x24");
  if (cfg.signal_dim == 0 || cfg.signal_dim >= cfg.descriptor_dim) {
    throw Error("synthetic: need 0 < signal_dim < descriptor_dim");
  }

  std::mt19937_64 rng(cfg.seed);
  Dataset ds;
  ds.classes = synthetic_classes();
  const std::size_t C = ds.classes.num_classes();
  const std::size_t H = cfg.height, W = cfg.width;
  const std::size_t box = std::min(H, W) / 4;

  std::uniform_int_distribution<int> jitter(-2, 2);
  std::uniform_int_distribution<int> horizon_jitter(-3, 3);
  std::uniform_int_distribution<int> strip(0, 2);

  for (std::size_t cluster = 0; cluster < 2; ++cluster) {
    const ClassId top = cluster == 0 ? 1 : 3;
    const ClassId bottom = cluster == 0 ? 2 : 4;
    const std::size_t thing_base = cluster == 0 ? kIndoorThings : kOutdoorThings;
    for (std::size_t g = 0; g < cfg.groups_per_cluster; ++g) {
      const std::size_t ta = 2 * g, tb = 2 * g + 1;
      // Group-specific anchors: left object in the lower-left band, right
      // object in the upper-right band, offsets cycling with the group.
      const auto a_row = static_cast<std::ptrdiff_t>(H / 2 + (g % 3) * H / 12);
      const auto a_col = static_cast<std::ptrdiff_t>(W / 12 + (g % 4) * W / 16);
      const auto b_row = static_cast<std::ptrdiff_t>(H / 8 + (g % 2) * H / 10);
      const auto b_col = static_cast<std::ptrdiff_t>(W / 2 + (g % 5) * W / 20);
      for (std::size_t k = 0; k < cfg.images_per_group; ++k) {
        const std::size_t index = ds.images.size();
        LabelMap m(H, W);
        const auto horizon = static_cast<std::size_t>(static_cast<int>(H / 2) + horizon_jitter(rng));
        for (std::size_t r = 0; r < H; ++r) {
          for (std::size_t c = 0; c < W; ++c) m.at(r, c) = r < horizon ? top : bottom;
        }
        fill_box(m, a_row + jitter(rng), a_col + jitter(rng), box, static_cast<ClassId>(thing_base + ta));
        fill_box(m, b_row + jitter(rng), b_col + jitter(rng), box, static_cast<ClassId>(thing_base + tb));
        const auto unlabeled_rows = static_cast<std::size_t>(strip(rng));
        for (std::size_t r = H - unlabeled_rows; r < H; ++r) {
          for (std::size_t c = 0; c < W; ++c) m.at(r, c) = kUnlabeled;
        }
        ImageRecord rec;
        rec.id = (cluster == 0 ? "indoor_" : "outdoor_") + std::to_string(g) + "_" + std::to_string(k);
        rec.labelmap_path = "labels/" + std::to_string(index) + "_" + rec.id + ".pgm";
        rec.split = "train";
        ds.images.push_back(std::move(rec));
        ds.labels.push_back(std::move(m));
      }
    }
  }

  // Descriptors.
  const std::size_t D = cfg.descriptor_dim, S = cfg.signal_dim;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> view(S * C);
  for (double& v : view) v = gauss(rng) * cfg.signal_scale;
  const auto rotation = random_rotation(D, rng);
  std::vector<double> styles(cfg.styles * (D - S));
  for (double& v : styles) v = gauss(rng) * cfg.nuisance_scale;
  std::uniform_int_distribution<std::size_t> pick_style(0, cfg.styles - 1);

  DescriptorSet set;
  set.dim = D;
  set.values.resize(ds.size() * D);
  std::vector<double> latent(D);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto hist = build_pyramid(ds.labels[i], C).block(0);
    for (std::size_t s = 0; s < S; ++s) {
      double acc = 0.0;
      for (std::size_t c = 0; c < C; ++c) acc += view[s * C + c] * std::sqrt(hist[c]);
      latent[s] = acc;
    }
    const double* style = styles.data() + pick_style(rng) * (D - S);
    for (std::size_t s = S; s < D; ++s) latent[s] = style[s - S] + gauss(rng) * cfg.noise_scale;
    for (std::size_t r = 0; r < D; ++r) {
      double acc = 0.0;
      for (std::size_t k = 0; k < D; ++k) acc += rotation[r * D + k] * latent[k];
      set.values[i * D + r] = static_cast<float>(acc);
    }
  }
  ds.descriptors = std::move(set);
  return ds;
}

}  // namespace gcp
