#pragma once

#include <cstdint>

#include "gcp/dataset.hpp"

namespace gcp {

// Two scene clusters (indoor: wall over floor; outdoor: sky over grass).
// Each cluster holds `groups_per_cluster` layout groups; a group places the
// same pair of things classes at the same anchors, and its images differ only
// by small jitter of the horizon, object boxes and an unlabelled bottom
// strip. Groups are therefore tight under the ground-truth distance.
//
// Descriptors stand in for image appearance: a random linear view of the
// whole-image class histogram (square-rooted, so small objects register),
// concatenated with a nuisance part drawn from a few shared "styles" that are
// independent of content, then mixed by a random rotation. Raw Euclidean
// geometry groups images by style; a trained embedding has to discover the
// content subspace.
struct SyntheticConfig {
  std::size_t groups_per_cluster = 10;  // at most 10
  std::size_t images_per_group = 10;
  std::size_t height = 60;
  std::size_t width = 60;
  std::size_t descriptor_dim = 64;
  std::size_t signal_dim = 16;
  double signal_scale = 1.0;
  double nuisance_scale = 0.75;  // spread of the style prototypes
  std::size_t styles = 20;       // shared appearance styles (confounders)
  double noise_scale = 0.1;      // per-image noise on the style part
  std::uint64_t seed = 7;
};

Dataset make_synthetic_dataset(const SyntheticConfig& config = {});

// Group index of every image in make_synthetic_dataset order.
std::size_t synthetic_group(const SyntheticConfig& config, std::size_t image);

}  // namespace gcp
