#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "gcp/pyramid.hpp"

namespace gcp {

// Binarized KNN graph: row i marks the k nearest non-self neighbours of i.
// Not necessarily symmetric.
class AffinityMatrix {
 public:
  AffinityMatrix() = default;
  AffinityMatrix(std::size_t k, std::vector<std::vector<std::size_t>> neighbors);

  std::size_t size() const { return neighbors_.size(); }
  std::size_t k() const { return k_; }
  // Neighbours of i in ascending-distance order.
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_[i]; }
  bool at(std::size_t i, std::size_t j) const;
  std::size_t row_sum(std::size_t i) const { return neighbors_[i].size(); }

  bool operator==(const AffinityMatrix&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<std::vector<std::size_t>> neighbors_;
};

// The first `limit` non-self indices of row i ordered by (distance, index).
std::vector<std::size_t> neighbor_order(const DistanceMatrix& dist, std::size_t i, std::size_t limit);

// Throws unless square, zero-diagonal, symmetric and finite.
void validate_distance_matrix(const DistanceMatrix& dist);

AffinityMatrix build_affinity(const DistanceMatrix& dist, std::size_t k_a);

// 1-based position of j among i's non-self neighbours, ties by index.
std::size_t rank_of(const DistanceMatrix& dist, std::size_t i, std::size_t j);

// Hard-negative bound default: half the number of images.
inline std::size_t default_n_bound(std::size_t n) { return n / 2; }

struct Pair {
  std::uint32_t i;
  std::uint32_t j;
  std::uint8_t label;  // 1 = positive, 0 = negative

  bool operator==(const Pair&) const = default;
};

struct PairBatch {
  std::vector<Pair> pairs;
  std::uint64_t seed = 0;
  std::size_t n_bound = 0;

  std::size_t count(std::uint8_t label) const;
};

// Positives: (i, j) with A[i,j] = 1. Negatives: rank_i(j) in (k, n_bound].
// Both pools are sampled uniformly, without replacement inside one batch.
class PairSampler {
 public:
  PairSampler(const AffinityMatrix& affinity, const DistanceMatrix& dist, std::size_t n_bound);

  std::size_t positive_pool() const;
  std::size_t negative_pool() const;
  std::size_t n_bound() const { return n_bound_; }

  PairBatch sample(std::size_t n_pos, std::size_t n_neg, std::mt19937_64& rng) const;

 private:
  Pair positive(std::size_t t) const;
  Pair negative(std::size_t t) const;

  AffinityMatrix affinity_;
  std::size_t n_bound_;
  std::vector<std::vector<std::size_t>> order_;  // first n_bound ranks per row
};

PairBatch sample_pairs(const AffinityMatrix& affinity, const DistanceMatrix& dist, std::size_t n_pos,
                       std::size_t n_neg, std::size_t n_bound, std::uint64_t seed);

// A fixed labelled pool that hands out mini-batches of n_pos + n_neg pairs.
class PairPool {
 public:
  explicit PairPool(std::vector<Pair> pairs);

  std::size_t positives() const { return pos_.size(); }
  std::size_t negatives() const { return neg_.size(); }
  PairBatch draw(std::size_t n_pos, std::size_t n_neg, std::mt19937_64& rng) const;

 private:
  std::vector<Pair> pos_;
  std::vector<Pair> neg_;
};

// Line-delimited {"i":..,"j":..,"label":..}.
std::string encode_pairs(const PairBatch& batch);
PairBatch decode_pairs(std::string_view text, const std::string& source);
void write_pairs(const PairBatch& batch, const std::filesystem::path& path);
PairBatch read_pairs(const std::filesystem::path& path);

// Sparse row lists, one {"i":..,"neighbors":[...]} per line.
std::string encode_affinity(const AffinityMatrix& a);
AffinityMatrix decode_affinity(std::string_view text, const std::string& source);
void write_affinity(const AffinityMatrix& a, const std::filesystem::path& path);
AffinityMatrix read_affinity(const std::filesystem::path& path);

}  // namespace gcp
