#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gcp/dataset.hpp"
#include "gcp/embed.hpp"

namespace gcp {

// Exact Euclidean index over context features, rows in manifest order.
class FeatureIndex {
 public:
  FeatureIndex() = default;
  FeatureIndex(std::size_t dim, std::vector<double> vectors);

  static FeatureIndex from_descriptors(const DescriptorSet& set);
  static FeatureIndex from_model(const EmbeddingModel& model, const DescriptorSet& set);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : vectors_.size() / dim_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(vectors_).subspan(i * dim_, dim_);
  }

  // Stored as a GCPD descriptor file (32-bit floats).
  DescriptorSet to_descriptors() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> vectors_;
};

struct Neighbor {
  std::size_t id;
  double distance;  // Euclidean
};

struct RetrievalResult {
  std::optional<std::size_t> query_id;
  std::vector<Neighbor> neighbors;  // ascending distance, ties by id

  std::vector<std::size_t> ids() const;
};

// Exact k nearest of an external vector over all stored rows.
RetrievalResult knn_query(const FeatureIndex& index, std::span<const double> query, std::size_t k);
// Exact k nearest of stored row `id`, excluding itself.
RetrievalResult knn_query(const FeatureIndex& index, std::size_t id, std::size_t k);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Set-based precision/recall over class presence flags (index 0 ignored).
// Precision of an empty prediction is 0. Requires a non-empty truth set.
PrecisionRecall precision_recall(const std::vector<bool>& predicted, const std::vector<bool>& truth);

// (1 + b^2) P R / (b^2 P + R), 0 when both are 0.
double f_beta(const PrecisionRecall& pr, double beta);

struct RetrievalEvaluation {
  double mean = 0.0;
  std::vector<double> per_query;  // NaN where the query had no labelled class
  std::size_t evaluated = 0;
};

// For every image: retrieve k_p neighbours by id, predict the union of their
// annotated classes, score against the image's own classes, average F_beta.
RetrievalEvaluation f_beta_retrieval(const Dataset& dataset, const FeatureIndex& index, std::size_t k_p, double beta);

}  // namespace gcp
