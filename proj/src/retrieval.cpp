#include "gcp/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gcp/error.hpp"
#include "gcp/parallel.hpp"
#include "gcp/simd/kernels.hpp"

namespace gcp {

FeatureIndex::FeatureIndex(std::size_t dim, std::vector<double> vectors) : dim_(dim), vectors_(std::move(vectors)) {
  if (dim_ == 0) throw Error("FeatureIndex: zero dimension");
  if (vectors_.size() % dim_ != 0) throw Error("FeatureIndex: data is not a whole number of rows");
  for (double v : vectors_) {
    if (!std::isfinite(v)) throw Error("FeatureIndex: non-finite feature value");
  }
}

FeatureIndex FeatureIndex::from_descriptors(const DescriptorSet& set) {
  return FeatureIndex(set.dim, std::vector<double>(set.values.begin(), set.values.end()));
}

FeatureIndex FeatureIndex::from_model(const EmbeddingModel& model, const DescriptorSet& set) {
  return FeatureIndex(model.dims().feature, embed_all(model, set));
}

DescriptorSet FeatureIndex::to_descriptors() const {
  DescriptorSet set;
  set.dim = dim_;
  set.values.assign(vectors_.begin(), vectors_.end());
  return set;
}

std::vector<std::size_t> RetrievalResult::ids() const {
  std::vector<std::size_t> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(n.id);
  return out;
}

namespace {

RetrievalResult top_k(const FeatureIndex& index, std::span<const double> query, std::size_t k,
                      std::optional<std::size_t> exclude) {
  if (query.size() != index.dim()) {
    throw Error("knn_query: query dimension " + std::to_string(query.size()) + " != index dimension " +
                std::to_string(index.dim()));
  }
  const std::size_t available = index.size() - (exclude ? 1 : 0);
  if (k < 1 || k > available) {
    throw Error("knn_query: k=" + std::to_string(k) + " out of range [1, " + std::to_string(available) + "]");
  }
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (exclude && *exclude == i) continue;
    cand.emplace_back(simd::squared_l2(query, index.row(i)), i);
  }
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
  RetrievalResult r;
  r.query_id = exclude;
  r.neighbors.reserve(k);
  for (std::size_t t = 0; t < k; ++t) r.neighbors.push_back({cand[t].second, std::sqrt(cand[t].first)});
  return r;
}

}  // namespace

RetrievalResult knn_query(const FeatureIndex& index, std::span<const double> query, std::size_t k) {
  return top_k(index, query, k, std::nullopt);
}

RetrievalResult knn_query(const FeatureIndex& index, std::size_t id, std::size_t k) {
  if (id >= index.size()) throw Error("knn_query: query id " + std::to_string(id) + " out of range");
  return top_k(index, index.row(id), k, id);
}

PrecisionRecall precision_recall(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) throw Error("precision_recall: class vector sizes differ");
  std::size_t tp = 0, np = 0, nt = 0;
  for (std::size_t c = 1; c < truth.size(); ++c) {
    tp += predicted[c] && truth[c];
    np += predicted[c];
    nt += truth[c];
  }
  if (nt == 0) throw Error("precision_recall: empty truth set");
  PrecisionRecall pr;
  pr.precision = np == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(np);
  pr.recall = static_cast<double>(tp) / static_cast<double>(nt);
  return pr;
}

double f_beta(const PrecisionRecall& pr, double beta) {
  if (beta < 0.0 || !std::isfinite(beta)) throw Error("f_beta: beta must be finite and >= 0");
  const double b2 = beta * beta;
  const double denom = b2 * pr.precision + pr.recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * pr.precision * pr.recall / denom;
}

RetrievalEvaluation f_beta_retrieval(const Dataset& dataset, const FeatureIndex& index, std::size_t k_p, double beta) {
  const std::size_t n = dataset.size();
  if (index.size() != n) {
    throw Error("f_beta_retrieval: index has " + std::to_string(index.size()) + " rows, dataset has " +
                std::to_string(n));
  }
  const std::size_t C = dataset.classes.num_classes();
  std::vector<std::vector<bool>> present(n);
  parallel_for(n, [&](std::size_t i) { present[i] = present_classes(dataset.labels[i], C); });

  RetrievalEvaluation eval;
  eval.per_query.assign(n, std::numeric_limits<double>::quiet_NaN());
  parallel_for(n, [&](std::size_t q) {
    if (std::none_of(present[q].begin(), present[q].end(), [](bool b) { return b; })) return;
    const auto result = knn_query(index, q, k_p);
    std::vector<bool> predicted(C, false);
    for (const auto& nb : result.neighbors) {
      for (std::size_t c = 1; c < C; ++c) predicted[c] = predicted[c] || present[nb.id][c];
    }
    eval.per_query[q] = f_beta(precision_recall(predicted, present[q]), beta);
  });

  double sum = 0.0;
  for (double s : eval.per_query) {
    if (std::isnan(s)) continue;
    sum += s;
    ++eval.evaluated;
  }
  eval.mean = eval.evaluated == 0 ? 0.0 : sum / static_cast<double>(eval.evaluated);
  return eval;
}

}  // namespace gcp
