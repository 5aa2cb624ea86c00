#include "gcp/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "gcp/binary_io.hpp"
#include "gcp/error.hpp"
#include "gcp/parallel.hpp"
#include "json.hpp"

namespace gcp {

using nlohmann::json;

AffinityMatrix::AffinityMatrix(std::size_t k, std::vector<std::vector<std::size_t>> neighbors)
    : k_(k), neighbors_(std::move(neighbors)) {}

bool AffinityMatrix::at(std::size_t i, std::size_t j) const {
  const auto& row = neighbors_.at(i);
  return std::find(row.begin(), row.end(), j) != row.end();
}

void validate_distance_matrix(const DistanceMatrix& dist) {
  const std::size_t n = dist.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (dist.at(i, i) != 0.0) throw Error("distance matrix: non-zero diagonal at " + std::to_string(i));
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dist.at(i, j);
      if (!std::isfinite(d)) throw Error("distance matrix: non-finite entry");
      if (d != dist.at(j, i)) {
        throw Error("distance matrix: asymmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

std::vector<std::size_t> neighbor_order(const DistanceMatrix& dist, std::size_t i, std::size_t limit) {
  const std::size_t n = dist.size();
  if (i >= n) throw Error("neighbor_order: index out of range");
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) cand.emplace_back(dist.at(i, j), j);
  }
  limit = std::min(limit, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(limit), cand.end());
  std::vector<std::size_t> out(limit);
  for (std::size_t r = 0; r < limit; ++r) out[r] = cand[r].second;
  return out;
}

AffinityMatrix build_affinity(const DistanceMatrix& dist, std::size_t k_a) {
  const std::size_t n = dist.size();
  if (n < 2) throw Error("build_affinity: need at least 2 images");
  if (k_a < 1 || k_a > n - 1) {
    throw Error("build_affinity: k_a=" + std::to_string(k_a) + " out of range [1, " + std::to_string(n - 1) + "]");
  }
  validate_distance_matrix(dist);
  std::vector<std::vector<std::size_t>> rows(n);
  parallel_for(n, [&](std::size_t i) { rows[i] = neighbor_order(dist, i, k_a); });
  return AffinityMatrix(k_a, std::move(rows));
}

std::size_t rank_of(const DistanceMatrix& dist, std::size_t i, std::size_t j) {
  const std::size_t n = dist.size();
  if (i >= n || j >= n) throw Error("rank_of: index out of range");
  if (i == j) throw Error("rank_of: i == j");
  const double dj = dist.at(i, j);
  std::size_t rank = 1;
  for (std::size_t m = 0; m < n; ++m) {
    if (m == i || m == j) continue;
    const double dm = dist.at(i, m);
    if (dm < dj || (dm == dj && m < j)) ++rank;
  }
  return rank;
}

std::size_t PairBatch::count(std::uint8_t label) const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [&](const Pair& p) { return p.label == label; }));
}

// ---------------------------------------------------------------------------

PairSampler::PairSampler(const AffinityMatrix& affinity, const DistanceMatrix& dist, std::size_t n_bound)
    : affinity_(affinity), n_bound_(n_bound) {
  const std::size_t n = dist.size();
  if (affinity.size() != n) throw Error("sample_pairs: affinity and distance matrix sizes differ");
  if (n_bound <= affinity.k()) {
    throw Error("sample_pairs: n_bound=" + std::to_string(n_bound) + " must exceed k_a=" + std::to_string(affinity.k()));
  }
  if (n_bound > n - 1) {
    throw Error("sample_pairs: n_bound=" + std::to_string(n_bound) + " exceeds n-1=" + std::to_string(n - 1));
  }
  order_.resize(n);
  parallel_for(n, [&](std::size_t i) { order_[i] = neighbor_order(dist, i, n_bound); });
}

std::size_t PairSampler::positive_pool() const { return affinity_.size() * affinity_.k(); }

std::size_t PairSampler::negative_pool() const { return order_.size() * (n_bound_ - affinity_.k()); }

Pair PairSampler::positive(std::size_t t) const {
  const std::size_t k = affinity_.k();
  const std::size_t i = t / k;
  return {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(affinity_.neighbors(i)[t % k]), 1};
}

Pair PairSampler::negative(std::size_t t) const {
  const std::size_t width = n_bound_ - affinity_.k();
  const std::size_t i = t / width;
  const std::size_t rank = affinity_.k() + 1 + t % width;
  return {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(order_[i][rank - 1]), 0};
}

namespace {

// `count` distinct indices from [0, pool), in draw order.
std::vector<std::size_t> draw_distinct(std::size_t pool, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  out.reserve(count);
  if (count == 0) return out;
  std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
  std::unordered_set<std::size_t> seen;
  while (out.size() < count) {
    const std::size_t t = pick(rng);
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

void check_pool(const char* label, std::size_t pool, std::size_t wanted) {
  if (wanted == 0) return;
  if (pool == 0) throw Error(std::string("sample_pairs: empty ") + label + " candidate pool");
  if (wanted > pool) {
    throw Error(std::string("sample_pairs: requested ") + std::to_string(wanted) + " " + label + " pairs but only " +
                std::to_string(pool) + " candidates exist");
  }
}

}  // namespace

PairBatch PairSampler::sample(std::size_t n_pos, std::size_t n_neg, std::mt19937_64& rng) const {
  check_pool("positive", positive_pool(), n_pos);
  check_pool("negative", negative_pool(), n_neg);
  PairBatch batch;
  batch.n_bound = n_bound_;
  batch.pairs.reserve(n_pos + n_neg);
  for (std::size_t t : draw_distinct(positive_pool(), n_pos, rng)) batch.pairs.push_back(positive(t));
  for (std::size_t t : draw_distinct(negative_pool(), n_neg, rng)) batch.pairs.push_back(negative(t));
  return batch;
}

PairBatch sample_pairs(const AffinityMatrix& affinity, const DistanceMatrix& dist, std::size_t n_pos,
                       std::size_t n_neg, std::size_t n_bound, std::uint64_t seed) {
  PairSampler sampler(affinity, dist, n_bound);
  std::mt19937_64 rng(seed);
  PairBatch batch = sampler.sample(n_pos, n_neg, rng);
  batch.seed = seed;
  return batch;
}

PairPool::PairPool(std::vector<Pair> pairs) {
  for (const Pair& p : pairs) {
    if (p.i == p.j) throw Error("pair pool: self pair (" + std::to_string(p.i) + ")");
    (p.label ? pos_ : neg_).push_back(p);
  }
}

PairBatch PairPool::draw(std::size_t n_pos, std::size_t n_neg, std::mt19937_64& rng) const {
  check_pool("positive", pos_.size(), n_pos);
  check_pool("negative", neg_.size(), n_neg);
  PairBatch batch;
  batch.pairs.reserve(n_pos + n_neg);
  for (std::size_t t : draw_distinct(pos_.size(), n_pos, rng)) batch.pairs.push_back(pos_[t]);
  for (std::size_t t : draw_distinct(neg_.size(), n_neg, rng)) batch.pairs.push_back(neg_[t]);
  return batch;
}

// ---------------------------------------------------------------------------
// text formats

namespace {

template <class F>
void for_each_json_line(std::string_view text, const std::string& source, F&& fn) {
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

std::string encode_pairs(const PairBatch& batch) {
  std::ostringstream out;
  for (const Pair& p : batch.pairs) {
    out << "{\"i\":" << p.i << ",\"j\":" << p.j << ",\"label\":" << int(p.label) << "}\n";
  }
  return out.str();
}

PairBatch decode_pairs(std::string_view text, const std::string& source) {
  PairBatch batch;
  for_each_json_line(text, source, [&](const json& rec) {
    const int label = rec.at("label").get<int>();
    if (label != 0 && label != 1) throw Error(source + ": label must be 0 or 1");
    const auto i = rec.at("i").get<std::uint32_t>(), j = rec.at("j").get<std::uint32_t>();
    if (i == j) throw Error(source + ": self pair (" + std::to_string(i) + ")");
    batch.pairs.push_back({i, j, static_cast<std::uint8_t>(label)});
  });
  return batch;
}

void write_pairs(const PairBatch& batch, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_pairs(batch));
}

PairBatch read_pairs(const std::filesystem::path& path) { return decode_pairs(io::read_file(path), path.string()); }

std::string encode_affinity(const AffinityMatrix& a) {
  std::ostringstream out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out << "{\"i\":" << i << ",\"neighbors\":[";
    const auto& row = a.neighbors(i);
    for (std::size_t r = 0; r < row.size(); ++r) out << (r ? "," : "") << row[r];
    out << "]}\n";
  }
  return out.str();
}

AffinityMatrix decode_affinity(std::string_view text, const std::string& source) {
  std::vector<std::vector<std::size_t>> rows;
  for_each_json_line(text, source, [&](const json& rec) {
    const auto i = rec.at("i").get<std::size_t>();
    if (i != rows.size()) throw Error(source + ": rows must be listed in order (expected " + std::to_string(rows.size()) + ")");
    rows.push_back(rec.at("neighbors").get<std::vector<std::size_t>>());
  });
  if (rows.empty()) throw Error(source + ": empty affinity");
  const std::size_t k = rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != k) throw Error(source + ": row " + std::to_string(i) + " has a different neighbour count");
    for (std::size_t j : rows[i]) {
      if (j >= rows.size() || j == i) throw Error(source + ": invalid neighbour in row " + std::to_string(i));
    }
  }
  return AffinityMatrix(k, std::move(rows));
}

void write_affinity(const AffinityMatrix& a, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_affinity(a));
}

AffinityMatrix read_affinity(const std::filesystem::path& path) {
  return decode_affinity(io::read_file(path), path.string());
}

}  // namespace gcp
