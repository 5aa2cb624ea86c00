#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gcp/error.hpp"
#include "gcp/pairs.hpp"
#include "support.hpp"

using namespace gcp;

namespace {

DistanceMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  DistanceMatrix d(rows.size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::size_t j = 0;
    for (double v : r) d.at(i, j++) = v;
    ++i;
  }
  return d;
}

}  // namespace

TEST_CASE("three-node affinity") {
  const auto d = from_rows({{0, 1, 2}, {1, 0, 1.5}, {2, 1.5, 0}});
  const auto a = build_affinity(d, 1);
  CHECK(a.at(0, 1));
  CHECK_FALSE(a.at(0, 2));
  CHECK(a.neighbors(2) == std::vector<std::size_t>{1});
}

TEST_CASE("ties break toward the lower index") {
  DistanceMatrix d(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) d.at(i, j) = i == j ? 0.0 : 1.0;
  }
  const auto a = build_affinity(d, 2);
  CHECK(a.neighbors(0) == std::vector<std::size_t>{1, 2});
  CHECK(a.neighbors(3) == std::vector<std::size_t>{0, 1});
  CHECK(rank_of(d, 2, 0) == 1);
  CHECK(rank_of(d, 2, 3) == 3);
}

TEST_CASE("affinity rejects bad k and bad matrices") {
  std::mt19937_64 rng(1);
  const auto d = test::random_distance_matrix(rng, 5);
  CHECK_THROWS_AS(build_affinity(d, 0), Error);
  CHECK_THROWS_AS(build_affinity(d, 5), Error);
  CHECK_NOTHROW(build_affinity(d, 4));
  auto bad = d;
  bad.at(0, 1) += 1.0;
  CHECK_THROWS_AS(validate_distance_matrix(bad), Error);
  bad = d;
  bad.at(2, 2) = 0.5;
  CHECK_THROWS_AS(validate_distance_matrix(bad), Error);
  CHECK_THROWS_AS(rank_of(d, 1, 1), Error);
}

TEST_CASE("rows sum to k and ranks agree with a full sort") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 2 + rng() % 49;
    const auto d = test::random_distance_matrix(rng, n, t % 2 == 0);
    const std::size_t k = 1 + rng() % (n - 1);
    const auto a = build_affinity(d, k);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(a.row_sum(i) == k);
      CHECK_FALSE(a.at(i, i));
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const std::size_t want = test::sorted_rank(d, i, j);
        CHECK(rank_of(d, i, j) == want);
        CHECK(a.at(i, j) == (want <= k));
      }
      for (std::size_t r = 0; r < k; ++r) CHECK(test::sorted_rank(d, i, a.neighbors(i)[r]) == r + 1);
    }
  }
}

TEST_CASE("nearest and farthest ranks") {
  const auto d = from_rows({{0, 1, 5, 3}, {1, 0, 2, 2}, {5, 2, 0, 4}, {3, 2, 4, 0}});
  CHECK(rank_of(d, 0, 1) == 1);
  CHECK(rank_of(d, 0, 2) == 3);
}

TEST_CASE("a row's neighbours ignore reshuffled distances beyond rank k") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 12, k = 3;
    auto d = test::random_distance_matrix(rng, n);
    const auto before = build_affinity(d, k);
    // Permute row 0's distances among its columns ranked beyond k (mirrored
    // to keep the matrix symmetric).
    const auto order = neighbor_order(d, 0, n - 1);
    std::vector<double> far;
    for (std::size_t r = k; r < order.size(); ++r) far.push_back(d.at(0, order[r]));
    std::shuffle(far.begin(), far.end(), rng);
    for (std::size_t r = k; r < order.size(); ++r) {
      d.at(0, order[r]) = far[r - k];
      d.at(order[r], 0) = far[r - k];
    }
    const auto after = build_affinity(d, k);
    CHECK(after.neighbors(0) == before.neighbors(0));
    for (std::size_t i = 0; i < n; ++i) CHECK(after.row_sum(i) == k);
  }
}

TEST_CASE("sample counts, labels and negative ranks") {
  std::mt19937_64 rng(4);
  const auto d = test::random_distance_matrix(rng, 20);
  const auto a = build_affinity(d, 2);
  const auto batch = sample_pairs(a, d, 8, 8, 10, 77);
  CHECK(batch.pairs.size() == 16);
  CHECK(batch.count(1) == 8);
  CHECK(batch.count(0) == 8);
  CHECK(batch.n_bound == 10);
  for (const auto& p : batch.pairs) {
    CHECK(p.i != p.j);
    if (p.label == 1) {
      CHECK(a.at(p.i, p.j));
    } else {
      const auto r = rank_of(d, p.i, p.j);
      CHECK(r > 2);
      CHECK(r <= 10);
      CHECK_FALSE(a.at(p.i, p.j));
    }
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& p : batch.pairs) CHECK(seen.insert({p.i, p.j}).second);
}

TEST_CASE("same seed, same batch") {
  std::mt19937_64 rng(5);
  const auto d = test::random_distance_matrix(rng, 30);
  const auto a = build_affinity(d, 3);
  const auto x = sample_pairs(a, d, 50, 50, 15, 9);
  const auto y = sample_pairs(a, d, 50, 50, 15, 9);
  const auto z = sample_pairs(a, d, 50, 50, 15, 10);
  CHECK(x.pairs == y.pairs);
  CHECK(x.pairs != z.pairs);
}

TEST_CASE("sampler covers both ends of the negative range") {
  std::mt19937_64 rng(6);
  const std::size_t n = 40, k = 4, nb = 20;
  const auto d = test::random_distance_matrix(rng, n);
  const PairSampler s(build_affinity(d, k), d, nb);
  CHECK(s.positive_pool() == n * k);
  CHECK(s.negative_pool() == n * (nb - k));
  std::mt19937_64 draw(7);
  std::vector<std::size_t> hist(n, 0);
  for (int t = 0; t < 100; ++t) {
    for (const auto& p : s.sample(0, 100, draw).pairs) ++hist[rank_of(d, p.i, p.j)];
  }
  for (std::size_t r = 0; r <= k; ++r) CHECK(hist[r] == 0);
  for (std::size_t r = nb + 1; r < n; ++r) CHECK(hist[r] == 0);
  CHECK(hist[k + 1] > 0);
  CHECK(hist[nb] > 0);
}

TEST_CASE("sampler preconditions") {
  std::mt19937_64 rng(8);
  const auto d = test::random_distance_matrix(rng, 10);
  const auto a = build_affinity(d, 3);
  CHECK(default_n_bound(10) == 5);
  CHECK(default_n_bound(20000) == 10000);
  CHECK_THROWS_AS(PairSampler(a, d, 3), Error);   // no room above k
  CHECK_THROWS_AS(PairSampler(a, d, 10), Error);  // beyond n - 1
  const PairSampler s(a, d, 5);
  std::mt19937_64 g(1);
  CHECK_THROWS_AS(s.sample(31, 0, g), Error);  // pool holds 30 positives
  CHECK_THROWS_AS(s.sample(0, 21, g), Error);  // and 20 negatives
  CHECK(s.sample(30, 20, g).pairs.size() == 50);
}

TEST_CASE("pool hands out balanced mini-batches") {
  std::mt19937_64 rng(9);
  const auto d = test::random_distance_matrix(rng, 25);
  const auto all = sample_pairs(build_affinity(d, 3), d, 40, 40, 12, 1);
  const PairPool pool(all.pairs);
  CHECK(pool.positives() == 40);
  CHECK(pool.negatives() == 40);
  std::mt19937_64 g(2);
  const auto b = pool.draw(8, 8, g);
  CHECK(b.count(1) == 8);
  CHECK(b.count(0) == 8);
  for (const auto& p : b.pairs) CHECK(std::find(all.pairs.begin(), all.pairs.end(), p) != all.pairs.end());
  CHECK_THROWS_AS(pool.draw(41, 0, g), Error);
}

TEST_CASE("pair and affinity text round trips") {
  std::mt19937_64 rng(10);
  const auto d = test::random_distance_matrix(rng, 15);
  const auto a = build_affinity(d, 4);
  const auto p = sample_pairs(a, d, 10, 10, 7, 3);
  CHECK(decode_pairs(encode_pairs(p), "mem").pairs == p.pairs);
  CHECK(decode_affinity(encode_affinity(a), "mem") == a);

  test::TempDir dir("pairs");
  write_pairs(p, dir / "p.jsonl");
  write_affinity(a, dir / "a.jsonl");
  CHECK(read_pairs(dir / "p.jsonl").pairs == p.pairs);
  CHECK(read_affinity(dir / "a.jsonl") == a);

  CHECK_THROWS_AS(decode_pairs("{\"i\":0,\"j\":0,\"label\":1}\n", "mem"), Error);
  CHECK_THROWS_AS(decode_pairs("{\"i\":0,\"j\":1,\"label\":2}\n", "mem"), Error);
  CHECK_THROWS_AS(decode_affinity("{\"i\":0,\"neighbors\":[1]}\n{\"i\":1,\"neighbors\":[0,0]}\n", "mem"), Error);
}
