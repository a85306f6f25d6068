#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "basket/annindex.hpp"
#include "basket/rng.hpp"
#include "test_util.hpp"

using namespace basket;

namespace {

EmbeddingTable random_table(std::uint32_t n, std::uint32_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingTable t;
  t.dim = dim;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t r = t.add(i + 1);
    for (float& v : t.row_mut(r)) v = float(gaussian(rng));
  }
  return t;
}

// Independent double-precision scan, written loop-style on purpose.
std::vector<std::uint64_t> brute_force_ids(const EmbeddingTable& t, const float* q,
                                           std::uint32_t k) {
  std::vector<std::pair<double, std::uint64_t>> scored;
  double qn = 0.0;
  for (std::uint32_t d = 0; d < t.dim; ++d) qn += double(q[d]) * q[d];
  qn = std::sqrt(qn);
  for (std::uint32_t r = 0; r < t.size(); ++r) {
    const auto row = t.row(r);
    double dot = 0.0, rn = 0.0;
    for (std::uint32_t d = 0; d < t.dim; ++d) {
      dot += double(row[d]) * q[d];
      rn += double(row[d]) * row[d];
    }
    const double denom = std::sqrt(rn) * qn;
    const double dist = denom > 0.0 ? 1.0 - dot / denom : 1.0;
    scored.emplace_back(dist, t.ids[r]);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::uint64_t> ids;
  for (std::uint32_t i = 0; i < std::min<std::uint32_t>(k, scored.size()); ++i) {
    ids.push_back(scored[i].second);
  }
  return ids;
}

double recall_at(const std::vector<Neighbor>& got, const std::vector<Neighbor>& truth) {
  std::set<std::uint64_t> want;
  for (const auto& [id, dist] : truth) want.insert(id);
  std::size_t hit = 0;
  for (const auto& [id, dist] : got) hit += want.count(id);
  return double(hit) / double(truth.size());
}

}  // namespace

TEST_CASE("cosine_distance basics") {
  const float a[3] = {1.f, 0.f, 0.f};
  const float b[3] = {0.f, 1.f, 0.f};
  const float c[3] = {-2.f, 0.f, 0.f};
  const float zero[3] = {0.f, 0.f, 0.f};
  CHECK(cosine_distance(a, a, 3) == doctest::Approx(0.0f));
  CHECK(cosine_distance(a, b, 3) == doctest::Approx(1.0f));
  CHECK(cosine_distance(a, c, 3) == doctest::Approx(2.0f));
  CHECK(cosine_distance(a, zero, 3) == doctest::Approx(1.0f));  // zero norm -> similarity 0
  // Scale invariance.
  const float a4[3] = {4.f, 0.f, 0.f};
  const float d[3] = {0.3f, 0.7f, -0.2f};
  CHECK(cosine_distance(a4, d, 3) == doctest::Approx(cosine_distance(a, d, 3)).epsilon(1e-6));
}

TEST_CASE("every tree partitions the full row set") {
  const EmbeddingTable table = random_table(1000, 25, 3);
  const AnnForest forest = AnnForest::build(table, 20, 16, 99);
  REQUIRE(forest.n_trees() == 20);
  for (const AnnForest::Tree& tree : forest.trees()) {
    // Leaf row ranges tile `rows`, and rows is a permutation of 0..n-1.
    REQUIRE(tree.rows.size() == 1000);
    std::vector<bool> seen(1000, false);
    std::size_t covered = 0;
    for (const AnnForest::Node& node : tree.nodes) {
      if (!node.is_leaf()) {
        CHECK(node.normal.size() == 25);
        float norm = 0.f;
        for (float v : node.normal) norm += v * v;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0f).epsilon(1e-4));
        continue;
      }
      CHECK(node.leaf_count <= 16);
      covered += node.leaf_count;
      for (std::uint32_t i = 0; i < node.leaf_count; ++i) {
        const std::uint32_t row = tree.rows[node.leaf_begin + i];
        CHECK_FALSE(seen[row]);
        seen[row] = true;
      }
    }
    CHECK(covered == 1000);
  }
}

TEST_CASE("self-query returns the item itself at distance zero") {
  const EmbeddingTable table = random_table(200, 10, 5);
  const AnnForest forest = AnnForest::build(table, 10, 8, 7);
  const auto res = forest.query(std::uint64_t(17), QueryParams{5, 0});
  REQUIRE(!res.empty());
  CHECK(res[0].first == 17);
  CHECK(res[0].second == doctest::Approx(0.0f).epsilon(1e-6));
  for (std::size_t i = 1; i < res.size(); ++i) CHECK(res[i].second >= res[i - 1].second);
}

TEST_CASE("k larger than the table returns everything, sorted") {
  const EmbeddingTable table = random_table(12, 6, 9);
  const AnnForest forest = AnnForest::build(table, 4, 4, 2);
  const auto res = forest.query(table.row(0).data(), QueryParams{50, 0});
  CHECK(res.size() == 12);
  for (std::size_t i = 1; i < res.size(); ++i) {
    CHECK((res[i].second > res[i - 1].second ||
           (res[i].second == res[i - 1].second && res[i].first > res[i - 1].first)));
  }
}

TEST_CASE("identical vectors tie-break by ascending id") {
  EmbeddingTable table;
  table.dim = 3;
  for (std::uint64_t id : {9, 4, 7}) {
    const std::uint32_t r = table.add(id);
    table.row_mut(r)[0] = 1.f;  // all identical
  }
  const float q[3] = {1.f, 0.f, 0.f};
  const AnnForest forest = AnnForest::build(table, 3, 2, 1);
  const auto res = forest.query(q, QueryParams{3, 0});
  REQUIRE(res.size() == 3);
  CHECK(res[0].first == 4);
  CHECK(res[1].first == 7);
  CHECK(res[2].first == 9);

  const auto exact = exact_query(table, q, 3);
  REQUIRE(exact.size() == 3);
  CHECK(exact[0].first == 4);
  CHECK(exact[2].first == 9);
}

TEST_CASE("orthogonal axes give distances 0 and 1") {
  EmbeddingTable table;
  table.dim = 2;
  table.add(1);
  table.row_mut(0)[0] = 1.f;
  table.add(2);
  table.row_mut(1)[1] = 1.f;
  const float q[2] = {1.f, 0.f};
  const AnnForest forest = AnnForest::build(table, 2, 2, 11);
  const auto res = forest.query(q, QueryParams{2, 0});
  REQUIRE(res.size() == 2);
  CHECK(res[0].first == 1);
  CHECK(res[0].second == doctest::Approx(0.f));
  CHECK(res[1].first == 2);
  CHECK(res[1].second == doctest::Approx(1.f));
}

TEST_CASE("exact_query agrees with an independent double-precision scan") {
  const EmbeddingTable table = random_table(300, 12, 21);
  Rng rng(33);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<float> q(12);
    for (float& v : q) v = float(gaussian(rng));
    const auto fast = exact_query(table, q.data(), 8);
    const auto slow = brute_force_ids(table, q.data(), 8);
    REQUIRE(fast.size() == slow.size());
    for (std::size_t i = 0; i < slow.size(); ++i) CHECK(fast[i].first == slow[i]);
  }
}

TEST_CASE("recall@10 is high and monotone in the search budget") {
  const EmbeddingTable table = random_table(2000, 25, 77);
  const AnnForest forest = AnnForest::build(table, 20, 16, 31);
  Rng rng(55);

  double recall_small = 0.0, recall_mid = 0.0, recall_big = 0.0;
  const int n_queries = 100;
  for (int qi = 0; qi < n_queries; ++qi) {
    std::vector<float> q(25);
    for (float& v : q) v = float(gaussian(rng));
    const auto truth = exact_query(table, q.data(), 10);
    recall_small += recall_at(forest.query(q.data(), QueryParams{10, 200}), truth);
    recall_mid += recall_at(forest.query(q.data(), QueryParams{10, 2000}), truth);
    recall_big += recall_at(forest.query(q.data(), QueryParams{10, 20000}), truth);
  }
  recall_small /= n_queries;
  recall_mid /= n_queries;
  recall_big /= n_queries;

  CHECK(recall_mid >= 0.9);
  CHECK(recall_small <= recall_mid + 1e-12);
  CHECK(recall_mid <= recall_big + 1e-12);
  CHECK(recall_big >= 0.99);  // expands essentially every node
}

TEST_CASE("save/load round-trips queries exactly") {
  const EmbeddingTable table = random_table(400, 16, 13);
  const AnnForest forest = AnnForest::build(table, 8, 12, 17);
  testutil::TempDir dir("annindex");
  forest.save(dir.path("index.ann"));
  const AnnForest loaded = AnnForest::load(dir.path("index.ann"));

  CHECK(loaded.n_trees() == forest.n_trees());
  CHECK(loaded.leaf_size() == forest.leaf_size());
  CHECK(loaded.seed() == forest.seed());
  CHECK(loaded.items().ids == forest.items().ids);
  CHECK(loaded.items().data == forest.items().data);

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> q(16);
    for (float& v : q) v = float(gaussian(rng));
    const auto a = forest.query(q.data(), QueryParams{7, 500});
    const auto b = loaded.query(q.data(), QueryParams{7, 500});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].first == b[i].first);
      CHECK(a[i].second == b[i].second);
    }
  }
}

TEST_CASE("build is deterministic by seed") {
  const EmbeddingTable table = random_table(300, 10, 1);
  const AnnForest a = AnnForest::build(table, 6, 8, 42);
  const AnnForest b = AnnForest::build(table, 6, 8, 42);
  REQUIRE(a.trees().size() == b.trees().size());
  for (std::size_t t = 0; t < a.trees().size(); ++t) {
    CHECK(a.trees()[t].rows == b.trees()[t].rows);
    CHECK(a.trees()[t].nodes.size() == b.trees()[t].nodes.size());
  }
  const AnnForest c = AnnForest::build(table, 6, 8, 43);
  bool differs = false;
  for (std::size_t t = 0; t < a.trees().size() && !differs; ++t) {
    differs = a.trees()[t].rows != c.trees()[t].rows;
  }
  CHECK(differs);
}

TEST_CASE("build and query reject invalid input") {
  EmbeddingTable empty;
  empty.dim = 4;
  CHECK_THROWS_AS(AnnForest::build(empty, 4, 8, 1), std::invalid_argument);

  const EmbeddingTable table = random_table(10, 4, 2);
  CHECK_THROWS_AS(AnnForest::build(table, 0, 8, 1), std::invalid_argument);
  CHECK_THROWS_AS(AnnForest::build(table, 4, 0, 1), std::invalid_argument);

  const AnnForest forest = AnnForest::build(table, 2, 4, 3);
  CHECK_THROWS_AS(forest.query(std::uint64_t(999), QueryParams{3, 0}), std::runtime_error);
  const float zero[4] = {0.f, 0.f, 0.f, 0.f};
  CHECK_THROWS_AS(forest.query(zero, QueryParams{3, 0}), std::invalid_argument);
  CHECK_THROWS_AS(forest.query(table.row(0).data(), QueryParams{0, 0}), std::invalid_argument);
}
