#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "basket/embedding_store.hpp"

namespace basket {

// 1 - cos(u, v), in [0, 2]. Vectors with zero norm score similarity 0.
float cosine_distance(const float* a, const float* b, std::size_t n);

struct QueryParams {
  std::uint32_t k = 10;
  std::uint32_t search_k = 0;  // 0 selects n_trees * k * 10

  std::uint32_t effective_search_k(std::uint32_t n_trees) const {
    return search_k != 0 ? search_k : n_trees * k * 10;
  }
};

using Neighbor = std::pair<std::uint64_t, float>;  // (id, cosine distance)

// Random-projection-tree forest over a vector table, cosine metric.
// Immutable after build; persisted in the ANNF1 binary format.
class AnnForest {
 public:
  struct Node {
    std::int32_t left = -1;   // -1 on leaves
    std::int32_t right = -1;
    std::uint32_t leaf_begin = 0;
    std::uint32_t leaf_count = 0;
    float offset = 0.0f;
    std::vector<float> normal;  // unit length, empty on leaves

    bool is_leaf() const { return left < 0; }
  };

  struct Tree {
    std::vector<Node> nodes;          // nodes[0] is the root
    std::vector<std::uint32_t> rows;  // leaf item rows, contiguous per leaf
  };

  static AnnForest build(EmbeddingTable items, std::uint32_t n_trees,
                         std::uint32_t leaf_size, std::uint64_t seed);

  // Candidates are gathered across all trees through a shared priority queue
  // until `search_k` nodes have been expanded (and at least k candidates
  // found), then deduplicated and exactly re-scored by cosine distance.
  // Ascending distance, ties by ascending id.
  std::vector<Neighbor> query(const float* q, const QueryParams& params) const;
  std::vector<Neighbor> query(std::uint64_t id, const QueryParams& params) const;

  const EmbeddingTable& items() const { return items_; }
  std::uint32_t n_trees() const { return static_cast<std::uint32_t>(trees_.size()); }
  std::uint32_t leaf_size() const { return leaf_size_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Tree>& trees() const { return trees_; }

  void save(const std::string& path) const;
  static AnnForest load(const std::string& path);

 private:
  AnnForest() = default;

  EmbeddingTable items_;
  std::vector<Tree> trees_;
  std::uint32_t leaf_size_ = 16;
  std::uint64_t seed_ = 0;
};

// Exact full-scan oracle with the same distance and tie rules.
std::vector<Neighbor> exact_query(const EmbeddingTable& items, const float* q,
                                  std::uint32_t k);

}  // namespace basket
