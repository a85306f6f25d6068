#include "basket/annindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <queue>
#include <stdexcept>

#include "basket/rng.hpp"
#include "basket/simd/kernels.hpp"

namespace basket {

float cosine_distance(const float* a, const float* b, std::size_t n) {
  const double ab = simd::dot(a, b, n);
  const double aa = simd::dot(a, a, n);
  const double bb = simd::dot(b, b, n);
  if (aa <= 0.0 || bb <= 0.0) return 1.0f;
  double sim = ab / std::sqrt(aa * bb);
  sim = std::clamp(sim, -1.0, 1.0);
  return static_cast<float>(1.0 - sim);
}

namespace {

constexpr char kMagic[6] = {'A', 'N', 'N', 'F', '1', '\0'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

class TreeBuilder {
 public:
  TreeBuilder(const EmbeddingTable& items, std::uint32_t leaf_size, std::uint64_t seed)
      : items_(items), leaf_size_(leaf_size), rng_(seed) {}

  AnnForest::Tree build() {
    std::vector<std::uint32_t> rows(items_.size());
    for (std::uint32_t i = 0; i < rows.size(); ++i) rows[i] = i;
    build_node(std::move(rows));
    return std::move(tree_);
  }

 private:
  std::int32_t build_node(std::vector<std::uint32_t> rows) {
    const auto node_idx = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    if (rows.size() <= leaf_size_) {
      make_leaf(node_idx, rows);
      return node_idx;
    }

    std::vector<float> normal;
    float offset = 0.0f;
    std::vector<std::uint32_t> left_rows, right_rows;
    if (try_hyperplane_split(rows, normal, offset, left_rows, right_rows) ||
        random_balanced_split(rows, normal, offset, left_rows, right_rows)) {
      tree_.nodes[node_idx].normal = std::move(normal);
      tree_.nodes[node_idx].offset = offset;
      const std::int32_t left = build_node(std::move(left_rows));
      const std::int32_t right = build_node(std::move(right_rows));
      tree_.nodes[node_idx].left = left;
      tree_.nodes[node_idx].right = right;
      return node_idx;
    }
    make_leaf(node_idx, rows);  // identical points beyond leaf_size
    return node_idx;
  }

  void make_leaf(std::int32_t node_idx, const std::vector<std::uint32_t>& rows) {
    AnnForest::Node& node = tree_.nodes[node_idx];
    node.leaf_begin = static_cast<std::uint32_t>(tree_.rows.size());
    node.leaf_count = static_cast<std::uint32_t>(rows.size());
    tree_.rows.insert(tree_.rows.end(), rows.begin(), rows.end());
  }

  // Classic split: hyperplane normal to the segment between two sampled
  // points, passing through their midpoint. Fails on degenerate geometry.
  bool try_hyperplane_split(const std::vector<std::uint32_t>& rows,
                            std::vector<float>& normal, float& offset,
                            std::vector<std::uint32_t>& left_rows,
                            std::vector<std::uint32_t>& right_rows) {
    const std::uint32_t dim = items_.dim;
    const std::size_t a = uniform_u64(rng_, rows.size());
    std::size_t b = uniform_u64(rng_, rows.size() - 1);
    if (b >= a) ++b;
    const float* pa = items_.row(rows[a]).data();
    const float* pb = items_.row(rows[b]).data();

    normal.resize(dim);
    double norm_sq = 0.0;
    for (std::uint32_t d = 0; d < dim; ++d) {
      normal[d] = pa[d] - pb[d];
      norm_sq += double(normal[d]) * normal[d];
    }
    if (norm_sq < 1e-24) return false;
    const float inv = float(1.0 / std::sqrt(norm_sq));
    for (float& v : normal) v *= inv;

    // plane through the midpoint: side(x) = normal.x + offset
    double mid_proj = 0.0;
    for (std::uint32_t d = 0; d < dim; ++d) {
      mid_proj += 0.5 * (double(pa[d]) + double(pb[d])) * normal[d];
    }
    offset = float(-mid_proj);

    left_rows.clear();
    right_rows.clear();
    for (std::uint32_t row : rows) {
      const float side = simd::dot(normal.data(), items_.row(row).data(), dim) + offset;
      (side > 0.0f ? right_rows : left_rows).push_back(row);
    }
    return !left_rows.empty() && !right_rows.empty();
  }

  // Fallback: random direction, split at the median projection. Balanced by
  // construction unless every projection is identical.
  bool random_balanced_split(const std::vector<std::uint32_t>& rows,
                             std::vector<float>& normal, float& offset,
                             std::vector<std::uint32_t>& left_rows,
                             std::vector<std::uint32_t>& right_rows) {
    const std::uint32_t dim = items_.dim;
    normal.resize(dim);
    double norm_sq = 0.0;
    for (std::uint32_t d = 0; d < dim; ++d) {
      normal[d] = float(gaussian(rng_));
      norm_sq += double(normal[d]) * normal[d];
    }
    if (norm_sq <= 0.0) return false;
    const float inv = float(1.0 / std::sqrt(norm_sq));
    for (float& v : normal) v *= inv;

    std::vector<std::pair<float, std::uint32_t>> proj;
    proj.reserve(rows.size());
    for (std::uint32_t row : rows) {
      proj.emplace_back(simd::dot(normal.data(), items_.row(row).data(), dim), row);
    }
    std::sort(proj.begin(), proj.end());
    const std::size_t half = proj.size() / 2;
    if (proj.front().first == proj.back().first) return false;  // all identical
    // place the plane between the two halves
    offset = -0.5f * (proj[half - 1].first + proj[half].first);
    left_rows.clear();
    right_rows.clear();
    for (std::size_t i = 0; i < proj.size(); ++i) {
      (i < half ? left_rows : right_rows).push_back(proj[i].second);
    }
    return true;
  }

  const EmbeddingTable& items_;
  std::uint32_t leaf_size_;
  Rng rng_;
  AnnForest::Tree tree_;
};

}  // namespace

AnnForest AnnForest::build(EmbeddingTable items, std::uint32_t n_trees,
                           std::uint32_t leaf_size, std::uint64_t seed) {
  if (items.size() == 0) throw std::invalid_argument("ann build: no items");
  if (n_trees == 0) throw std::invalid_argument("ann build: n_trees must be >= 1");
  if (leaf_size == 0) throw std::invalid_argument("ann build: leaf_size must be >= 1");
  if (items.data.size() != std::size_t(items.size()) * items.dim) {
    throw std::invalid_argument("ann build: table shape mismatch");
  }

  AnnForest forest;
  forest.items_ = std::move(items);
  forest.leaf_size_ = leaf_size;
  forest.seed_ = seed;
  forest.trees_.reserve(n_trees);
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    TreeBuilder builder(forest.items_, leaf_size, derive_seed(seed, "ann-tree", t));
    forest.trees_.push_back(builder.build());
  }
  return forest;
}

std::vector<Neighbor> AnnForest::query(std::uint64_t id, const QueryParams& params) const {
  const float* v = items_.find(id);
  if (v == nullptr) {
    throw std::runtime_error("ann query: id " + std::to_string(id) + " not in index");
  }
  return query(v, params);
}

std::vector<Neighbor> AnnForest::query(const float* q, const QueryParams& params) const {
  if (params.k < 1) throw std::invalid_argument("ann query: k must be >= 1");
  const std::uint32_t dim = items_.dim;
  if (simd::dot(q, q, dim) <= 0.0f) {
    throw std::invalid_argument("ann query: zero query vector");
  }
  const std::uint32_t budget =
      std::max(params.effective_search_k(n_trees()), params.k);

  // Max-heap on (margin priority, tree, node); the tuple order makes
  // traversal fully deterministic.
  using Entry = std::tuple<float, std::uint32_t, std::int32_t>;
  std::priority_queue<Entry> pq;
  constexpr float kInf = std::numeric_limits<float>::infinity();
  for (std::uint32_t t = 0; t < trees_.size(); ++t) pq.emplace(kInf, t, 0);

  std::vector<char> seen(items_.size(), 0);
  std::vector<std::uint32_t> candidates;
  std::uint32_t expanded = 0;
  while (!pq.empty() && (expanded < budget || candidates.size() < params.k)) {
    const auto [priority, tree_idx, node_idx] = pq.top();
    pq.pop();
    ++expanded;
    const Tree& tree = trees_[tree_idx];
    const Node& node = tree.nodes[node_idx];
    if (node.is_leaf()) {
      for (std::uint32_t i = 0; i < node.leaf_count; ++i) {
        const std::uint32_t row = tree.rows[node.leaf_begin + i];
        if (!seen[row]) {
          seen[row] = 1;
          candidates.push_back(row);
        }
      }
      continue;
    }
    const float side = simd::dot(node.normal.data(), q, dim) + node.offset;
    pq.emplace(std::min(priority, side), tree_idx, node.right);
    pq.emplace(std::min(priority, -side), tree_idx, node.left);
  }

  std::vector<Neighbor> scored;
  scored.reserve(candidates.size());
  for (std::uint32_t row : candidates) {
    scored.emplace_back(items_.ids[row], cosine_distance(q, items_.row(row).data(), dim));
  }
  std::sort(scored.begin(), scored.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  if (scored.size() > params.k) scored.resize(params.k);
  return scored;
}

std::vector<Neighbor> exact_query(const EmbeddingTable& items, const float* q,
                                  std::uint32_t k) {
  if (k < 1) throw std::invalid_argument("exact query: k must be >= 1");
  if (simd::dot(q, q, items.dim) <= 0.0f) {
    throw std::invalid_argument("exact query: zero query vector");
  }
  std::vector<Neighbor> scored;
  scored.reserve(items.size());
  for (std::uint32_t row = 0; row < items.size(); ++row) {
    scored.emplace_back(items.ids[row], cosine_distance(q, items.row(row).data(), items.dim));
  }
  std::sort(scored.begin(), scored.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

void AnnForest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, items_.size());
  write_pod<std::uint32_t>(out, items_.dim);
  write_pod<std::uint32_t>(out, n_trees());
  write_pod<std::uint32_t>(out, leaf_size_);
  write_pod<std::uint64_t>(out, seed_);
  for (std::uint32_t r = 0; r < items_.size(); ++r) {
    write_pod<std::uint64_t>(out, items_.ids[r]);
    out.write(reinterpret_cast<const char*>(items_.row(r).data()),
              std::streamsize(items_.dim) * sizeof(float));
  }
  for (const Tree& tree : trees_) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tree.nodes.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tree.rows.size()));
    for (const Node& node : tree.nodes) {
      write_pod<std::int32_t>(out, node.left);
      write_pod<std::int32_t>(out, node.right);
      write_pod<std::uint32_t>(out, node.leaf_begin);
      write_pod<std::uint32_t>(out, node.leaf_count);
      write_pod<float>(out, node.offset);
      write_pod<std::uint8_t>(out, node.is_leaf() ? 0 : 1);
      if (!node.is_leaf()) {
        out.write(reinterpret_cast<const char*>(node.normal.data()),
                  std::streamsize(items_.dim) * sizeof(float));
      }
    }
    out.write(reinterpret_cast<const char*>(tree.rows.data()),
              std::streamsize(tree.rows.size()) * sizeof(std::uint32_t));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

AnnForest AnnForest::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not an ANNF1 file: " + path);
  }
  AnnForest forest;
  const auto v = read_pod<std::uint32_t>(in);
  forest.items_.dim = read_pod<std::uint32_t>(in);
  const auto n_trees = read_pod<std::uint32_t>(in);
  forest.leaf_size_ = read_pod<std::uint32_t>(in);
  forest.seed_ = read_pod<std::uint64_t>(in);
  if (!in || forest.items_.dim == 0) throw std::runtime_error("bad ANNF1 header: " + path);

  forest.items_.data.resize(std::size_t(v) * forest.items_.dim);
  for (std::uint32_t r = 0; r < v; ++r) {
    const auto id = read_pod<std::uint64_t>(in);
    in.read(reinterpret_cast<char*>(forest.items_.data.data() +
                                    std::size_t(r) * forest.items_.dim),
            std::streamsize(forest.items_.dim) * sizeof(float));
    forest.items_.ids.push_back(id);
    forest.items_.index.emplace(id, r);
  }
  forest.trees_.resize(n_trees);
  for (Tree& tree : forest.trees_) {
    const auto n_nodes = read_pod<std::uint32_t>(in);
    const auto n_rows = read_pod<std::uint32_t>(in);
    tree.nodes.resize(n_nodes);
    for (Node& node : tree.nodes) {
      node.left = read_pod<std::int32_t>(in);
      node.right = read_pod<std::int32_t>(in);
      node.leaf_begin = read_pod<std::uint32_t>(in);
      node.leaf_count = read_pod<std::uint32_t>(in);
      node.offset = read_pod<float>(in);
      const auto has_normal = read_pod<std::uint8_t>(in);
      if (has_normal != 0) {
        node.normal.resize(forest.items_.dim);
        in.read(reinterpret_cast<char*>(node.normal.data()),
                std::streamsize(forest.items_.dim) * sizeof(float));
      }
    }
    tree.rows.resize(n_rows);
    in.read(reinterpret_cast<char*>(tree.rows.data()),
            std::streamsize(n_rows) * sizeof(std::uint32_t));
  }
  if (!in) throw std::runtime_error("truncated ANNF1 file: " + path);
  return forest;
}

}  // namespace basket
