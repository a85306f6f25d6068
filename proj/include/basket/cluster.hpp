#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "basket/aggregate.hpp"
#include "basket/annindex.hpp"
#include "basket/corpus.hpp"
#include "basket/embedding_store.hpp"

namespace basket {

struct KMeansConfig {
  std::uint32_t k = 5;
  std::uint32_t max_iter = 100;
  std::uint32_t n_init = 4;  // kmeans++ restarts; the lowest objective wins
  std::uint64_t seed = 42;

  void validate() const;  // throws std::invalid_argument
};

struct KMeansResult {
  std::uint32_t k = 0;
  std::uint32_t dim = 0;
  std::vector<double> centroids;          // k x dim, row-major
  std::vector<std::uint32_t> assignment;  // parallel to the input rows
  std::uint32_t n_iterations = 0;         // Lloyd iterations of the winning restart
  double objective = 0.0;                 // sum of squared distances to assigned centroid
  std::vector<double> objective_trace;    // one entry per iteration, non-increasing

  const double* centroid(std::uint32_t c) const { return centroids.data() + std::size_t(c) * dim; }
};

// Lloyd's k-means over the table rows. Distances and means are computed in
// double; assignment ties go to the lowest cluster index; an empty cluster
// steals the point farthest from its current centroid (donor keeps >= 1).
KMeansResult kmeans(const EmbeddingTable& points, const KMeansConfig& config);

// --- true/fake pair scoring -------------------------------------------------

// owner id -> the products behind the pooled vector. `sets` are sorted and
// deduplicated (for customers: the union over their trips); `multisets` keep
// one entry per purchase, so a product bought in three trips appears thrice.
using OwnerItems = std::unordered_map<std::uint64_t, std::vector<std::uint64_t>>;

OwnerItems owner_item_sets(const Corpus& corpus, PoolKind kind);
OwnerItems owner_item_multisets(const Corpus& corpus, PoolKind kind);

bool items_intersect(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

struct PairCounts {
  std::uint64_t true_pairs = 0;
  std::uint64_t fake_pairs = 0;
};

// nullopt when both counts are zero.
std::optional<double> cluster_score_from_counts(std::uint64_t true_pairs,
                                                std::uint64_t fake_pairs);

// For every row assigned to `cluster_id`, retrieve its nearest pooled
// neighbors within the same cluster (up to neighbors_per_point) through the
// forest; each ordered (point, neighbor) pair is TRUE when the two owners'
// item sets share at least one product, FAKE otherwise.
PairCounts pair_score(const AnnForest& forest, const std::vector<std::uint32_t>& assignment,
                      std::uint32_t cluster_id, const OwnerItems& item_sets,
                      std::uint32_t neighbors_per_point);

// --- department profiling ---------------------------------------------------

// Counts department occurrences over the multiset of all products bought by
// the members; descending count, ties by lexicographic department name.
std::vector<std::pair<std::string, std::uint64_t>> profile(
    const std::vector<std::uint64_t>& member_owner_ids, const Corpus& corpus,
    const OwnerItems& item_multisets, std::size_t top_n);

// --- full analysis ----------------------------------------------------------

struct ClusterReport {
  std::uint32_t cluster_id = 0;
  std::uint64_t size = 0;
  std::uint64_t true_pairs = 0;
  std::uint64_t fake_pairs = 0;
  std::optional<double> cluster_score;  // null when the cluster produced no pairs
  std::vector<std::pair<std::string, std::uint64_t>> top_departments;
};

struct ClusterAnalysisConfig {
  KMeansConfig kmeans;
  std::uint32_t neighbors_per_point = 10;
  std::uint32_t top_departments = 3;
  std::uint32_t n_trees = 20;  // forest over the pooled vectors
  std::uint32_t leaf_size = 16;
};

struct ClusterAnalysis {
  KMeansResult clustering;
  std::vector<ClusterReport> reports;  // index == cluster_id
};

// kmeans -> per-cluster pair scoring (through a forest built over `pooled`)
// -> department profiles. `kind` selects how owner ids map back to items.
ClusterAnalysis analyze_clusters(const EmbeddingTable& pooled, PoolKind kind,
                                 const Corpus& corpus, const ClusterAnalysisConfig& config);

// `cluster_id,size,true_pairs,fake_pairs,cluster_score,dept1,dept2,dept3`;
// the score field is empty when undefined, departments pad with empty fields.
std::string cluster_report_csv(const std::vector<ClusterReport>& reports);
std::string cluster_analysis_json(const ClusterAnalysis& analysis);

}  // namespace basket
