#include "basket/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

#include <json.hpp>

#include "basket/rng.hpp"
#include "basket/simd/kernels.hpp"

namespace basket {

namespace {

constexpr std::uint32_t kNoCluster = std::numeric_limits<std::uint32_t>::max();

std::size_t count_distinct_rows(const EmbeddingTable& points) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(points.size());
  const std::size_t bytes = std::size_t(points.dim) * sizeof(float);
  for (std::uint32_t r = 0; r < points.size(); ++r) {
    seen.emplace(reinterpret_cast<const char*>(points.row(r).data()), bytes);
  }
  return seen.size();
}

struct LloydRun {
  std::vector<double> centroids;
  std::vector<std::uint32_t> assignment;
  std::uint32_t n_iterations = 0;
  double objective = 0.0;
  std::vector<double> trace;
};

// D^2-weighted kmeans++ seeding.
std::vector<double> seed_centroids(const std::vector<double>& x, std::size_t n,
                                   std::size_t dim, std::uint32_t k, Rng& rng) {
  std::vector<double> centroids(std::size_t(k) * dim);
  std::vector<double> dist2(n, 0.0);

  const std::size_t first = uniform_u64(rng, n);
  std::copy_n(x.data() + first * dim, dim, centroids.data());
  for (std::size_t i = 0; i < n; ++i) {
    dist2[i] = simd::sqdist(x.data() + i * dim, centroids.data(), dim);
  }

  for (std::uint32_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : dist2) total += d;
    std::size_t pick = n;  // sentinel
    if (total > 0.0) {
      const double threshold = uniform_real01(rng) * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += dist2[i];
        if (cum > threshold && dist2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // rounding slipped past the end; take the last positive mass
        for (std::size_t i = n; i-- > 0;) {
          if (dist2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    }
    if (pick == n) {
      throw std::invalid_argument("kmeans: fewer than k distinct points");
    }
    double* cptr = centroids.data() + std::size_t(c) * dim;
    std::copy_n(x.data() + pick * dim, dim, cptr);
    for (std::size_t i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], simd::sqdist(x.data() + i * dim, cptr, dim));
    }
  }
  return centroids;
}

LloydRun lloyd(const std::vector<double>& x, std::size_t n, std::size_t dim,
               std::uint32_t k, std::uint32_t max_iter, Rng& rng) {
  LloydRun run;
  run.centroids = seed_centroids(x, n, dim, k, rng);
  run.assignment.assign(n, kNoCluster);

  std::vector<std::uint64_t> counts(k, 0);
  for (std::uint32_t iter = 1; iter <= max_iter; ++iter) {
    // Assignment: nearest centroid, ties to the lowest index.
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t arg = 0;
      double best = simd::sqdist(x.data() + i * dim, run.centroids.data(), dim);
      for (std::uint32_t c = 1; c < k; ++c) {
        const double d =
            simd::sqdist(x.data() + i * dim, run.centroids.data() + std::size_t(c) * dim, dim);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      if (arg != run.assignment[i]) changed = true;
      run.assignment[i] = arg;
      ++counts[arg];
    }
    if (!changed && iter > 1) break;  // fixpoint: the update step is a no-op

    // Empty-cluster repair: steal the point farthest from its centroid from a
    // cluster that keeps at least one member; ties to the lowest row index.
    for (std::uint32_t e = 0; e < k; ++e) {
      if (counts[e] != 0) continue;
      std::size_t steal = n;
      double farthest = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[run.assignment[i]] < 2) continue;
        const double d = simd::sqdist(
            x.data() + i * dim, run.centroids.data() + std::size_t(run.assignment[i]) * dim, dim);
        if (d > farthest) {
          farthest = d;
          steal = i;
        }
      }
      if (steal == n) {
        throw std::logic_error("kmeans: cannot repair empty cluster");  // unreachable for k <= n
      }
      --counts[run.assignment[steal]];
      run.assignment[steal] = e;
      counts[e] = 1;
    }

    // Update: each centroid becomes the mean of its members.
    std::fill(run.centroids.begin(), run.centroids.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      simd::axpy(1.0, x.data() + i * dim,
                 run.centroids.data() + std::size_t(run.assignment[i]) * dim, dim);
    }
    for (std::uint32_t c = 0; c < k; ++c) {
      double* cptr = run.centroids.data() + std::size_t(c) * dim;
      const double inv = 1.0 / double(counts[c]);
      for (std::size_t d = 0; d < dim; ++d) cptr[d] *= inv;
    }

    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      objective += simd::sqdist(x.data() + i * dim,
                                run.centroids.data() + std::size_t(run.assignment[i]) * dim, dim);
    }
    run.trace.push_back(objective);
    run.objective = objective;
    run.n_iterations = iter;
  }
  return run;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", score);
  return buf;
}

}  // namespace

void KMeansConfig::validate() const {
  if (k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
  if (max_iter == 0) throw std::invalid_argument("kmeans: max_iter must be >= 1");
  if (n_init == 0) throw std::invalid_argument("kmeans: n_init must be >= 1");
}

KMeansResult kmeans(const EmbeddingTable& points, const KMeansConfig& config) {
  config.validate();
  const std::size_t n = points.size();
  const std::size_t dim = points.dim;
  if (n == 0 || dim == 0) throw std::invalid_argument("kmeans: empty input");
  if (config.k > n) {
    throw std::invalid_argument("kmeans: k (" + std::to_string(config.k) +
                                ") exceeds number of points (" + std::to_string(n) + ")");
  }
  if (count_distinct_rows(points) < config.k) {
    throw std::invalid_argument("kmeans: fewer than k distinct points");
  }

  std::vector<double> x(n * dim);
  for (std::size_t i = 0; i < n * dim; ++i) x[i] = points.data[i];

  LloydRun best;
  bool have_best = false;
  for (std::uint32_t r = 0; r < config.n_init; ++r) {
    Rng rng(derive_seed(config.seed, "kmeans-init", r));
    LloydRun run = lloyd(x, n, dim, config.k, config.max_iter, rng);
    if (!have_best || run.objective < best.objective) {
      best = std::move(run);
      have_best = true;
    }
  }

  KMeansResult result;
  result.k = config.k;
  result.dim = points.dim;
  result.centroids = std::move(best.centroids);
  result.assignment = std::move(best.assignment);
  result.n_iterations = best.n_iterations;
  result.objective = best.objective;
  result.objective_trace = std::move(best.trace);
  return result;
}

OwnerItems owner_item_sets(const Corpus& corpus, PoolKind kind) {
  OwnerItems out;
  if (kind == PoolKind::trip) {
    for (const Trip& t : corpus.trips) out.emplace(t.trip_id, t.items);  // already sorted unique
    return out;
  }
  for (const Trip& t : corpus.trips) {
    auto& items = out[t.customer_id];
    items.insert(items.end(), t.items.begin(), t.items.end());
  }
  for (auto& [owner, items] : out) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  return out;
}

OwnerItems owner_item_multisets(const Corpus& corpus, PoolKind kind) {
  OwnerItems out;
  if (kind == PoolKind::trip) {
    for (const Trip& t : corpus.trips) out.emplace(t.trip_id, t.items);
    return out;
  }
  for (const Trip& t : corpus.trips) {
    auto& items = out[t.customer_id];
    items.insert(items.end(), t.items.begin(), t.items.end());
  }
  return out;
}

bool items_intersect(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return false;
}

std::optional<double> cluster_score_from_counts(std::uint64_t true_pairs,
                                                std::uint64_t fake_pairs) {
  const std::uint64_t total = true_pairs + fake_pairs;
  if (total == 0) return std::nullopt;
  return double(true_pairs) / double(total);
}

PairCounts pair_score(const AnnForest& forest, const std::vector<std::uint32_t>& assignment,
                      std::uint32_t cluster_id, const OwnerItems& item_sets,
                      std::uint32_t neighbors_per_point) {
  const EmbeddingTable& table = forest.items();
  if (assignment.size() != table.size()) {
    throw std::invalid_argument("pair_score: assignment size does not match indexed points");
  }
  static const std::vector<std::uint64_t> kEmpty;
  const auto items_of = [&](std::uint64_t owner) -> const std::vector<std::uint64_t>& {
    const auto it = item_sets.find(owner);
    return it == item_sets.end() ? kEmpty : it->second;
  };

  PairCounts counts;
  QueryParams params;
  params.k = neighbors_per_point + 1;  // the point itself comes back first
  for (std::uint32_t r = 0; r < table.size(); ++r) {
    if (assignment[r] != cluster_id) continue;
    const std::uint64_t owner = table.ids[r];
    const auto& own_items = items_of(owner);
    std::uint32_t taken = 0;
    for (const auto& [other, dist] : forest.query(table.row(r).data(), params)) {
      if (other == owner) continue;
      const auto row_it = table.index.find(other);
      if (row_it == table.index.end() || assignment[row_it->second] != cluster_id) continue;
      if (items_intersect(own_items, items_of(other))) {
        ++counts.true_pairs;
      } else {
        ++counts.fake_pairs;
      }
      if (++taken == neighbors_per_point) break;
    }
  }
  return counts;
}

std::vector<std::pair<std::string, std::uint64_t>> profile(
    const std::vector<std::uint64_t>& member_owner_ids, const Corpus& corpus,
    const OwnerItems& item_multisets, std::size_t top_n) {
  std::map<std::string, std::uint64_t> dept_counts;
  for (std::uint64_t owner : member_owner_ids) {
    const auto it = item_multisets.find(owner);
    if (it == item_multisets.end()) continue;
    for (std::uint64_t item : it->second) ++dept_counts[corpus.department_of(item)];
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(dept_counts.begin(),
                                                            dept_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_n) ranked.resize(top_n);
  return ranked;
}

ClusterAnalysis analyze_clusters(const EmbeddingTable& pooled, PoolKind kind,
                                 const Corpus& corpus, const ClusterAnalysisConfig& config) {
  ClusterAnalysis analysis;
  analysis.clustering = kmeans(pooled, config.kmeans);

  const AnnForest forest = AnnForest::build(pooled, config.n_trees, config.leaf_size,
                                            derive_seed(config.kmeans.seed, "cluster-forest"));
  const OwnerItems sets = owner_item_sets(corpus, kind);
  const OwnerItems multisets = owner_item_multisets(corpus, kind);

  std::vector<std::vector<std::uint64_t>> members(config.kmeans.k);
  for (std::uint32_t r = 0; r < pooled.size(); ++r) {
    members[analysis.clustering.assignment[r]].push_back(pooled.ids[r]);
  }

  for (std::uint32_t c = 0; c < config.kmeans.k; ++c) {
    ClusterReport report;
    report.cluster_id = c;
    report.size = members[c].size();
    const PairCounts counts = pair_score(forest, analysis.clustering.assignment, c, sets,
                                         config.neighbors_per_point);
    report.true_pairs = counts.true_pairs;
    report.fake_pairs = counts.fake_pairs;
    report.cluster_score = cluster_score_from_counts(counts.true_pairs, counts.fake_pairs);
    report.top_departments = profile(members[c], corpus, multisets, config.top_departments);
    analysis.reports.push_back(std::move(report));
  }
  return analysis;
}

std::string cluster_report_csv(const std::vector<ClusterReport>& reports) {
  std::string out = "cluster_id,size,true_pairs,fake_pairs,cluster_score,dept1,dept2,dept3\n";
  for (const ClusterReport& r : reports) {
    out += std::to_string(r.cluster_id) + ',' + std::to_string(r.size) + ',' +
           std::to_string(r.true_pairs) + ',' + std::to_string(r.fake_pairs) + ',';
    if (r.cluster_score) out += format_score(*r.cluster_score);
    for (std::size_t i = 0; i < 3; ++i) {
      out += ',';
      if (i < r.top_departments.size()) out += csv_field(r.top_departments[i].first);
    }
    out += '\n';
  }
  return out;
}

std::string cluster_analysis_json(const ClusterAnalysis& analysis) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const ClusterReport& r : analysis.reports) {
    nlohmann::json depts = nlohmann::json::array();
    for (const auto& [name, count] : r.top_departments) {
      depts.push_back({{"department", name}, {"count", count}});
    }
    nlohmann::json row = {{"cluster_id", r.cluster_id},   {"size", r.size},
                          {"true_pairs", r.true_pairs},   {"fake_pairs", r.fake_pairs},
                          {"top_departments", depts}};
    if (r.cluster_score) {
      row["cluster_score"] = *r.cluster_score;
    } else {
      row["cluster_score"] = nullptr;
    }
    clusters.push_back(std::move(row));
  }
  const nlohmann::json doc = {{"k", analysis.clustering.k},
                              {"objective", analysis.clustering.objective},
                              {"n_iterations", analysis.clustering.n_iterations},
                              {"clusters", clusters}};
  return doc.dump(2);
}

}  // namespace basket
