#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "basket/annindex.hpp"
#include "basket/corpus.hpp"
#include "basket/efemb.hpp"

namespace basket {

enum class RecKind { similar, cooccur, analogy };
enum class CooccurMetric { dot, cosine };

const char* rec_kind_name(RecKind kind);

struct RecResult {
  std::uint64_t product_id = 0;
  std::string name;
  double score = 0.0;
};

struct Recommendation {
  std::uint64_t query_id = 0;
  RecKind kind = RecKind::similar;
  std::vector<RecResult> results;  // descending score, query excluded
};

// Top-k by rho-rho cosine similarity; the query product itself is removed.
Recommendation similar(std::uint64_t product_id, const AnnForest& rho_forest,
                       std::uint32_t k, const Catalog& catalog);

// Top-k by rho_x . alpha_y, retrieved through the alpha index and exactly
// re-scored. `metric` selects the raw inner product (default; matches the
// signed-score analysis) or plain cosine similarity.
Recommendation cooccur(std::uint64_t product_id, const EmbeddingTable& rho,
                       const AnnForest& alpha_forest, std::uint32_t k,
                       const Catalog& catalog,
                       CooccurMetric metric = CooccurMetric::dot);

// Query vector rho_b - rho_a + rho_c; a, b and c are excluded from results.
Recommendation analogy(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                       const AnnForest& rho_forest, std::uint32_t k,
                       const Catalog& catalog);

// Error helper: catalog entries whose name contains `text` (case-insensitive),
// used to make unknown-product errors actionable.
std::vector<std::uint64_t> suggest_by_name(const Catalog& catalog, const std::string& text,
                                           std::size_t limit = 5);

std::string recommendation_to_json(const Recommendation& rec);

}  // namespace basket
