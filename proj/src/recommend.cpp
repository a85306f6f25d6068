#include "basket/recommend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "basket/simd/kernels.hpp"

namespace basket {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void throw_unknown(std::uint64_t product_id, const Catalog& catalog) {
  const auto it = catalog.find(product_id);
  if (it == catalog.end()) {
    throw std::runtime_error("unknown product id " + std::to_string(product_id) +
                             ": not in the catalog");
  }
  throw std::runtime_error("product id " + std::to_string(product_id) + " ('" +
                           it->second.name +
                           "') has no embedding: it was pruned by min_count or never "
                           "appeared in a retained trip");
}

const std::string& name_of(const Catalog& catalog, std::uint64_t id) {
  static const std::string empty;
  const auto it = catalog.find(id);
  return it == catalog.end() ? empty : it->second.name;
}

}  // namespace

const char* rec_kind_name(RecKind kind) {
  switch (kind) {
    case RecKind::similar:
      return "similar";
    case RecKind::cooccur:
      return "cooccur";
    default:
      return "analogy";
  }
}

Recommendation similar(std::uint64_t product_id, const AnnForest& rho_forest,
                       std::uint32_t k, const Catalog& catalog) {
  const float* v = rho_forest.items().find(product_id);
  if (v == nullptr) throw_unknown(product_id, catalog);

  QueryParams params;
  params.k = k + 1;  // the query itself comes back at distance 0
  Recommendation rec{product_id, RecKind::similar, {}};
  for (const auto& [id, dist] : rho_forest.query(v, params)) {
    if (id == product_id) continue;
    rec.results.push_back({id, name_of(catalog, id), 1.0 - double(dist)});
    if (rec.results.size() == k) break;
  }
  return rec;
}

Recommendation cooccur(std::uint64_t product_id, const EmbeddingTable& rho,
                       const AnnForest& alpha_forest, std::uint32_t k,
                       const Catalog& catalog, CooccurMetric metric) {
  const float* rho_x = rho.find(product_id);
  if (rho_x == nullptr) throw_unknown(product_id, catalog);
  if (rho.dim != alpha_forest.items().dim) {
    throw std::invalid_argument("cooccur: rho and alpha dimensions differ");
  }

  // Candidate pool via the cosine index, then exact re-scoring under the
  // requested metric.
  QueryParams params;
  params.k = std::min<std::uint32_t>(alpha_forest.items().size(),
                                     std::max<std::uint32_t>(k * 10, k + 1));
  const auto candidates = alpha_forest.query(rho_x, params);

  const auto& items = alpha_forest.items();
  Recommendation rec{product_id, RecKind::cooccur, {}};
  for (const auto& [id, dist] : candidates) {
    if (id == product_id) continue;
    const float* alpha_y = items.find(id);
    double score;
    if (metric == CooccurMetric::dot) {
      score = simd::dot(rho_x, alpha_y, items.dim);
    } else {
      score = 1.0 - double(cosine_distance(rho_x, alpha_y, items.dim));
    }
    rec.results.push_back({id, name_of(catalog, id), score});
  }
  std::sort(rec.results.begin(), rec.results.end(), [](const RecResult& a, const RecResult& b) {
    return a.score != b.score ? a.score > b.score : a.product_id < b.product_id;
  });
  if (rec.results.size() > k) rec.results.resize(k);
  return rec;
}

Recommendation analogy(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                       const AnnForest& rho_forest, std::uint32_t k,
                       const Catalog& catalog) {
  const auto& items = rho_forest.items();
  const float* va = items.find(a);
  const float* vb = items.find(b);
  const float* vc = items.find(c);
  if (va == nullptr) throw_unknown(a, catalog);
  if (vb == nullptr) throw_unknown(b, catalog);
  if (vc == nullptr) throw_unknown(c, catalog);

  std::vector<float> q(items.dim);
  double norm_sq = 0.0;
  for (std::uint32_t d = 0; d < items.dim; ++d) {
    q[d] = vb[d] - va[d] + vc[d];
    norm_sq += double(q[d]) * q[d];
  }
  if (norm_sq <= 0.0) {
    throw std::runtime_error("analogy: query vector rho_b - rho_a + rho_c is zero");
  }

  QueryParams params;
  params.k = k + 3;  // a, b, c may all appear
  Recommendation rec{b, RecKind::analogy, {}};
  for (const auto& [id, dist] : rho_forest.query(q.data(), params)) {
    if (id == a || id == b || id == c) continue;
    rec.results.push_back({id, name_of(catalog, id), 1.0 - double(dist)});
    if (rec.results.size() == k) break;
  }
  return rec;
}

std::vector<std::uint64_t> suggest_by_name(const Catalog& catalog, const std::string& text,
                                           std::size_t limit) {
  const std::string needle = lower(text);
  if (needle.empty()) return {};
  std::vector<std::uint64_t> out;
  for (const auto& [id, product] : catalog) {
    if (lower(product.name).find(needle) != std::string::npos) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  if (out.size() > limit) out.resize(limit);
  return out;
}

std::string recommendation_to_json(const Recommendation& rec) {
  nlohmann::json results = nlohmann::json::array();
  for (const RecResult& r : rec.results) {
    results.push_back({{"id", r.product_id}, {"name", r.name}, {"score", r.score}});
  }
  const nlohmann::json doc = {
      {"query", rec.query_id}, {"kind", rec_kind_name(rec.kind)}, {"results", results}};
  return doc.dump(2);
}

}  // namespace basket
