#include "basket/textembed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include "basket/simd/kernels.hpp"

namespace basket {

std::vector<std::string> tokenize(const std::string& name) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : name) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

NameEmbeddings train_name_embeddings(const Catalog& catalog, TrainConfig config) {
  NameEmbeddings result;

  std::set<std::string> all_tokens;
  for (const auto& [id, product] : catalog) {
    for (auto& tok : tokenize(product.name)) all_tokens.insert(std::move(tok));
  }
  if (all_tokens.size() < 2) {
    throw std::runtime_error("train_name_embeddings: fewer than 2 distinct tokens in catalog");
  }
  for (const std::string& tok : all_tokens) {
    const auto id = result.vocab.size();
    result.vocab.token_to_id.emplace(tok, id);
    result.vocab.tokens.push_back(tok);
  }

  // Token corpus: one trip per product name, items = distinct token ids.
  Corpus token_corpus;
  token_corpus.min_basket = 2;
  for (std::uint32_t t = 0; t < result.vocab.size(); ++t) {
    token_corpus.catalog.emplace(t, Product{t, result.vocab.tokens[t], "TOKEN"});
  }
  std::vector<std::pair<std::uint64_t, const Product*>> ordered;
  ordered.reserve(catalog.size());
  for (const auto& [id, product] : catalog) ordered.emplace_back(id, &product);
  std::sort(ordered.begin(), ordered.end());

  for (const auto& [product_id, product] : ordered) {
    Trip trip;
    trip.trip_id = product_id;
    for (const std::string& tok : tokenize(product->name)) {
      trip.items.push_back(result.vocab.token_to_id.at(tok));
    }
    std::sort(trip.items.begin(), trip.items.end());
    trip.items.erase(std::unique(trip.items.begin(), trip.items.end()), trip.items.end());
    if (trip.items.size() >= 2) token_corpus.trips.push_back(std::move(trip));
  }
  if (token_corpus.trips.empty()) {
    throw std::runtime_error(
        "train_name_embeddings: every name has a single distinct token, no context to train on");
  }

  auto [pair, report] = train(token_corpus, config);
  result.tokens = std::move(pair);
  result.report = std::move(report);
  return result;
}

SentenceVector sentence_embedding(const std::string& name, const NameEmbeddings& names) {
  SentenceVector out;
  out.values.assign(names.tokens.rho.dim, 0.0f);
  for (const std::string& tok : tokenize(name)) {
    const auto it = names.vocab.token_to_id.find(tok);
    if (it == names.vocab.token_to_id.end()) continue;
    if (const float* row = names.tokens.rho.find(it->second); row != nullptr) {
      simd::axpy(1.0f, row, out.values.data(), names.tokens.rho.dim);
      ++out.in_vocab_tokens;
    }
  }
  if (out.in_vocab_tokens > 0) {
    const float w = 1.0f / float(out.in_vocab_tokens);
    for (float& v : out.values) v *= w;
  }
  return out;
}

namespace {

// Scale a block to unit L2 norm; zero blocks stay zero.
void normalize_block(float* v, std::size_t n) {
  const double norm = std::sqrt(double(simd::dot(v, v, n)));
  if (norm <= 0.0) return;
  const float inv = float(1.0 / norm);
  for (std::size_t i = 0; i < n; ++i) v[i] *= inv;
}

}  // namespace

CombinedEmbedding combine(std::uint64_t product_id, const EmbeddingPair& products,
                          const std::vector<float>& sentence, bool normalize) {
  const float* rho = products.rho.find(product_id);
  if (rho == nullptr) {
    throw std::runtime_error("combine: unknown product " + std::to_string(product_id));
  }
  CombinedEmbedding out;
  out.product_id = product_id;
  out.d_product = products.rho.dim;
  out.d_sentence = static_cast<std::uint32_t>(sentence.size());
  out.normalized = normalize;
  out.values.assign(rho, rho + out.d_product);
  out.values.insert(out.values.end(), sentence.begin(), sentence.end());
  if (normalize) {
    normalize_block(out.values.data(), out.d_product);
    normalize_block(out.values.data() + out.d_product, out.d_sentence);
  }
  return out;
}

std::pair<EmbeddingTable, std::uint64_t> sentence_table(const Catalog& catalog,
                                                        const EmbeddingPair& products,
                                                        const NameEmbeddings& names) {
  EmbeddingTable table;
  table.dim = names.tokens.rho.dim;
  std::uint64_t all_oov = 0;

  std::vector<std::uint64_t> order = products.rho.ids;
  std::sort(order.begin(), order.end());
  for (std::uint64_t id : order) {
    const auto it = catalog.find(id);
    if (it == catalog.end()) continue;
    SentenceVector sv = sentence_embedding(it->second.name, names);
    if (sv.in_vocab_tokens == 0) ++all_oov;
    const auto row = table.add(id);
    std::copy(sv.values.begin(), sv.values.end(), table.row_mut(row).begin());
  }
  return {std::move(table), all_oov};
}

CombinedSet combine_all(const Catalog& catalog, const EmbeddingPair& products,
                        const NameEmbeddings& names, bool normalize) {
  auto [sentences, all_oov] = sentence_table(catalog, products, names);
  CombinedSet set;
  set.d_product = products.rho.dim;
  set.d_sentence = sentences.dim;
  set.normalized = normalize;
  set.all_oov_names = all_oov;
  set.table.dim = set.d_product + set.d_sentence;

  for (std::uint32_t r = 0; r < sentences.size(); ++r) {
    const std::uint64_t id = sentences.ids[r];
    const auto srow = sentences.row(r);
    CombinedEmbedding one =
        combine(id, products, {srow.begin(), srow.end()}, normalize);
    const auto row = set.table.add(id);
    std::copy(one.values.begin(), one.values.end(), set.table.row_mut(row).begin());
  }
  return set;
}

}  // namespace basket
