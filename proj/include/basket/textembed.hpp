#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "basket/corpus.hpp"
#include "basket/efemb.hpp"

namespace basket {

// Token vocabulary over lowercased, punctuation-stripped product names.
// Token ids are dense 0..T-1, assigned in sorted token order.
struct TokenVocab {
  std::unordered_map<std::string, std::uint32_t> token_to_id;
  std::vector<std::string> tokens;  // id -> token

  std::uint32_t size() const { return static_cast<std::uint32_t>(tokens.size()); }
};

// Lowercase, split on non-alphanumeric runs, drop empties.
std::vector<std::string> tokenize(const std::string& name);

struct NameEmbeddings {
  TokenVocab vocab;
  EmbeddingPair tokens;  // token-level rho/alpha, keyed by token id
  TrainReport report;
};

// Each product name becomes one "basket" of its distinct tokens; names with
// fewer than two distinct tokens carry no context and are dropped. The
// embedding machinery is exactly the basket trainer.
NameEmbeddings train_name_embeddings(const Catalog& catalog, TrainConfig config);

struct SentenceVector {
  std::vector<float> values;
  std::uint32_t in_vocab_tokens = 0;  // 0 means all-OOV (zero vector)
};

// Mean of token rho vectors over in-vocabulary tokens.
SentenceVector sentence_embedding(const std::string& name, const NameEmbeddings& names);

struct CombinedEmbedding {
  std::uint64_t product_id = 0;
  std::vector<float> values;  // [rho block | sentence block]
  std::uint32_t d_product = 0;
  std::uint32_t d_sentence = 0;
  bool normalized = false;
};

// Concatenate [rho_product | sentence]; if normalize, each block is scaled
// to unit L2 norm first (zero blocks stay zero).
CombinedEmbedding combine(std::uint64_t product_id, const EmbeddingPair& products,
                          const std::vector<float>& sentence, bool normalize);

struct CombinedSet {
  EmbeddingTable table;       // dim = d_product + d_sentence
  std::uint32_t d_product = 0;
  std::uint32_t d_sentence = 0;
  bool normalized = false;
  std::uint64_t all_oov_names = 0;  // warning counter
};

// Sentence vectors for every product in `products`, concatenated per product.
CombinedSet combine_all(const Catalog& catalog, const EmbeddingPair& products,
                        const NameEmbeddings& names, bool normalize);

// Per-product sentence vectors alone (dim = token embedding dim).
std::pair<EmbeddingTable, std::uint64_t> sentence_table(const Catalog& catalog,
                                                        const EmbeddingPair& products,
                                                        const NameEmbeddings& names);

}  // namespace basket
