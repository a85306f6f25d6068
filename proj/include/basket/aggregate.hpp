#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "basket/corpus.hpp"
#include "basket/embedding_store.hpp"

namespace basket {

enum class PoolKind { trip, customer };

struct PooledEmbedding {
  std::uint64_t owner_id = 0;  // trip_id or customer_id
  PoolKind kind = PoolKind::trip;
  std::vector<float> vector;
  std::uint32_t n_items = 0;   // vectors averaged (multiset count for customers)
};

struct PoolStats {
  std::uint64_t skipped_oov_items = 0;  // items absent from the embedding vocabulary
  std::uint64_t skipped_owners = 0;     // owners with zero usable items
  bool sample_clamped = false;          // requested sample exceeded the population
};

struct SampleSpec {
  std::uint64_t size = 0;
  std::uint64_t seed = 0;
};

// Component-wise mean of rho rows over the trip's usable items.
PooledEmbedding trip_embedding(const Trip& trip, const EmbeddingTable& rho,
                               PoolStats* stats = nullptr);

// Mean over the multiset of products across all the customer's trips: a
// product bought in three trips contributes three times.
PooledEmbedding customer_embedding(std::uint64_t customer_id,
                                   const std::vector<const Trip*>& trips,
                                   const EmbeddingTable& rho, PoolStats* stats = nullptr);

// Pools every retained trip (or every customer with a retained trip), then
// optionally subsamples uniformly without replacement, deterministic by seed.
std::vector<PooledEmbedding> pool_all(const Corpus& corpus, const EmbeddingTable& rho,
                                      PoolKind kind,
                                      std::optional<SampleSpec> sample = std::nullopt,
                                      PoolStats* stats = nullptr);

EmbeddingTable pooled_to_table(const std::vector<PooledEmbedding>& pooled);

}  // namespace basket
