#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "basket/corpus.hpp"
#include "basket/embedding_store.hpp"

namespace basket {

enum class Pooling { mean, sum };

Pooling pooling_from_string(const std::string& s);  // "mean" | "sum"

struct TrainConfig {
  std::uint32_t dim = 100;
  std::uint32_t epochs = 20;
  std::uint32_t n_negative = 10;
  float learning_rate = 0.05f;  // Adagrad-scaled
  float l2_lambda = 1e-5f;
  float init_scale = 0.0f;      // <= 0 selects 0.1 / sqrt(dim)
  std::uint64_t seed = 42;
  Pooling context_pooling = Pooling::mean;
  std::uint32_t min_count = 5;  // vocabulary pruning threshold (trip occurrences)
  std::uint32_t threads = 1;    // >1 uses lock-free parallel updates, non-deterministic

  void validate() const;
  float effective_init_scale() const;
};

struct EpochStats {
  std::uint32_t epoch = 0;
  double mean_objective = 0.0;  // mean per-pair objective, measured pre-update
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
  double rho_norm = 0.0;   // Frobenius
  double alpha_norm = 0.0;
  std::uint64_t vocab_size = 0;
  std::uint64_t pruned_items = 0;
  std::uint64_t pairs_per_epoch = 0;
};

// Per-product embedding rho and context vector alpha; identical row layout.
struct EmbeddingPair {
  EmbeddingTable rho;
  EmbeddingTable alpha;
};

// Pooled context over trip.items \ {target}. Items missing from the table
// are skipped; an empty context is an error.
std::vector<float> context_vector(const Trip& trip, std::uint64_t target,
                                  const EmbeddingTable& alpha, Pooling pooling);

std::pair<EmbeddingPair, TrainReport> train(const Corpus& corpus, const TrainConfig& config);

}  // namespace basket
