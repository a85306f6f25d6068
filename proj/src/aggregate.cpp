#include "basket/aggregate.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "basket/rng.hpp"

namespace basket {

namespace {

// Accumulates rho rows in double precision, emits the float mean.
struct MeanAccumulator {
  std::vector<double> sum;
  std::uint32_t count = 0;

  explicit MeanAccumulator(std::uint32_t dim) : sum(dim, 0.0) {}

  void add(const float* row) {
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += row[d];
    ++count;
  }

  std::vector<float> mean() const {
    std::vector<float> out(sum.size());
    const double inv = 1.0 / double(count);
    for (std::size_t d = 0; d < sum.size(); ++d) out[d] = float(sum[d] * inv);
    return out;
  }
};

}  // namespace

PooledEmbedding trip_embedding(const Trip& trip, const EmbeddingTable& rho, PoolStats* stats) {
  MeanAccumulator acc(rho.dim);
  for (std::uint64_t id : trip.items) {
    if (const float* row = rho.find(id); row != nullptr) {
      acc.add(row);
    } else if (stats != nullptr) {
      ++stats->skipped_oov_items;
    }
  }
  if (acc.count == 0) {
    throw std::runtime_error("trip_embedding: trip " + std::to_string(trip.trip_id) +
                             " has no items in the embedding vocabulary");
  }
  return {trip.trip_id, PoolKind::trip, acc.mean(), acc.count};
}

PooledEmbedding customer_embedding(std::uint64_t customer_id,
                                   const std::vector<const Trip*>& trips,
                                   const EmbeddingTable& rho, PoolStats* stats) {
  if (trips.empty()) {
    throw std::runtime_error("customer_embedding: customer " + std::to_string(customer_id) +
                             " has no retained trips");
  }
  MeanAccumulator acc(rho.dim);
  for (const Trip* trip : trips) {
    for (std::uint64_t id : trip->items) {
      if (const float* row = rho.find(id); row != nullptr) {
        acc.add(row);
      } else if (stats != nullptr) {
        ++stats->skipped_oov_items;
      }
    }
  }
  if (acc.count == 0) {
    throw std::runtime_error("customer_embedding: customer " + std::to_string(customer_id) +
                             " has no items in the embedding vocabulary");
  }
  return {customer_id, PoolKind::customer, acc.mean(), acc.count};
}

std::vector<PooledEmbedding> pool_all(const Corpus& corpus, const EmbeddingTable& rho,
                                      PoolKind kind, std::optional<SampleSpec> sample,
                                      PoolStats* stats) {
  std::vector<PooledEmbedding> pooled;

  if (kind == PoolKind::trip) {
    for (const Trip& trip : corpus.trips) {
      if (trip.items.size() < corpus.min_basket) continue;
      try {
        pooled.push_back(trip_embedding(trip, rho, stats));
      } catch (const std::runtime_error&) {
        if (stats != nullptr) ++stats->skipped_owners;
      }
    }
  } else {
    std::map<std::uint64_t, std::vector<const Trip*>> by_customer;
    for (const Trip& trip : corpus.trips) {
      if (trip.items.size() < corpus.min_basket) continue;
      by_customer[trip.customer_id].push_back(&trip);
    }
    for (const auto& [customer_id, trips] : by_customer) {
      try {
        pooled.push_back(customer_embedding(customer_id, trips, rho, stats));
      } catch (const std::runtime_error&) {
        if (stats != nullptr) ++stats->skipped_owners;
      }
    }
  }

  if (sample.has_value() && sample->size < pooled.size()) {
    std::vector<std::uint32_t> order(pooled.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(sample->seed, "pool-sample"));
    fisher_yates_shuffle(order, rng);
    order.resize(sample->size);
    std::sort(order.begin(), order.end());  // keep corpus order in the output
    std::vector<PooledEmbedding> picked;
    picked.reserve(order.size());
    for (std::uint32_t i : order) picked.push_back(std::move(pooled[i]));
    pooled = std::move(picked);
  } else if (sample.has_value() && stats != nullptr && sample->size > pooled.size()) {
    stats->sample_clamped = true;  // take all, note it
  }
  return pooled;
}

EmbeddingTable pooled_to_table(const std::vector<PooledEmbedding>& pooled) {
  EmbeddingTable table;
  if (pooled.empty()) return table;
  table.dim = static_cast<std::uint32_t>(pooled.front().vector.size());
  for (const PooledEmbedding& p : pooled) {
    const auto row = table.add(p.owner_id);
    std::copy(p.vector.begin(), p.vector.end(), table.row_mut(row).begin());
  }
  return table;
}

}  // namespace basket
