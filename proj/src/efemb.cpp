#include "basket/efemb.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "basket/efemb_math.hpp"
#include "basket/rng.hpp"
#include "basket/simd/kernels.hpp"

namespace basket {

namespace {

constexpr float kAdagradEps = 1e-10f;

double frobenius_norm(const std::vector<float>& data) {
  double acc = 0.0;
  for (float v : data) acc += double(v) * v;
  return std::sqrt(acc);
}

// Cumulative unigram^0.75 distribution over vocabulary rows.
struct NegativeSampler {
  std::vector<double> cumulative;

  explicit NegativeSampler(const std::vector<std::uint64_t>& counts) {
    cumulative.reserve(counts.size());
    double total = 0.0;
    for (std::uint64_t c : counts) {
      total += std::pow(double(c), 0.75);
      cumulative.push_back(total);
    }
  }

  // Draws a row outside `exclude_rows` (sorted). Caller guarantees the
  // vocabulary is large enough for this to terminate quickly.
  std::uint32_t sample(Rng& rng, const std::vector<std::uint32_t>& exclude_rows) const {
    for (;;) {
      const double u = uniform_real01(rng) * cumulative.back();
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      const auto row = static_cast<std::uint32_t>(
          std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1));
      if (!std::binary_search(exclude_rows.begin(), exclude_rows.end(), row)) {
        return row;
      }
    }
  }
};

struct PairRef {
  std::uint32_t trip = 0;
  std::uint32_t pos = 0;
};

// Per-thread scratch for one sgd step.
struct StepScratch {
  std::vector<float> ctx;
  std::vector<std::uint32_t> neg_rows;
  std::vector<std::span<const float>> neg_views;
  PairGradients<float> grads;
};

class Trainer {
 public:
  Trainer(const Corpus& corpus, const TrainConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    if (corpus.trips.empty()) throw std::runtime_error("train: corpus has no trips");

    std::unordered_map<std::uint64_t, std::uint64_t> freq;
    for (const Trip& trip : corpus.trips) {
      for (std::uint64_t id : trip.items) ++freq[id];
    }
    std::vector<std::uint64_t> vocab;
    for (const auto& [id, count] : freq) {
      if (count >= cfg.min_count) vocab.push_back(id);
    }
    std::sort(vocab.begin(), vocab.end());
    pruned_ = freq.size() - vocab.size();
    if (vocab.size() < 2) {
      throw std::runtime_error("train: vocabulary has fewer than 2 items after min_count=" +
                               std::to_string(cfg.min_count) + " pruning");
    }

    pair_.rho.dim = pair_.alpha.dim = cfg.dim;
    for (std::uint64_t id : vocab) {
      pair_.rho.add(id);
      pair_.alpha.add(id);
    }

    counts_.assign(vocab.size(), 0);
    std::size_t max_basket = 0;
    for (std::uint32_t t = 0; t < corpus.trips.size(); ++t) {
      const Trip& trip = corpus.trips[t];
      std::vector<std::uint32_t> rows;
      rows.reserve(trip.items.size());
      for (std::uint64_t id : trip.items) {
        if (const auto it = pair_.rho.index.find(id); it != pair_.rho.index.end()) {
          rows.push_back(it->second);
        }
      }
      if (rows.size() < 2) continue;  // nothing to predict from
      std::sort(rows.begin(), rows.end());
      for (std::uint32_t row : rows) ++counts_[row];
      max_basket = std::max(max_basket, rows.size());
      for (std::uint32_t p = 0; p < rows.size(); ++p) {
        pairs_.push_back({static_cast<std::uint32_t>(trip_rows_.size()), p});
      }
      trip_rows_.push_back(std::move(rows));
    }
    if (pairs_.empty()) {
      throw std::runtime_error("train: no usable (item, context) pairs after filtering");
    }
    if (vocab.size() < cfg.n_negative + max_basket) {
      throw std::runtime_error("train: vocabulary (" + std::to_string(vocab.size()) +
                               ") smaller than n_negative + max basket (" +
                               std::to_string(cfg.n_negative + max_basket) + ")");
    }
  }

  std::pair<EmbeddingPair, TrainReport> run() {
    const auto t0 = std::chrono::steady_clock::now();
    initialize();
    NegativeSampler sampler(counts_);
    TrainReport report;
    report.vocab_size = pair_.rho.size();
    report.pruned_items = pruned_;
    report.pairs_per_epoch = pairs_.size();

    for (std::uint32_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
      Rng shuffle_rng(derive_seed(cfg_.seed, "efemb-epoch", epoch));
      fisher_yates_shuffle(pairs_, shuffle_rng);

      double total = 0.0;
      if (cfg_.threads <= 1) {
        total = run_chunk(sampler, 0, pairs_.size(),
                          derive_seed(cfg_.seed, "efemb-negatives", epoch));
      } else {
        std::vector<std::thread> workers;
        std::vector<double> partials(cfg_.threads, 0.0);
        const std::size_t chunk = (pairs_.size() + cfg_.threads - 1) / cfg_.threads;
        for (std::uint32_t t = 0; t < cfg_.threads; ++t) {
          const std::size_t begin = std::min(pairs_.size(), t * chunk);
          const std::size_t end = std::min(pairs_.size(), begin + chunk);
          workers.emplace_back([&, t, begin, end] {
            partials[t] = run_chunk(
                sampler, begin, end,
                derive_seed(cfg_.seed, "efemb-negatives", std::uint64_t(epoch) << 16 | t));
          });
        }
        for (auto& w : workers) w.join();
        for (double p : partials) total += p;
      }

      const double mean = total / double(pairs_.size());
      if (!std::isfinite(mean)) {
        throw std::runtime_error("train: non-finite objective in epoch " +
                                 std::to_string(epoch) + "; aborting");
      }
      report.epochs.push_back({epoch, mean});
    }

    report.rho_norm = frobenius_norm(pair_.rho.data);
    report.alpha_norm = frobenius_norm(pair_.alpha.data);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(pair_), std::move(report)};
  }

 private:
  void initialize() {
    Rng rng(derive_seed(cfg_.seed, "efemb-init"));
    const float scale = cfg_.effective_init_scale();
    for (float& v : pair_.rho.data) v = float(uniform_real(rng, -scale, scale));
    for (float& v : pair_.alpha.data) v = float(uniform_real(rng, -scale, scale));
    rho_gsq_.assign(pair_.rho.data.size(), 0.0f);
    alpha_gsq_.assign(pair_.alpha.data.size(), 0.0f);
  }

  double run_chunk(const NegativeSampler& sampler, std::size_t begin, std::size_t end,
                   std::uint64_t seed) {
    Rng rng(seed);
    StepScratch scratch;
    scratch.ctx.resize(cfg_.dim);
    scratch.neg_rows.resize(cfg_.n_negative);
    scratch.neg_views.resize(cfg_.n_negative);
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      total += sgd_step(pairs_[i], sampler, rng, scratch);
    }
    return total;
  }

  float* rho_row(std::uint32_t r) { return pair_.rho.data.data() + std::size_t(r) * cfg_.dim; }
  float* alpha_row(std::uint32_t r) { return pair_.alpha.data.data() + std::size_t(r) * cfg_.dim; }

  double sgd_step(PairRef ref, const NegativeSampler& sampler, Rng& rng, StepScratch& s) {
    const std::vector<std::uint32_t>& rows = trip_rows_[ref.trip];
    const std::uint32_t target = rows[ref.pos];
    const std::uint32_t d = cfg_.dim;
    const auto n_context = static_cast<std::uint32_t>(rows.size() - 1);

    std::fill(s.ctx.begin(), s.ctx.end(), 0.0f);
    for (std::uint32_t j = 0; j < rows.size(); ++j) {
      if (j == ref.pos) continue;
      simd::axpy(1.0f, alpha_row(rows[j]), s.ctx.data(), d);
    }
    const float w = cfg_.context_pooling == Pooling::mean ? 1.0f / float(n_context) : 1.0f;
    if (cfg_.context_pooling == Pooling::mean) {
      for (float& v : s.ctx) v *= w;
    }

    for (std::uint32_t k = 0; k < cfg_.n_negative; ++k) {
      const std::uint32_t row = sampler.sample(rng, rows);
      s.neg_rows[k] = row;
      s.neg_views[k] = {rho_row(row), d};
    }

    const std::span<const float> target_view{rho_row(target), d};
    const float obj =
        pair_gradients<float>(target_view, {s.ctx.data(), d}, s.neg_views,
                              cfg_.l2_lambda, w, s.grads);
    if (!std::isfinite(obj)) {
      throw std::runtime_error("train: non-finite gradient at trip " +
                               std::to_string(ref.trip));
    }

    simd::adagrad_update(rho_row(target), rho_gsq_.data() + std::size_t(target) * d,
                         s.grads.rho_target.data(), cfg_.learning_rate, kAdagradEps, d);
    for (std::uint32_t j = 0; j < rows.size(); ++j) {
      if (j == ref.pos) continue;
      simd::adagrad_update(alpha_row(rows[j]), alpha_gsq_.data() + std::size_t(rows[j]) * d,
                           s.grads.alpha_context.data(), cfg_.learning_rate, kAdagradEps, d);
    }
    for (std::uint32_t k = 0; k < cfg_.n_negative; ++k) {
      simd::adagrad_update(rho_row(s.neg_rows[k]),
                           rho_gsq_.data() + std::size_t(s.neg_rows[k]) * d,
                           s.grads.negatives.data() + std::size_t(k) * d,
                           cfg_.learning_rate, kAdagradEps, d);
    }
    return obj;
  }

  TrainConfig cfg_;
  EmbeddingPair pair_;
  std::vector<float> rho_gsq_, alpha_gsq_;       // Adagrad accumulators
  std::vector<std::vector<std::uint32_t>> trip_rows_;
  std::vector<PairRef> pairs_;
  std::vector<std::uint64_t> counts_;            // per-row trip occurrences
  std::uint64_t pruned_ = 0;
};

}  // namespace

Pooling pooling_from_string(const std::string& s) {
  if (s == "mean") return Pooling::mean;
  if (s == "sum") return Pooling::sum;
  throw std::invalid_argument("pooling must be 'mean' or 'sum', got '" + s + "'");
}

void TrainConfig::validate() const {
  if (dim < 2) throw std::invalid_argument("dim must be >= 2");
  if (n_negative < 1) throw std::invalid_argument("n_negative must be >= 1");
  if (!(learning_rate > 0.0f)) throw std::invalid_argument("learning_rate must be > 0");
  if (l2_lambda < 0.0f) throw std::invalid_argument("l2_lambda must be >= 0");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

float TrainConfig::effective_init_scale() const {
  return init_scale > 0.0f ? init_scale : 0.1f / std::sqrt(float(dim));
}

std::vector<float> context_vector(const Trip& trip, std::uint64_t target,
                                  const EmbeddingTable& alpha, Pooling pooling) {
  if (!trip.contains(target)) {
    throw std::invalid_argument("context_vector: target " + std::to_string(target) +
                                " not in trip " + std::to_string(trip.trip_id));
  }
  std::vector<float> ctx(alpha.dim, 0.0f);
  std::uint32_t n_context = 0;
  for (std::uint64_t id : trip.items) {
    if (id == target) continue;
    if (const float* row = alpha.find(id); row != nullptr) {
      simd::axpy(1.0f, row, ctx.data(), alpha.dim);
      ++n_context;
    }
  }
  if (n_context == 0) {
    throw std::runtime_error("context_vector: trip " + std::to_string(trip.trip_id) +
                             " has no context items for target " + std::to_string(target));
  }
  if (pooling == Pooling::mean) {
    const float w = 1.0f / float(n_context);
    for (float& v : ctx) v *= w;
  }
  return ctx;
}

std::pair<EmbeddingPair, TrainReport> train(const Corpus& corpus, const TrainConfig& config) {
  Trainer trainer(corpus, config);
  return trainer.run();
}

}  // namespace basket
