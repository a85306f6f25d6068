#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <span>
#include <vector>

#include "basket/corpus.hpp"
#include "basket/efemb.hpp"
#include "basket/efemb_math.hpp"
#include "basket/rng.hpp"

using namespace basket;

namespace {

// Loop-and-log reference implementation, independent of the simd kernels.
double naive_objective(const std::vector<double>& rho_i, const std::vector<double>& ctx,
                       const std::vector<std::vector<double>>& negs, double lambda) {
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  auto logistic = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  double obj = std::log(logistic(dot(rho_i, ctx)));
  double reg = dot(rho_i, rho_i);
  for (const auto& n : negs) {
    obj += std::log(1.0 - logistic(dot(n, ctx)));
    reg += dot(n, n);
  }
  return obj - lambda * reg;
}

struct Instance {
  std::size_t d = 0;
  double lambda = 0.0;
  double w = 0.0;  // pooling weight
  std::vector<double> rho;
  std::vector<std::vector<double>> negs;
  std::vector<std::vector<double>> alphas;  // context sources

  std::vector<double> context() const {
    std::vector<double> ctx(d, 0.0);
    for (const auto& a : alphas) {
      for (std::size_t i = 0; i < d; ++i) ctx[i] += a[i];
    }
    for (double& v : ctx) v *= w;
    return ctx;
  }

  double objective() const {
    std::vector<std::span<const double>> views;
    for (const auto& n : negs) views.emplace_back(n.data(), d);
    const std::vector<double> ctx = context();
    return pair_objective<double>({rho.data(), d}, {ctx.data(), d}, views, lambda);
  }

  double gradients(PairGradients<double>& out) const {
    std::vector<std::span<const double>> views;
    for (const auto& n : negs) views.emplace_back(n.data(), d);
    const std::vector<double> ctx = context();
    return pair_gradients<double>({rho.data(), d}, {ctx.data(), d}, views, lambda, w, out);
  }
};

Instance random_instance(Rng& rng) {
  Instance inst;
  inst.d = 3 + uniform_u64(rng, 6);           // 3..8
  const std::size_t k = 1 + uniform_u64(rng, 4);   // 1..4 negatives
  const std::size_t m = 2 + uniform_u64(rng, 3);   // 2..4 context items
  const double lambdas[] = {0.0, 1e-3, 0.1};
  inst.lambda = lambdas[uniform_u64(rng, 3)];
  inst.w = uniform_u64(rng, 2) == 0 ? 1.0 / double(m) : 1.0;  // mean or sum
  auto rand_vec = [&] {
    std::vector<double> v(inst.d);
    for (double& x : v) x = uniform_real(rng, -1.0, 1.0);
    return v;
  };
  inst.rho = rand_vec();
  for (std::size_t i = 0; i < k; ++i) inst.negs.push_back(rand_vec());
  for (std::size_t i = 0; i < m; ++i) inst.alphas.push_back(rand_vec());
  return inst;
}

double rel_err(double analytic, double numeric) {
  return std::fabs(analytic - numeric) /
         std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
}

Corpus planted_corpus(std::uint32_t cats, std::uint32_t per_cat, std::uint64_t trips,
                      std::uint64_t seed, SynthResult* out = nullptr) {
  SynthSpec spec;
  spec.n_categories = cats;
  spec.products_per_category = per_cat;
  spec.n_trips = trips;
  spec.n_customers = std::max<std::uint32_t>(10, static_cast<std::uint32_t>(trips / 50));
  spec.basket_max = std::min<std::uint32_t>(12, cats * per_cat);
  spec.basket_min = std::min<std::uint32_t>(5, spec.basket_max);
  spec.in_category_prob = 0.95;
  spec.seed = seed;
  SynthResult r = generate_synthetic(spec);
  if (out != nullptr) *out = r;
  return std::move(r.corpus);
}

}  // namespace

TEST_CASE("stable_sigmoid and log_sigmoid stay finite at extremes") {
  CHECK(stable_sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(stable_sigmoid(700.0) < 1.0);
  CHECK(stable_sigmoid(-700.0) > 0.0);
  CHECK(std::isfinite(std::log(stable_sigmoid(-700.0))));
  CHECK(log_sigmoid(-700.0) == doctest::Approx(-700.0).epsilon(1e-12));
  CHECK(log_sigmoid(0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(std::isfinite(log_sigmoid(700.0)));
  // Complementarity: log(1 - sigma(x)) == log_sigmoid(-x).
  for (double x : {-3.0, -0.5, 0.0, 1.0, 4.0}) {
    CHECK(log_sigmoid(-x) ==
          doctest::Approx(std::log(1.0 - 1.0 / (1.0 + std::exp(-x)))).epsilon(1e-12));
  }
}

TEST_CASE("pair_objective at the origin is (K+1) log 1/2") {
  const std::vector<double> zero(4, 0.0);
  std::vector<std::span<const double>> negs{{zero.data(), 4}};
  const double obj = pair_objective<double>({zero.data(), 4}, {zero.data(), 4}, negs, 0.5);
  CHECK(obj == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("pair_objective matches a naive double oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance inst = random_instance(rng);
    const std::vector<double> ctx = inst.context();
    std::vector<std::span<const double>> views;
    for (const auto& n : inst.negs) views.emplace_back(n.data(), inst.d);
    const double fast =
        pair_objective<double>({inst.rho.data(), inst.d}, {ctx.data(), inst.d}, views,
                               inst.lambda);
    const double slow = naive_objective(inst.rho, ctx, inst.negs, inst.lambda);
    CHECK(std::fabs(fast - slow) <= 1e-12 * std::max(1.0, std::fabs(slow)));
  }
}

TEST_CASE("pair_gradients returns the same value as pair_objective") {
  Rng rng(77);
  PairGradients<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const Instance inst = random_instance(rng);
    CHECK(inst.gradients(g) == doctest::Approx(inst.objective()).epsilon(1e-12));
  }
}

TEST_CASE("finite differences confirm all three gradient blocks") {
  Rng rng(2024);
  const double h = 1e-5;
  PairGradients<double> g;
  int checked_rho = 0, checked_neg = 0, checked_alpha = 0;
  for (int trial = 0; trial < 120; ++trial) {
    Instance inst = random_instance(rng);
    inst.gradients(g);

    // rho_i coordinate
    {
      const std::size_t i = uniform_u64(rng, inst.d);
      const double keep = inst.rho[i];
      inst.rho[i] = keep + h;
      const double hi = inst.objective();
      inst.rho[i] = keep - h;
      const double lo = inst.objective();
      inst.rho[i] = keep;
      CHECK(rel_err(g.rho_target[i], (hi - lo) / (2 * h)) < 1e-4);
      ++checked_rho;
    }
    // negative coordinate
    {
      const std::size_t k = uniform_u64(rng, inst.negs.size());
      const std::size_t i = uniform_u64(rng, inst.d);
      const double keep = inst.negs[k][i];
      inst.negs[k][i] = keep + h;
      const double hi = inst.objective();
      inst.negs[k][i] = keep - h;
      const double lo = inst.objective();
      inst.negs[k][i] = keep;
      CHECK(rel_err(g.negatives[k * inst.d + i], (hi - lo) / (2 * h)) < 1e-4);
      ++checked_neg;
    }
    // alpha coordinate, via the pooled-context composition
    {
      const std::size_t j = uniform_u64(rng, inst.alphas.size());
      const std::size_t i = uniform_u64(rng, inst.d);
      const double keep = inst.alphas[j][i];
      inst.alphas[j][i] = keep + h;
      const double hi = inst.objective();
      inst.alphas[j][i] = keep - h;
      const double lo = inst.objective();
      inst.alphas[j][i] = keep;
      CHECK(rel_err(g.alpha_context[i], (hi - lo) / (2 * h)) < 1e-4);
      ++checked_alpha;
    }
  }
  CHECK(checked_rho >= 100);
  CHECK(checked_neg >= 100);
  CHECK(checked_alpha >= 100);
}

TEST_CASE("small-step ascent on the analytic gradients is monotone") {
  Rng rng(55);
  Instance inst = random_instance(rng);
  PairGradients<double> g;
  const double lr = 0.01;
  double prev = inst.objective();
  for (int step = 0; step < 200; ++step) {
    inst.gradients(g);
    for (std::size_t i = 0; i < inst.d; ++i) inst.rho[i] += lr * g.rho_target[i];
    for (std::size_t k = 0; k < inst.negs.size(); ++k) {
      for (std::size_t i = 0; i < inst.d; ++i) {
        inst.negs[k][i] += lr * g.negatives[k * inst.d + i];
      }
    }
    for (auto& alpha : inst.alphas) {
      for (std::size_t i = 0; i < inst.d; ++i) alpha[i] += lr * g.alpha_context[i];
    }
    const double now = inst.objective();
    CHECK(now >= prev - 1e-9 * std::max(1.0, std::fabs(prev)));
    prev = now;
  }
  CHECK(prev < 0.0);  // log-probabilities stay negative
}

TEST_CASE("context_vector pools the other items' alphas") {
  EmbeddingTable alpha;
  alpha.dim = 2;
  auto set = [&](std::uint64_t id, float x, float y) {
    const std::uint32_t r = alpha.add(id);
    alpha.row_mut(r)[0] = x;
    alpha.row_mut(r)[1] = y;
  };
  set(1, 9.f, 9.f);
  set(2, 1.f, 0.f);
  set(3, 0.f, 1.f);

  Trip pairt{1, 1, {1, 2}};
  const auto ctx2 = context_vector(pairt, 1, alpha, Pooling::mean);
  CHECK(ctx2 == std::vector<float>{1.f, 0.f});

  Trip triple{2, 1, {1, 2, 3}};
  const auto mean = context_vector(triple, 1, alpha, Pooling::mean);
  CHECK(mean[0] == doctest::Approx(0.5f));
  CHECK(mean[1] == doctest::Approx(0.5f));
  const auto sum = context_vector(triple, 1, alpha, Pooling::sum);
  CHECK(sum[0] == doctest::Approx(1.0f));
  CHECK(sum[1] == doctest::Approx(1.0f));

  Trip with_oov{3, 1, {1, 2, 7}};  // 7 has no alpha row: skipped
  const auto skipped = context_vector(with_oov, 1, alpha, Pooling::sum);
  CHECK(skipped == std::vector<float>{1.f, 0.f});

  CHECK_THROWS_AS(context_vector(pairt, 5, alpha, Pooling::mean), std::invalid_argument);
  Trip lonely{4, 1, {1, 7}};  // only OOV context
  CHECK_THROWS_AS(context_vector(lonely, 1, alpha, Pooling::mean), std::runtime_error);
}

TEST_CASE("pooling_from_string maps names and rejects junk") {
  CHECK(pooling_from_string("mean") == Pooling::mean);
  CHECK(pooling_from_string("sum") == Pooling::sum);
  CHECK_THROWS_AS(pooling_from_string("max"), std::invalid_argument);
}

TEST_CASE("train with epochs=0 returns the initialization") {
  const Corpus corpus = planted_corpus(2, 10, 200, 7);
  TrainConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 0;
  cfg.n_negative = 2;
  cfg.min_count = 1;
  const auto [pair, report] = train(corpus, cfg);
  CHECK(report.epochs.empty());
  CHECK(pair.rho.size() == 20);
  CHECK(pair.alpha.size() == 20);
  CHECK(report.vocab_size == 20);
  const float bound = cfg.effective_init_scale();
  for (float v : pair.rho.data) CHECK(std::fabs(v) <= bound);
  CHECK(report.rho_norm > 0.0);
}

TEST_CASE("training is deterministic for a seed and diverges across seeds") {
  const Corpus corpus = planted_corpus(2, 10, 300, 21);
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 2;
  cfg.n_negative = 3;
  cfg.min_count = 1;
  cfg.seed = 5;
  const auto [a, ra] = train(corpus, cfg);
  const auto [b, rb] = train(corpus, cfg);
  CHECK(a.rho.data == b.rho.data);
  CHECK(a.alpha.data == b.alpha.data);
  REQUIRE(ra.epochs.size() == rb.epochs.size());
  for (std::size_t e = 0; e < ra.epochs.size(); ++e) {
    CHECK(ra.epochs[e].mean_objective == rb.epochs[e].mean_objective);
  }

  cfg.seed = 6;
  const auto [c, rc] = train(corpus, cfg);
  CHECK(a.rho.data != c.rho.data);
}

TEST_CASE("min_count prunes rare items out of the vocabulary") {
  Corpus corpus;
  for (std::uint64_t i = 1; i <= 9; ++i) {
    corpus.catalog.emplace(i, Product{i, "p" + std::to_string(i), "D"});
  }
  corpus.trips = {
      Trip{1, 1, {1, 2, 3}}, Trip{2, 1, {1, 2, 4}}, Trip{3, 1, {3, 4, 5}},
      Trip{4, 1, {1, 2, 5}}, Trip{5, 1, {3, 4, 5, 9}},
  };
  TrainConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 1;
  cfg.n_negative = 1;
  cfg.min_count = 2;
  const auto [pair, report] = train(corpus, cfg);
  CHECK(report.pruned_items == 1);
  CHECK(report.vocab_size == 5);
  CHECK(pair.rho.find(9) == nullptr);
  CHECK(pair.rho.find(5) != nullptr);
  // Trip 5 shrinks to {3,4,5}; each of the 5 trips contributes 3 pairs.
  CHECK(report.pairs_per_epoch == 15);
}

TEST_CASE("train rejects impossible configurations") {
  Corpus empty;
  TrainConfig cfg;
  cfg.min_count = 1;
  CHECK_THROWS_WITH_AS(train(empty, cfg), doctest::Contains("no trips"), std::runtime_error);

  Corpus tiny = planted_corpus(2, 3, 50, 3);
  TrainConfig big_k;
  big_k.min_count = 1;
  big_k.n_negative = 10;  // vocab 6 < 10 + basket
  CHECK_THROWS_WITH_AS(train(tiny, big_k), doctest::Contains("smaller"), std::runtime_error);

  TrainConfig prune_all;
  prune_all.min_count = 100000;
  CHECK_THROWS_WITH_AS(train(tiny, prune_all), doctest::Contains("fewer than 2"),
                       std::runtime_error);

  TrainConfig bad;
  bad.dim = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = TrainConfig{};
  bad.learning_rate = 0.0f;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = TrainConfig{};
  bad.n_negative = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("objective improves over epochs and recovers planted categories") {
  SynthResult truth;
  const Corpus corpus = planted_corpus(4, 10, 3000, 13, &truth);
  TrainConfig cfg;
  cfg.dim = 10;
  cfg.epochs = 8;
  cfg.n_negative = 5;
  cfg.min_count = 1;
  const auto [pair, report] = train(corpus, cfg);
  REQUIRE(report.epochs.size() == 8);
  CHECK(report.epochs.back().mean_objective > report.epochs.front().mean_objective);

  // Nearest neighbor by cosine should stay inside the planted category.
  const EmbeddingTable& rho = pair.rho;
  auto cosine = [&](std::uint32_t a, std::uint32_t b) {
    const auto x = rho.row(a);
    const auto y = rho.row(b);
    double num = 0.0, nx = 0.0, ny = 0.0;
    for (std::uint32_t i = 0; i < rho.dim; ++i) {
      num += double(x[i]) * y[i];
      nx += double(x[i]) * x[i];
      ny += double(y[i]) * y[i];
    }
    return num / std::sqrt(nx * ny);
  };
  std::uint32_t hits = 0;
  for (std::uint32_t a = 0; a < rho.size(); ++a) {
    double best = -2.0;
    std::uint32_t arg = 0;
    for (std::uint32_t b = 0; b < rho.size(); ++b) {
      if (b == a) continue;
      const double c = cosine(a, b);
      if (c > best) {
        best = c;
        arg = b;
      }
    }
    hits += truth.category_of.at(rho.ids[a]) == truth.category_of.at(rho.ids[arg]) ? 1 : 0;
  }
  CHECK(double(hits) / double(rho.size()) >= 0.7);
}
