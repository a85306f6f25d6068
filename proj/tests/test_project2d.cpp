#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "basket/project2d.hpp"
#include "basket/rng.hpp"
#include "test_util.hpp"

using namespace basket;

namespace {

double entropy_nats(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

std::vector<double> random_layout(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> y(n * 2);
  for (double& v : y) v = gaussian(rng) * scale;
  return y;
}

EmbeddingTable gaussian_table(std::uint32_t n, std::uint32_t dim, std::uint64_t seed,
                              float offset = 0.f, std::uint32_t first_id = 1) {
  Rng rng(seed);
  EmbeddingTable t;
  t.dim = dim;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t r = t.add(first_id + i);
    for (float& v : t.row_mut(r)) v = offset + float(gaussian(rng));
  }
  return t;
}

}  // namespace

TEST_CASE("calibration on equidistant neighbors gives the uniform distribution") {
  const std::vector<double> sq(9, 4.0);  // nine neighbors, all at distance 2
  const CalibrationResult res = perplexity_calibration(sq, 9.0);
  CHECK(res.converged);
  for (double v : res.p) CHECK(v == doctest::Approx(1.0 / 9.0).epsilon(1e-6));
  CHECK(entropy_nats(res.p) == doctest::Approx(std::log(9.0)).epsilon(1e-6));
  // Equidistant neighbors cap the entropy at log(n): a lower target cannot
  // converge and must come back flagged, still a valid distribution.
  const CalibrationResult wide = perplexity_calibration(sq, 5.0);
  CHECK_FALSE(wide.converged);
  double total = 0.0;
  for (double v : wide.p) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("calibration hits a fractional perplexity target") {
  const std::vector<double> sq{1.0, 2.0};
  const CalibrationResult res = perplexity_calibration(sq, 1.5);
  CHECK(res.converged);
  CHECK(res.p.size() == 2);
  CHECK(res.p[0] + res.p[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.p[0] > res.p[1]);  // closer neighbor gets more mass
  CHECK(entropy_nats(res.p) == doctest::Approx(std::log(1.5)).epsilon(1e-4));
  // The returned p is consistent with the returned beta.
  const double w0 = std::exp(-res.beta * 1.0), w1 = std::exp(-res.beta * 2.0);
  CHECK(res.p[0] == doctest::Approx(w0 / (w0 + w1)).epsilon(1e-9));
}

TEST_CASE("joint probabilities are a symmetric distribution with zero diagonal") {
  Rng rng(5);
  const std::size_t n = 20, dim = 6;
  std::vector<double> x(n * dim);
  for (double& v : x) v = gaussian(rng);
  const std::vector<double> p = joint_probabilities(x, n, dim, 5.0);
  REQUIRE(p.size() == n * n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(p[i * n + i] == 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(p[i * n + j] >= 0.0);
      CHECK(p[i * n + j] == doctest::Approx(p[j * n + i]).epsilon(1e-15));
      sum += p[i * n + j];
    }
  }
  CHECK(std::fabs(sum - 1.0) < 1e-9);
}

TEST_CASE("student_t_q is a distribution favoring close pairs") {
  const std::vector<double> y{0.0, 0.0, 1.0, 0.0, 10.0, 0.0};  // three points on a line
  const std::vector<double> q = student_t_q(y, 3);
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(q[i * 3 + i] == 0.0);
    for (std::size_t j = 0; j < 3; ++j) sum += q[i * 3 + j];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q[0 * 3 + 1] > q[0 * 3 + 2]);  // (0,1) much closer than (0,2)
  CHECK(q[0 * 3 + 1] == doctest::Approx(q[1 * 3 + 0]).epsilon(1e-15));
  // Unnormalized kernel ratio: (1+1)^-1 vs (1+100)^-1.
  CHECK(q[0 * 3 + 1] / q[0 * 3 + 2] == doctest::Approx(101.0 / 2.0).epsilon(1e-9));
}

TEST_CASE("kl_gradient matches finite differences") {
  Rng rng(99);
  const std::size_t n = 6;
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> x(n * 4);
    for (double& v : x) v = gaussian(rng);
    const std::vector<double> p = joint_probabilities(x, n, 4, 1.5);
    std::vector<double> y = random_layout(n, 1000 + trial);
    const std::vector<double> grad = kl_gradient(p, y, n);
    for (std::size_t c = 0; c < 2 * n; c += 3) {
      const double keep = y[c];
      y[c] = keep + h;
      const double hi = kl_divergence(p, y, n);
      y[c] = keep - h;
      const double lo = kl_divergence(p, y, n);
      y[c] = keep;
      const double fd = (hi - lo) / (2 * h);
      const double denom = std::max(1e-8, std::fabs(fd) + std::fabs(grad[c]));
      CHECK(std::fabs(grad[c] - fd) / denom < 1e-4);
      ++checked;
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("gradient descent on a random cloud lowers the KL divergence") {
  const EmbeddingTable table = gaussian_table(60, 10, 31);
  TsneConfig cfg;
  cfg.perplexity = 10.0;
  cfg.n_iter = 400;
  cfg.seed = 9;
  const Projection proj = tsne(table, cfg);
  REQUIRE(proj.ids.size() == 60);
  REQUIRE(proj.coords.size() == 120);
  REQUIRE(!proj.kl_trace.empty());
  CHECK(proj.kl_trace.back().first == 400);

  // After the exaggeration phase the trace should be close to monotone.
  std::vector<std::pair<std::uint32_t, double>> late;
  for (const auto& [iter, kl] : proj.kl_trace) {
    CHECK(std::isfinite(kl));
    CHECK(kl >= 0.0);
    if (iter > cfg.exaggeration_iters) late.emplace_back(iter, kl);
  }
  REQUIRE(late.size() >= 3);
  for (std::size_t i = 1; i < late.size(); ++i) {
    CHECK(late[i].second <= late[i - 1].second * 1.05);
  }
  CHECK(proj.kl_trace.back().second < proj.kl_trace.front().second);
}

TEST_CASE("two far clusters stay separated in the embedding") {
  EmbeddingTable table = gaussian_table(30, 8, 1, 0.f, 1);
  const EmbeddingTable other = gaussian_table(30, 8, 2, 50.f, 31);
  for (std::uint32_t r = 0; r < other.size(); ++r) {
    const std::uint32_t nr = table.add(other.ids[r]);
    std::copy(other.row(r).begin(), other.row(r).end(), table.row_mut(nr).begin());
  }
  TsneConfig cfg;
  cfg.perplexity = 8.0;
  cfg.n_iter = 500;
  const Projection proj = tsne(table, cfg);

  auto centroid = [&](std::size_t begin, std::size_t end) {
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      cx += proj.coords[2 * i];
      cy += proj.coords[2 * i + 1];
    }
    return std::pair<double, double>{cx / (end - begin), cy / (end - begin)};
  };
  const auto [ax, ay] = centroid(0, 30);
  const auto [bx, by] = centroid(30, 60);
  const double gap = std::hypot(ax - bx, ay - by);
  double spread = 0.0;
  for (std::size_t i = 0; i < 60; ++i) {
    const bool first = i < 30;
    const double dx = proj.coords[2 * i] - (first ? ax : bx);
    const double dy = proj.coords[2 * i + 1] - (first ? ay : by);
    spread += dx * dx + dy * dy;
  }
  spread = std::sqrt(spread / 60.0);
  CHECK(gap > 3.0 * spread);
}

TEST_CASE("tsne is deterministic and jitters duplicate rows") {
  EmbeddingTable table = gaussian_table(10, 4, 7);
  // Duplicate a row exactly: without jitter P would see a zero distance.
  const std::uint32_t r = table.add(999);
  std::copy(table.row(0).begin(), table.row(0).end(), table.row_mut(r).begin());

  TsneConfig cfg;
  cfg.perplexity = 3.0;
  cfg.n_iter = 60;
  const Projection a = tsne(table, cfg);
  const Projection b = tsne(table, cfg);
  CHECK(a.coords == b.coords);
  CHECK(a.ids == b.ids);
  for (double v : a.coords) CHECK(std::isfinite(v));

  TsneConfig other = cfg;
  other.seed = 43;
  const Projection c = tsne(table, other);
  CHECK(a.coords != c.coords);
}

TEST_CASE("tsne validates its inputs") {
  const EmbeddingTable tiny = gaussian_table(4, 3, 1);
  TsneConfig cfg;
  CHECK_THROWS_AS(tsne(tiny, cfg), std::invalid_argument);

  const EmbeddingTable ten = gaussian_table(10, 3, 1);
  TsneConfig high;
  high.perplexity = 3.0;  // needs perplexity < (10-1)/3
  CHECK_THROWS_AS(tsne(ten, high), std::invalid_argument);
  high.perplexity = 2.9;
  high.n_iter = 5;
  CHECK_NOTHROW(tsne(ten, high));

  TsneConfig zero_iter;
  zero_iter.n_iter = 0;
  CHECK_THROWS_AS(zero_iter.validate(100), std::invalid_argument);
  TsneConfig bad_lr;
  bad_lr.learning_rate = 0.0;
  CHECK_THROWS_AS(bad_lr.validate(100), std::invalid_argument);
}

TEST_CASE("plot CSV round-trips coordinates through load_plot_csv") {
  Projection proj;
  proj.ids = {3, 1, 7};
  proj.coords = {0.125, -4.5, 1e-7, 2.25, -0.333333333, 9.0};
  std::unordered_map<std::uint64_t, std::string> labels{{3, "DEPT_0"}, {7, "needs,quote"}};

  const std::string csv = export_plot_data(proj, labels);
  CHECK(csv.rfind("id,x,y,label\n", 0) == 0);
  CHECK(csv.find("3,") != std::string::npos);
  CHECK(csv.find("\"needs,quote\"") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  testutil::TempDir dir("plot");
  save_plot_csv(proj, dir.path("plot.csv"), labels);
  const EmbeddingTable back = load_plot_csv(dir.path("plot.csv"));
  REQUIRE(back.size() == 3);
  CHECK(back.dim == 2);
  CHECK(back.ids == proj.ids);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.row(i)[0] == doctest::Approx(proj.coords[2 * i]).epsilon(1e-6));
    CHECK(back.row(i)[1] == doctest::Approx(proj.coords[2 * i + 1]).epsilon(1e-6));
  }

  testutil::write_file(dir.path("bad.csv"), "id,x,y\n1,notanumber,2\n");
  CHECK_THROWS_WITH_AS(load_plot_csv(dir.path("bad.csv")), doctest::Contains("line 2"),
                       std::runtime_error);
}
