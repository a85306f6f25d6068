#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "basket/rng.hpp"
#include "basket/simd/kernels.hpp"

using namespace basket;

namespace {

std::vector<float> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = float(uniform_real(rng, lo, hi));
  return v;
}

std::vector<double> to_double(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

const std::vector<std::size_t> kSizes = {0, 1, 2, 3, 4, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 257};

}  // namespace

TEST_CASE("active level reports a valid kernel set") {
  const simd::Level level = simd::active_level();
  CHECK(simd::level_name(level) != nullptr);
  CHECK(std::string(simd::level_name(level)).size() > 0);
}

TEST_CASE("dispatched float kernels match the scalar reference") {
  Rng rng(derive_seed(7, "kernels-float"));
  for (std::size_t n : kSizes) {
    CAPTURE(n);
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);

    // Accumulation order differs between variants; bound both against the
    // double-precision value instead of each other.
    const double exact_dot = simd::scalar::dot(to_double(a).data(), to_double(b).data(), n);
    double mag = 1.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::fabs(double(a[i]) * double(b[i]));
    CHECK(std::fabs(double(simd::dot(a.data(), b.data(), n)) - exact_dot) <= 1e-5 * mag);
    CHECK(std::fabs(double(simd::scalar::dot(a.data(), b.data(), n)) - exact_dot) <= 1e-5 * mag);

    const double exact_sq = simd::scalar::sqdist(to_double(a).data(), to_double(b).data(), n);
    CHECK(std::fabs(double(simd::sqdist(a.data(), b.data(), n)) - exact_sq) <= 1e-5 * (mag + 4 * n + 1));

    auto y1 = random_vec(rng, n);
    auto y2 = y1;
    simd::axpy(0.37f, a.data(), y1.data(), n);
    simd::scalar::axpy(0.37f, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("dispatched double kernels match the scalar reference") {
  Rng rng(derive_seed(7, "kernels-double"));
  for (std::size_t n : kSizes) {
    CAPTURE(n);
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = uniform_real(rng, -2.0, 2.0);
    for (auto& x : b) x = uniform_real(rng, -2.0, 2.0);

    const double s_dot = simd::scalar::dot(a.data(), b.data(), n);
    CHECK(simd::dot(a.data(), b.data(), n) == doctest::Approx(s_dot).epsilon(1e-12));
    const double s_sq = simd::scalar::sqdist(a.data(), b.data(), n);
    CHECK(simd::sqdist(a.data(), b.data(), n) == doctest::Approx(s_sq).epsilon(1e-12));

    std::vector<double> y1(n, 0.5), y2(n, 0.5);
    simd::axpy(-1.25, a.data(), y1.data(), n);
    simd::scalar::axpy(-1.25, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));
  }
}

TEST_CASE("adagrad update matches the scalar reference") {
  Rng rng(derive_seed(7, "kernels-adagrad"));
  for (std::size_t n : kSizes) {
    CAPTURE(n);
    auto w1 = random_vec(rng, n);
    auto g = random_vec(rng, n);
    auto gsq1 = random_vec(rng, n, 0.0, 2.0);
    auto w2 = w1;
    auto gsq2 = gsq1;

    simd::adagrad_update(w1.data(), gsq1.data(), g.data(), 0.05f, 1e-10f, n);
    simd::scalar::adagrad_update(w2.data(), gsq2.data(), g.data(), 0.05f, 1e-10f, n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(w1[i] == doctest::Approx(w2[i]).epsilon(1e-5));
      CHECK(gsq1[i] == doctest::Approx(gsq2[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("forcing the scalar level routes through the reference kernels") {
  const simd::Level before = simd::active_level();
  simd::force_level(simd::Level::scalar);
  CHECK(simd::active_level() == simd::Level::scalar);

  Rng rng(derive_seed(7, "kernels-forced"));
  const auto a = random_vec(rng, 100);
  const auto b = random_vec(rng, 100);
  // Bitwise identical: dispatch now runs the exact same code.
  CHECK(simd::dot(a.data(), b.data(), 100) == simd::scalar::dot(a.data(), b.data(), 100));
  CHECK(simd::sqdist(a.data(), b.data(), 100) == simd::scalar::sqdist(a.data(), b.data(), 100));

  simd::force_level(before);
  CHECK(simd::active_level() == before);
}

TEST_CASE("forcing an unsupported level falls back to scalar") {
#if defined(__x86_64__)
  const simd::Level unsupported = simd::Level::neon;
#else
  const simd::Level unsupported = simd::Level::avx2;
#endif
  const simd::Level before = simd::active_level();
  simd::force_level(unsupported);
  CHECK(simd::active_level() == simd::Level::scalar);
  simd::force_level(before);
}
