#include "basket/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#if defined(__x86_64__) || defined(_M_X64)
namespace basket::simd::avx2 {
float dot(const float*, const float*, std::size_t);
double dot(const double*, const double*, std::size_t);
float sqdist(const float*, const float*, std::size_t);
double sqdist(const double*, const double*, std::size_t);
void axpy(float, const float*, float*, std::size_t);
void axpy(double, const double*, double*, std::size_t);
void adagrad_update(float*, float*, const float*, float, float, std::size_t);
}  // namespace basket::simd::avx2
#endif

#if defined(__aarch64__)
namespace basket::simd::neon {
float dot(const float*, const float*, std::size_t);
double dot(const double*, const double*, std::size_t);
float sqdist(const float*, const float*, std::size_t);
double sqdist(const double*, const double*, std::size_t);
void axpy(float, const float*, float*, std::size_t);
void axpy(double, const double*, double*, std::size_t);
void adagrad_update(float*, float*, const float*, float, float, std::size_t);
}  // namespace basket::simd::neon
#endif

namespace basket::simd {

namespace {

struct KernelTable {
  float (*dot_f32)(const float*, const float*, std::size_t);
  double (*dot_f64)(const double*, const double*, std::size_t);
  float (*sqdist_f32)(const float*, const float*, std::size_t);
  double (*sqdist_f64)(const double*, const double*, std::size_t);
  void (*axpy_f32)(float, const float*, float*, std::size_t);
  void (*axpy_f64)(double, const double*, double*, std::size_t);
  void (*adagrad_f32)(float*, float*, const float*, float, float, std::size_t);
};

constexpr KernelTable kScalarTable = {
    scalar::dot,  scalar::dot,  scalar::sqdist,         scalar::sqdist,
    scalar::axpy, scalar::axpy, scalar::adagrad_update,
};

#if defined(__x86_64__) || defined(_M_X64)
constexpr KernelTable kAvx2Table = {
    avx2::dot,  avx2::dot,  avx2::sqdist,         avx2::sqdist,
    avx2::axpy, avx2::axpy, avx2::adagrad_update,
};
#endif
#if defined(__aarch64__)
constexpr KernelTable kNeonTable = {
    neon::dot,  neon::dot,  neon::sqdist,         neon::sqdist,
    neon::axpy, neon::axpy, neon::adagrad_update,
};
#endif

Level best_supported_level() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return Level::avx2;
  }
  return Level::scalar;
#elif defined(__aarch64__)
  return Level::neon;
#else
  return Level::scalar;
#endif
}

const KernelTable* table_for(Level level) {
  switch (level) {
#if defined(__x86_64__) || defined(_M_X64)
    case Level::avx2:
      return &kAvx2Table;
#endif
#if defined(__aarch64__)
    case Level::neon:
      return &kNeonTable;
#endif
    default:
      return &kScalarTable;
  }
}

struct Dispatch {
  std::atomic<const KernelTable*> table;
  std::atomic<Level> level;

  Dispatch() {
    Level chosen = best_supported_level();
    if (const char* env = std::getenv("BASKET_SIMD");
        env != nullptr && std::strcmp(env, "scalar") == 0) {
      chosen = Level::scalar;
    }
    level.store(chosen, std::memory_order_relaxed);
    table.store(table_for(chosen), std::memory_order_relaxed);
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

Level active_level() { return dispatch().level.load(std::memory_order_relaxed); }

const char* level_name(Level level) {
  switch (level) {
    case Level::avx2:
      return "avx2";
    case Level::neon:
      return "neon";
    default:
      return "scalar";
  }
}

void force_level(Level level) {
  Level chosen = level;
  if (level != Level::scalar && level != best_supported_level()) {
    chosen = Level::scalar;
  }
  dispatch().level.store(chosen, std::memory_order_relaxed);
  dispatch().table.store(table_for(chosen), std::memory_order_relaxed);
}

float dot(const float* a, const float* b, std::size_t n) {
  return dispatch().table.load(std::memory_order_relaxed)->dot_f32(a, b, n);
}
double dot(const double* a, const double* b, std::size_t n) {
  return dispatch().table.load(std::memory_order_relaxed)->dot_f64(a, b, n);
}
float sqdist(const float* a, const float* b, std::size_t n) {
  return dispatch().table.load(std::memory_order_relaxed)->sqdist_f32(a, b, n);
}
double sqdist(const double* a, const double* b, std::size_t n) {
  return dispatch().table.load(std::memory_order_relaxed)->sqdist_f64(a, b, n);
}
void axpy(float alpha, const float* x, float* y, std::size_t n) {
  dispatch().table.load(std::memory_order_relaxed)->axpy_f32(alpha, x, y, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  dispatch().table.load(std::memory_order_relaxed)->axpy_f64(alpha, x, y, n);
}
void adagrad_update(float* w, float* gsq, const float* g, float lr, float eps,
                    std::size_t n) {
  dispatch().table.load(std::memory_order_relaxed)->adagrad_f32(w, gsq, g, lr, eps, n);
}

}  // namespace basket::simd
