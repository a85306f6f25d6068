#pragma once

#include <cstddef>
#include <string>

// Data-parallel kernels used by the training, indexing, clustering and
// projection inner loops. Scalar reference implementations always exist;
// AVX2/NEON variants are selected once at runtime from CPU capabilities.
// Equivalence of every variant against the scalar reference is enforced
// by tests/test_kernels.cpp.

namespace basket::simd {

enum class Level { scalar, avx2, neon };

// Kernel set active for this process. Selection happens on first use and
// honors BASKET_SIMD=scalar in the environment.
Level active_level();
const char* level_name(Level level);

// Force a specific kernel set (tests and benchmarking). Passing a level the
// CPU cannot execute falls back to scalar.
void force_level(Level level);

float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);

// Squared Euclidean distance.
float sqdist(const float* a, const float* b, std::size_t n);
double sqdist(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

// Adagrad ascent step: gsq += g*g; w += lr * g / (sqrt(gsq) + eps).
void adagrad_update(float* w, float* gsq, const float* g, float lr, float eps,
                    std::size_t n);

// Scalar reference kernels, exposed for equivalence tests.
namespace scalar {
float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
float sqdist(const float* a, const float* b, std::size_t n);
double sqdist(const double* a, const double* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void adagrad_update(float* w, float* gsq, const float* g, float lr, float eps,
                    std::size_t n);
}  // namespace scalar

}  // namespace basket::simd
