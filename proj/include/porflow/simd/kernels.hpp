#pragma once

#include <cmath>
#include <cstddef>

// Dense arithmetic kernels behind the network layers. Every kernel has a
// plain scalar reference (templated, also used for double precision) and an
// AVX2/FMA float variant; the float entry points dispatch once at runtime.
//
// Matrices are row-major with explicit leading dimensions. All GEMM variants
// compute C = beta_acc ? C + op : op, where op is
//   nn: A[M,K] * B[K,N]      tn: A[K,M]^T * B[K,N]      nt: A[M,K] * B[N,K]^T

namespace porflow::simd {

enum class Isa { Scalar, Avx2 };

const char* to_string(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
// Chosen on first use: AVX2 when the CPU has AVX2+FMA, unless the
// PORFLOW_SIMD environment variable is "scalar".
Isa active_isa() noexcept;
// Testing hook; throws std::invalid_argument when the CPU lacks the ISA.
void set_active_isa(Isa isa);

struct KernelTable {
  void (*gemm_nn)(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
                  int ldc, bool accumulate);
  void (*gemm_tn)(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
                  int ldc, bool accumulate);
  void (*gemm_nt)(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
                  int ldc, bool accumulate);
  // m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2; w -= step * m / (sqrt(v) * inv_bc2 + eps)
  void (*adam_update)(std::size_t n, float* w, const float* g, float* m, float* v, float b1,
                      float b2, float step, float inv_bc2, float eps);
  float (*sum)(std::size_t n, const float* x);
  float (*dot)(std::size_t n, const float* x, const float* y);
};

const KernelTable& table(Isa isa);
inline const KernelTable& table() { return table(active_isa()); }

// ---------------------------------------------------------------------------
// Scalar references.

template <class T>
void gemm_nn_ref(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc,
                 bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    if (!accumulate)
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    for (int p = 0; p < k; ++p) {
      const T aip = a[static_cast<std::ptrdiff_t>(i) * lda + p];
      const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
void gemm_tn_ref(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc,
                 bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    if (!accumulate)
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    for (int p = 0; p < k; ++p) {
      const T api = a[static_cast<std::ptrdiff_t>(p) * lda + i];
      const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

template <class T>
void gemm_nt_ref(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc,
                 bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::ptrdiff_t>(j) * ldb;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      T& dst = c[static_cast<std::ptrdiff_t>(i) * ldc + j];
      dst = accumulate ? dst + acc : acc;
    }
  }
}

template <class T>
void adam_update_ref(std::size_t n, T* w, const T* g, T* m, T* v, T b1, T b2, T step, T inv_bc2,
                     T eps) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    w[i] -= step * m[i] / (std::sqrt(v[i]) * inv_bc2 + eps);
  }
}

template <class T>
T sum_ref(std::size_t n, const T* x) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <class T>
T dot_ref(std::size_t n, const T* x, const T* y) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

// ---------------------------------------------------------------------------
// Precision-generic front end used by the layers: float goes through the
// dispatched table, anything else through the references.

template <class T>
struct Ops {
  static void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc,
                      bool acc) {
    gemm_nn_ref(m, n, k, a, lda, b, ldb, c, ldc, acc);
  }
  static void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc,
                      bool acc) {
    gemm_tn_ref(m, n, k, a, lda, b, ldb, c, ldc, acc);
  }
  static void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc,
                      bool acc) {
    gemm_nt_ref(m, n, k, a, lda, b, ldb, c, ldc, acc);
  }
  static void adam_update(std::size_t n, T* w, const T* g, T* m, T* v, T b1, T b2, T step,
                          T inv_bc2, T eps) {
    adam_update_ref(n, w, g, m, v, b1, b2, step, inv_bc2, eps);
  }
  static T sum(std::size_t n, const T* x) { return sum_ref(n, x); }
  static T dot(std::size_t n, const T* x, const T* y) { return dot_ref(n, x, y); }
};

template <>
struct Ops<float> {
  static void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
                      float* c, int ldc, bool acc) {
    table().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, acc);
  }
  static void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
                      float* c, int ldc, bool acc) {
    table().gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, acc);
  }
  static void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
                      float* c, int ldc, bool acc) {
    table().gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, acc);
  }
  static void adam_update(std::size_t n, float* w, const float* g, float* m, float* v, float b1,
                          float b2, float step, float inv_bc2, float eps) {
    table().adam_update(n, w, g, m, v, b1, b2, step, inv_bc2, eps);
  }
  static float sum(std::size_t n, const float* x) { return table().sum(n, x); }
  static float dot(std::size_t n, const float* x, const float* y) { return table().dot(n, x, y); }
};

}  // namespace porflow::simd
