// Compiled with -mavx2 -mfma; only reached through the runtime dispatch.
#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "porflow/simd/kernels.hpp"

namespace porflow::simd {

namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

std::vector<float>& scratch(int slot) {
  thread_local std::vector<float> buf[2];
  return buf[slot];
}

void transpose(int rows, int cols, const float* src, int ld, float* dst) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) dst[static_cast<std::ptrdiff_t>(c) * rows + r] = src[static_cast<std::ptrdiff_t>(r) * ld + c];
}

// C[i, j] (+)= sum_p a(i, p) * B[p, j], vectorized over j.
template <bool TransA>
void gemm_xn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool acc) {
  auto aval = [&](int i, int p) {
    return TransA ? a[static_cast<std::ptrdiff_t>(p) * lda + i] : a[static_cast<std::ptrdiff_t>(i) * lda + p];
  };
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    float* c0 = c + static_cast<std::ptrdiff_t>(i) * ldc;
    float* c1 = c0 + ldc;
    float* c2 = c1 + ldc;
    float* c3 = c2 + ldc;
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256 r00 = acc ? _mm256_loadu_ps(c0 + j) : _mm256_setzero_ps();
      __m256 r01 = acc ? _mm256_loadu_ps(c0 + j + 8) : _mm256_setzero_ps();
      __m256 r10 = acc ? _mm256_loadu_ps(c1 + j) : _mm256_setzero_ps();
      __m256 r11 = acc ? _mm256_loadu_ps(c1 + j + 8) : _mm256_setzero_ps();
      __m256 r20 = acc ? _mm256_loadu_ps(c2 + j) : _mm256_setzero_ps();
      __m256 r21 = acc ? _mm256_loadu_ps(c2 + j + 8) : _mm256_setzero_ps();
      __m256 r30 = acc ? _mm256_loadu_ps(c3 + j) : _mm256_setzero_ps();
      __m256 r31 = acc ? _mm256_loadu_ps(c3 + j + 8) : _mm256_setzero_ps();
      for (int p = 0; p < k; ++p) {
        const float* brow = b + static_cast<std::ptrdiff_t>(p) * ldb + j;
        const __m256 b0 = _mm256_loadu_ps(brow);
        const __m256 b1 = _mm256_loadu_ps(brow + 8);
        __m256 av = _mm256_set1_ps(aval(i, p));
        r00 = _mm256_fmadd_ps(av, b0, r00);
        r01 = _mm256_fmadd_ps(av, b1, r01);
        av = _mm256_set1_ps(aval(i + 1, p));
        r10 = _mm256_fmadd_ps(av, b0, r10);
        r11 = _mm256_fmadd_ps(av, b1, r11);
        av = _mm256_set1_ps(aval(i + 2, p));
        r20 = _mm256_fmadd_ps(av, b0, r20);
        r21 = _mm256_fmadd_ps(av, b1, r21);
        av = _mm256_set1_ps(aval(i + 3, p));
        r30 = _mm256_fmadd_ps(av, b0, r30);
        r31 = _mm256_fmadd_ps(av, b1, r31);
      }
      _mm256_storeu_ps(c0 + j, r00);
      _mm256_storeu_ps(c0 + j + 8, r01);
      _mm256_storeu_ps(c1 + j, r10);
      _mm256_storeu_ps(c1 + j + 8, r11);
      _mm256_storeu_ps(c2 + j, r20);
      _mm256_storeu_ps(c2 + j + 8, r21);
      _mm256_storeu_ps(c3 + j, r30);
      _mm256_storeu_ps(c3 + j + 8, r31);
    }
    for (; j + 8 <= n; j += 8) {
      __m256 r0 = acc ? _mm256_loadu_ps(c0 + j) : _mm256_setzero_ps();
      __m256 r1 = acc ? _mm256_loadu_ps(c1 + j) : _mm256_setzero_ps();
      __m256 r2 = acc ? _mm256_loadu_ps(c2 + j) : _mm256_setzero_ps();
      __m256 r3 = acc ? _mm256_loadu_ps(c3 + j) : _mm256_setzero_ps();
      for (int p = 0; p < k; ++p) {
        const __m256 bv = _mm256_loadu_ps(b + static_cast<std::ptrdiff_t>(p) * ldb + j);
        r0 = _mm256_fmadd_ps(_mm256_set1_ps(aval(i, p)), bv, r0);
        r1 = _mm256_fmadd_ps(_mm256_set1_ps(aval(i + 1, p)), bv, r1);
        r2 = _mm256_fmadd_ps(_mm256_set1_ps(aval(i + 2, p)), bv, r2);
        r3 = _mm256_fmadd_ps(_mm256_set1_ps(aval(i + 3, p)), bv, r3);
      }
      _mm256_storeu_ps(c0 + j, r0);
      _mm256_storeu_ps(c1 + j, r1);
      _mm256_storeu_ps(c2 + j, r2);
      _mm256_storeu_ps(c3 + j, r3);
    }
    for (; j < n; ++j) {
      for (int r = 0; r < 4; ++r) {
        float s = 0.0f;
        for (int p = 0; p < k; ++p) s += aval(i + r, p) * b[static_cast<std::ptrdiff_t>(p) * ldb + j];
        float& dst = c[static_cast<std::ptrdiff_t>(i + r) * ldc + j];
        dst = acc ? dst + s : s;
      }
    }
  }
  for (; i < m; ++i) {
    float* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    int j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256 r0 = acc ? _mm256_loadu_ps(crow + j) : _mm256_setzero_ps();
      for (int p = 0; p < k; ++p)
        r0 = _mm256_fmadd_ps(_mm256_set1_ps(aval(i, p)),
                             _mm256_loadu_ps(b + static_cast<std::ptrdiff_t>(p) * ldb + j), r0);
      _mm256_storeu_ps(crow + j, r0);
    }
    for (; j < n; ++j) {
      float s = 0.0f;
      for (int p = 0; p < k; ++p) s += aval(i, p) * b[static_cast<std::ptrdiff_t>(p) * ldb + j];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

// Panels of B small enough to stay in L2 while every row block of A sweeps them.
constexpr int kPanelCols = 512;
constexpr int kPanelDepth = 256;

template <bool TransA>
void gemm_xn_blocked(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
                     float* c, int ldc, bool acc) {
  for (int j0 = 0; j0 < n; j0 += kPanelCols) {
    const int nb = std::min(kPanelCols, n - j0);
    for (int p0 = 0; p0 < k; p0 += kPanelDepth) {
      const int kb = std::min(kPanelDepth, k - p0);
      const float* ap = TransA ? a + static_cast<std::ptrdiff_t>(p0) * lda : a + p0;
      gemm_xn<TransA>(m, nb, kb, ap, lda, b + static_cast<std::ptrdiff_t>(p0) * ldb + j0, ldb,
                      c + j0, ldc, acc || p0 > 0);
    }
  }
  if (k == 0 && !acc)
    for (int i = 0; i < m; ++i) {
      float* row = c + static_cast<std::ptrdiff_t>(i) * ldc;
      std::fill(row, row + n, 0.0f);
    }
}

// C[i, j] (+)= dot(A[i, :], B[j, :]), vectorized over the shared dimension.
void gemm_nt_dot(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
                 int ldc, bool acc) {
  const int k8 = k & ~7;
  int i = 0;
  for (; i + 2 <= m; i += 2) {
    const float* a0 = a + static_cast<std::ptrdiff_t>(i) * lda;
    const float* a1 = a0 + lda;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      const float* bj[4];
      for (int q = 0; q < 4; ++q) bj[q] = b + static_cast<std::ptrdiff_t>(j + q) * ldb;
      __m256 s0[4], s1[4];
      for (int q = 0; q < 4; ++q) s0[q] = s1[q] = _mm256_setzero_ps();
      for (int p = 0; p < k8; p += 8) {
        const __m256 x0 = _mm256_loadu_ps(a0 + p);
        const __m256 x1 = _mm256_loadu_ps(a1 + p);
        for (int q = 0; q < 4; ++q) {
          const __m256 y = _mm256_loadu_ps(bj[q] + p);
          s0[q] = _mm256_fmadd_ps(x0, y, s0[q]);
          s1[q] = _mm256_fmadd_ps(x1, y, s1[q]);
        }
      }
      for (int q = 0; q < 4; ++q) {
        float t0 = hsum(s0[q]), t1 = hsum(s1[q]);
        for (int p = k8; p < k; ++p) {
          t0 += a0[p] * bj[q][p];
          t1 += a1[p] * bj[q][p];
        }
        float& d0 = c[static_cast<std::ptrdiff_t>(i) * ldc + j + q];
        float& d1 = c[static_cast<std::ptrdiff_t>(i + 1) * ldc + j + q];
        d0 = acc ? d0 + t0 : t0;
        d1 = acc ? d1 + t1 : t1;
      }
    }
    for (; j < n; ++j) {
      const float* brow = b + static_cast<std::ptrdiff_t>(j) * ldb;
      __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
      for (int p = 0; p < k8; p += 8) {
        const __m256 y = _mm256_loadu_ps(brow + p);
        s0 = _mm256_fmadd_ps(_mm256_loadu_ps(a0 + p), y, s0);
        s1 = _mm256_fmadd_ps(_mm256_loadu_ps(a1 + p), y, s1);
      }
      float t0 = hsum(s0), t1 = hsum(s1);
      for (int p = k8; p < k; ++p) {
        t0 += a0[p] * brow[p];
        t1 += a1[p] * brow[p];
      }
      float& d0 = c[static_cast<std::ptrdiff_t>(i) * ldc + j];
      float& d1 = c[static_cast<std::ptrdiff_t>(i + 1) * ldc + j];
      d0 = acc ? d0 + t0 : t0;
      d1 = acc ? d1 + t1 : t1;
    }
  }
  for (; i < m; ++i) {
    const float* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<std::ptrdiff_t>(j) * ldb;
      __m256 s = _mm256_setzero_ps();
      for (int p = 0; p < k8; p += 8)
        s = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), s);
      float t = hsum(s);
      for (int p = k8; p < k; ++p) t += arow[p] * brow[p];
      float& d = c[static_cast<std::ptrdiff_t>(i) * ldc + j];
      d = acc ? d + t : t;
    }
  }
}

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool acc) {
  if (n < 8 && k >= 8) {
    // Narrow outputs: transpose B and run dot products along k.
    std::vector<float>& bt = scratch(0);
    bt.resize(static_cast<std::size_t>(n) * k);
    transpose(k, n, b, ldb, bt.data());
    gemm_nt_dot(m, n, k, a, lda, bt.data(), k, c, ldc, acc);
    return;
  }
  gemm_xn_blocked<false>(m, n, k, a, lda, b, ldb, c, ldc, acc);
}

void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool acc) {
  if (n < 8 && m >= 8) {
    // C^T[j, i] = sum_p B[p, j] A[p, i]: vectorize over m, then transpose back.
    std::vector<float>& ct = scratch(1);
    ct.resize(static_cast<std::size_t>(n) * m);
    gemm_xn_blocked<true>(n, m, k, b, ldb, a, lda, ct.data(), m, false);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        float& d = c[static_cast<std::ptrdiff_t>(i) * ldc + j];
        const float v = ct[static_cast<std::size_t>(j) * m + i];
        d = acc ? d + v : v;
      }
    return;
  }
  gemm_xn_blocked<true>(m, n, k, a, lda, b, ldb, c, ldc, acc);
}

void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool acc) {
  if (k < 16 && n >= 8) {
    // Short reductions: transpose B to [k, n] and use outer-product accumulation.
    std::vector<float>& bt = scratch(0);
    bt.resize(static_cast<std::size_t>(n) * k);
    transpose(n, k, b, ldb, bt.data());
    gemm_xn_blocked<false>(m, n, k, a, lda, bt.data(), n, c, ldc, acc);
    return;
  }
  gemm_nt_dot(m, n, k, a, lda, b, ldb, c, ldc, acc);
}

void adam(std::size_t n, float* w, const float* g, float* m, float* v, float b1, float b2,
          float step, float inv_bc2, float eps) {
  const __m256 vb1 = _mm256_set1_ps(b1), vb2 = _mm256_set1_ps(b2);
  const __m256 vc1 = _mm256_set1_ps(1.0f - b1), vc2 = _mm256_set1_ps(1.0f - b2);
  const __m256 vstep = _mm256_set1_ps(step), vbc = _mm256_set1_ps(inv_bc2);
  const __m256 veps = _mm256_set1_ps(eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    __m256 mv = _mm256_add_ps(_mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(vc1, gv));
    __m256 vv = _mm256_add_ps(_mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)),
                              _mm256_mul_ps(_mm256_mul_ps(vc2, gv), gv));
    const __m256 denom = _mm256_add_ps(_mm256_mul_ps(_mm256_sqrt_ps(vv), vbc), veps);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vstep, mv), denom);
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), upd));
  }
  adam_update_ref(n - i, w + i, g + i, m + i, v + i, b1, b2, step, inv_bc2, eps);
}

float sum(std::size_t n, const float* x) {
  __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_add_ps(s0, _mm256_loadu_ps(x + i));
    s1 = _mm256_add_ps(s1, _mm256_loadu_ps(x + i + 8));
  }
  for (; i + 8 <= n; i += 8) s0 = _mm256_add_ps(s0, _mm256_loadu_ps(x + i));
  float t = hsum(_mm256_add_ps(s0, s1));
  for (; i < n; ++i) t += x[i];
  return t;
}

float dot(std::size_t n, const float* x, const float* y) {
  __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), s0);
    s1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), s1);
  }
  for (; i + 8 <= n; i += 8) s0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), s0);
  float t = hsum(_mm256_add_ps(s0, s1));
  for (; i < n; ++i) t += x[i] * y[i];
  return t;
}

}  // namespace

extern const KernelTable kAvx2Table = {gemm_nn, gemm_tn, gemm_nt, adam, sum, dot};

}  // namespace porflow::simd
