#include "porflow/simd/kernels.hpp"

namespace porflow::simd {

namespace {

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool acc) {
  gemm_nn_ref(m, n, k, a, lda, b, ldb, c, ldc, acc);
}
void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool acc) {
  gemm_tn_ref(m, n, k, a, lda, b, ldb, c, ldc, acc);
}
void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool acc) {
  gemm_nt_ref(m, n, k, a, lda, b, ldb, c, ldc, acc);
}
void adam(std::size_t n, float* w, const float* g, float* m, float* v, float b1, float b2,
          float step, float inv_bc2, float eps) {
  adam_update_ref(n, w, g, m, v, b1, b2, step, inv_bc2, eps);
}
float sum(std::size_t n, const float* x) { return sum_ref(n, x); }
float dot(std::size_t n, const float* x, const float* y) { return dot_ref(n, x, y); }

}  // namespace

extern const KernelTable kScalarTable = {gemm_nn, gemm_tn, gemm_nt, adam, sum, dot};

}  // namespace porflow::simd
