#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "porflow/nn/unet.hpp"
#include "porflow/simd/kernels.hpp"

using namespace porflow;
using simd::Isa;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Tolerance scaled by the reduction length and operand magnitudes.
void check_close(const std::vector<float>& a, const std::vector<float>& b, int k) {
  REQUIRE(a.size() == b.size());
  const float tol = 1e-6f * static_cast<float>(k) + 1e-6f;
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

using Gemm = void (*)(int, int, int, const float*, int, const float*, int, float*, int, bool);

void gemm_equivalence(Gemm scalar, Gemm vec, bool a_trans, bool b_trans) {
  // Odd sizes exercise the vector tails and leading-dimension strides; the last
  // one spans several cache panels in both n and k.
  for (auto [m, n, k] : {std::tuple{1, 1, 1}, std::tuple{7, 13, 5}, std::tuple{16, 33, 17},
                         std::tuple{33, 64, 72}, std::tuple{5, 100, 9}, std::tuple{9, 1100, 600}}) {
    const int lda = (a_trans ? m : k) + 3;
    const int ldb = (b_trans ? k : n) + 2;
    const int ldc = n + 1;
    const auto a = random_vec(static_cast<std::size_t>(lda) * (a_trans ? k : m), 1);
    const auto b = random_vec(static_cast<std::size_t>(ldb) * (b_trans ? n : k), 2);
    for (bool acc : {false, true}) {
      auto c1 = random_vec(static_cast<std::size_t>(ldc) * m, 3);
      auto c2 = c1;
      scalar(m, n, k, a.data(), lda, b.data(), ldb, c1.data(), ldc, acc);
      vec(m, n, k, a.data(), lda, b.data(), ldb, c2.data(), ldc, acc);
      check_close(c1, c2, k);
    }
  }
}

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("scalar table is always available") {
  CHECK(simd::isa_supported(Isa::Scalar));
  CHECK(std::string(simd::to_string(Isa::Avx2)) == "avx2");
}

TEST_CASE("avx2 kernels match the scalar reference") {
  if (!simd::isa_supported(Isa::Avx2)) {
    MESSAGE("AVX2 not available on this CPU; equivalence not exercised");
    return;
  }
  const auto& s = simd::table(Isa::Scalar);
  const auto& v = simd::table(Isa::Avx2);
  SUBCASE("gemm nn") { gemm_equivalence(s.gemm_nn, v.gemm_nn, false, false); }
  SUBCASE("gemm tn") { gemm_equivalence(s.gemm_tn, v.gemm_tn, true, false); }
  SUBCASE("gemm nt") { gemm_equivalence(s.gemm_nt, v.gemm_nt, false, true); }
  SUBCASE("reductions") {
    for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 1000u, 4097u}) {
      const auto x = random_vec(n, 4), y = random_vec(n, 5);
      CHECK(std::abs(s.sum(n, x.data()) - v.sum(n, x.data())) <= 1e-5f * (n + 1));
      CHECK(std::abs(s.dot(n, x.data(), y.data()) - v.dot(n, x.data(), y.data())) <= 1e-5f * (n + 1));
    }
  }
  SUBCASE("adam update") {
    for (std::size_t n : {1u, 15u, 64u, 1001u}) {
      auto w1 = random_vec(n, 6), m1 = random_vec(n, 7), v1 = random_vec(n, 8);
      for (auto& x : v1) x = std::abs(x);
      auto w2 = w1, m2 = m1, v2 = v1;
      const auto g = random_vec(n, 9);
      s.adam_update(n, w1.data(), g.data(), m1.data(), v1.data(), 0.9f, 0.999f, 0.01f, 1.3f, 1e-8f);
      v.adam_update(n, w2.data(), g.data(), m2.data(), v2.data(), 0.9f, 0.999f, 0.01f, 1.3f, 1e-8f);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(w1[i] == doctest::Approx(w2[i]).epsilon(1e-5));
        CHECK(m1[i] == doctest::Approx(m2[i]).epsilon(1e-6));
        CHECK(v1[i] == doctest::Approx(v2[i]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("network forward is the same under both dispatch paths") {
  if (!simd::isa_supported(Isa::Avx2)) return;
  nn::NetworkSpec spec;
  spec.base_channels = 8;
  nn::ParallelUNet<float> net(spec);
  net.init_kaiming(3);
  const auto input = random_vec(2 * 16 * 16, 10);
  const Isa before = simd::active_isa();
  simd::set_active_isa(Isa::Scalar);
  const auto a = net.forward(input, 16, 16, false);
  simd::set_active_isa(Isa::Avx2);
  const auto b = net.forward(input, 16, 16, false);
  simd::set_active_isa(before);
  for (std::size_t i = 0; i < a.pressure.size(); ++i) {
    CHECK(a.pressure[i] == doctest::Approx(b.pressure[i]).epsilon(1e-4));
    CHECK(a.saturation[i] == doctest::Approx(b.saturation[i]).epsilon(1e-4));
  }
}

}  // TEST_SUITE
