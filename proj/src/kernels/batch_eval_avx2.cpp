#include "solcensus/kernels/batch_eval.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

namespace solcensus::kernels {

const BatchEvalBackend* avx2_backend_impl();

namespace {

constexpr int kMaxPowSlots = 128;  // n * (d + 1) rows held in registers/stack

inline __m256d gather4(const double* coords, std::size_t k, int n, int j) {
  return _mm256_set_pd(coords[(k + 3) * n + j], coords[(k + 2) * n + j],
                       coords[(k + 1) * n + j], coords[(k + 0) * n + j]);
}

// Lane arithmetic mirrors the scalar reference exactly: products and sums in
// the same order, no FMA, so each lane rounds identically.
void eval_double_avx2(const VeroneseBasis& basis, const double* coef, const double* coords,
                      std::size_t count, double* out) {
  const int n = basis.n, d = basis.d;
  if (n * (d + 1) > kMaxPowSlots) {
    scalar_backend().eval_double(basis, coef, coords, count, out);
    return;
  }
  __m256d pw[kMaxPowSlots];
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) {
    for (int j = 0; j < n; ++j) {
      __m256d* row = pw + static_cast<std::size_t>(j) * (d + 1);
      row[0] = one;
      const __m256d xj = gather4(coords, k, n, j);
      for (int e = 1; e <= d; ++e) row[e] = _mm256_mul_pd(row[e - 1], xj);
    }
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < basis.size(); ++i) {
      __m256d t = _mm256_set1_pd(coef[i]);
      const auto& e = basis.exponents[i];
      for (int j = 0; j < n; ++j)
        if (e[j] > 0) t = _mm256_mul_pd(t, pw[static_cast<std::size_t>(j) * (d + 1) + e[j]]);
      acc = _mm256_add_pd(acc, t);
    }
    _mm256_storeu_pd(out + k, acc);
  }
  if (k < count) scalar_backend().eval_double(basis, coef, coords + k * n, count - k, out + k);
}

// Exact modular arithmetic in doubles: for m < 2^26 every intermediate
// product stays below 2^52, and a floored-quotient estimate off by at most
// one is repaired by a single conditional add and subtract.
struct ModLanes {
  __m256d m, inv;

  explicit ModLanes(std::uint64_t mod)
      : m(_mm256_set1_pd(static_cast<double>(mod))),
        inv(_mm256_set1_pd(1.0 / static_cast<double>(mod))) {}

  __m256d mul(__m256d a, __m256d b) const {
    __m256d t = _mm256_mul_pd(a, b);
    __m256d q = _mm256_floor_pd(_mm256_mul_pd(t, inv));
    __m256d r = _mm256_sub_pd(t, _mm256_mul_pd(q, m));
    r = _mm256_add_pd(r, _mm256_and_pd(_mm256_cmp_pd(r, _mm256_setzero_pd(), _CMP_LT_OQ), m));
    r = _mm256_sub_pd(r, _mm256_and_pd(_mm256_cmp_pd(r, m, _CMP_GE_OQ), m));
    return r;
  }

  __m256d add(__m256d a, __m256d b) const {
    __m256d s = _mm256_add_pd(a, b);
    return _mm256_sub_pd(s, _mm256_and_pd(_mm256_cmp_pd(s, m, _CMP_GE_OQ), m));
  }
};

void eval_mod_avx2(const VeroneseBasis& basis, const std::uint64_t* coef,
                   const std::uint64_t* coords, std::size_t count, std::uint64_t m,
                   std::uint64_t* out) {
  const int n = basis.n, d = basis.d;
  if (m < 2 || m >= (1ull << 26) || n * (d + 1) > kMaxPowSlots) {
    scalar_backend().eval_mod(basis, coef, coords, count, m, out);
    return;
  }
  const ModLanes ml(m);
  __m256d pw[kMaxPowSlots];
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) {
    for (int j = 0; j < n; ++j) {
      __m256d* row = pw + static_cast<std::size_t>(j) * (d + 1);
      row[0] = one;
      const __m256d xj = _mm256_set_pd(static_cast<double>(coords[(k + 3) * n + j]),
                                       static_cast<double>(coords[(k + 2) * n + j]),
                                       static_cast<double>(coords[(k + 1) * n + j]),
                                       static_cast<double>(coords[(k + 0) * n + j]));
      for (int e = 1; e <= d; ++e) row[e] = ml.mul(row[e - 1], xj);
    }
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < basis.size(); ++i) {
      __m256d t = _mm256_set1_pd(static_cast<double>(coef[i]));
      const auto& e = basis.exponents[i];
      for (int j = 0; j < n; ++j)
        if (e[j] > 0) t = ml.mul(t, pw[static_cast<std::size_t>(j) * (d + 1) + e[j]]);
      acc = ml.add(acc, t);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (int l = 0; l < 4; ++l) out[k + l] = static_cast<std::uint64_t>(lanes[l]);
  }
  if (k < count) scalar_backend().eval_mod(basis, coef, coords + k * n, count - k, m, out + k);
}

const BatchEvalBackend kAvx2Backend{"avx2", &eval_double_avx2, &eval_mod_avx2};

}  // namespace

const BatchEvalBackend* avx2_backend_impl() { return &kAvx2Backend; }

}  // namespace solcensus::kernels

#endif  // __AVX2__
