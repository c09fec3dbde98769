#include "solcensus/kernels/batch_eval.hpp"

namespace solcensus::kernels {

#if defined(SOLCENSUS_HAVE_AVX2_UNIT)
const BatchEvalBackend* avx2_backend_impl();
#else
static const BatchEvalBackend* avx2_backend_impl() { return nullptr; }
#endif

const BatchEvalBackend* avx2_backend() {
#if defined(SOLCENSUS_HAVE_AVX2_UNIT)
  if (__builtin_cpu_supports("avx2")) return avx2_backend_impl();
  return nullptr;
#else
  return avx2_backend_impl();
#endif
}

const BatchEvalBackend& active_backend() {
  static const BatchEvalBackend& chosen = []() -> const BatchEvalBackend& {
    const BatchEvalBackend* v = avx2_backend();
    return v ? *v : scalar_backend();
  }();
  return chosen;
}

void batch_eval_double(const VeroneseBasis& basis, const double* coef, const double* coords,
                       std::size_t count, double* out) {
  active_backend().eval_double(basis, coef, coords, count, out);
}

void batch_eval_mod(const VeroneseBasis& basis, const std::uint64_t* coef,
                    const std::uint64_t* coords, std::size_t count, std::uint64_t modulus,
                    std::uint64_t* out) {
  active_backend().eval_mod(basis, coef, coords, count, modulus, out);
}

}  // namespace solcensus::kernels
