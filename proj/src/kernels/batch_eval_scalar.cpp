#include <vector>

#include "solcensus/kernels/batch_eval.hpp"
#include "solcensus/numeric.hpp"

namespace solcensus::kernels {

namespace {

// Reference operation order: power rows built by ascending multiplication,
// terms accumulated in basis order with no zero-coefficient skipping. The
// vector unit mirrors this sequence lane for lane.
void eval_double_scalar(const VeroneseBasis& basis, const double* coef, const double* coords,
                        std::size_t count, double* out) {
  const int n = basis.n, d = basis.d;
  std::vector<double> pw(static_cast<std::size_t>(n) * (d + 1));
  for (std::size_t k = 0; k < count; ++k) {
    const double* x = coords + k * n;
    for (int j = 0; j < n; ++j) {
      double* row = pw.data() + static_cast<std::size_t>(j) * (d + 1);
      row[0] = 1.0;
      for (int e = 1; e <= d; ++e) row[e] = row[e - 1] * x[j];
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
      double t = coef[i];
      const auto& e = basis.exponents[i];
      for (int j = 0; j < n; ++j)
        if (e[j] > 0) t = t * pw[static_cast<std::size_t>(j) * (d + 1) + e[j]];
      acc = acc + t;
    }
    out[k] = acc;
  }
}

void eval_mod_scalar(const VeroneseBasis& basis, const std::uint64_t* coef,
                     const std::uint64_t* coords, std::size_t count, std::uint64_t m,
                     std::uint64_t* out) {
  const int n = basis.n, d = basis.d;
  std::vector<std::uint64_t> pw(static_cast<std::size_t>(n) * (d + 1));
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t* x = coords + k * n;
    for (int j = 0; j < n; ++j) {
      std::uint64_t* row = pw.data() + static_cast<std::size_t>(j) * (d + 1);
      row[0] = 1 % m;
      for (int e = 1; e <= d; ++e) row[e] = mulmod_u64(row[e - 1], x[j], m);
    }
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
      std::uint64_t t = coef[i];
      const auto& e = basis.exponents[i];
      for (int j = 0; j < n; ++j)
        if (e[j] > 0) t = mulmod_u64(t, pw[static_cast<std::size_t>(j) * (d + 1) + e[j]], m);
      std::uint64_t s = acc + t;
      acc = s >= m ? s - m : s;
    }
    out[k] = acc;
  }
}

}  // namespace

const BatchEvalBackend& scalar_backend() {
  static const BatchEvalBackend backend{"scalar", &eval_double_scalar, &eval_mod_scalar};
  return backend;
}

}  // namespace solcensus::kernels
