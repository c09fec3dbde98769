#pragma once

#include <cstdint>

#include "solcensus/forms.hpp"

namespace solcensus::kernels {

// Batched form evaluation backends for the two data-parallel inner loops:
// real values for Monte Carlo volume sampling and residue values for density
// grid scans. Coordinates are point-major: coords[k*n + j] is coordinate j of
// point k. The scalar and vector variants perform the same per-lane operation
// sequence, so double outputs are bit-identical and modular outputs exactly
// equal; which variant runs is a pure speed choice made at runtime.
struct BatchEvalBackend {
  const char* name;
  void (*eval_double)(const VeroneseBasis& basis, const double* coef, const double* coords,
                      std::size_t count, double* out);
  // All of coef[i] and coords[k] must already be reduced into [0, modulus).
  void (*eval_mod)(const VeroneseBasis& basis, const std::uint64_t* coef,
                   const std::uint64_t* coords, std::size_t count, std::uint64_t modulus,
                   std::uint64_t* out);
};

const BatchEvalBackend& scalar_backend();

// nullptr when this build or this CPU lacks AVX2.
const BatchEvalBackend* avx2_backend();

// The fastest backend this process can run.
const BatchEvalBackend& active_backend();

void batch_eval_double(const VeroneseBasis& basis, const double* coef, const double* coords,
                       std::size_t count, double* out);
void batch_eval_mod(const VeroneseBasis& basis, const std::uint64_t* coef,
                    const std::uint64_t* coords, std::size_t count, std::uint64_t modulus,
                    std::uint64_t* out);

}  // namespace solcensus::kernels
