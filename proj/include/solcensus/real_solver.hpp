#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "solcensus/forms.hpp"

namespace solcensus {

struct RealWitness {
  std::vector<double> point;  // approximate unit vector
  double residual = 0.0;      // |f(point)| recomputed in doubles
};

struct RealVerdict {
  enum class Kind { soluble, insoluble, unknown };
  enum class Method {
    none,
    odd_degree,         // soluble: odd-degree form, witness by line bisection
    exact_zero,         // soluble: a rational point with f = 0 exactly
    sign_change,        // soluble: exact sign bracket refined by bisection
    definiteness,       // insoluble: exact quadratic signature
    binary_root_count,  // insoluble: exact univariate real-root count
  };
  Kind kind = Kind::unknown;
  Method method = Method::none;
  std::optional<RealWitness> witness;

  bool soluble() const { return kind == Kind::soluble; }
  bool insoluble() const { return kind == Kind::insoluble; }
};

struct RealOptions {
  std::size_t lowdisc_points = 0;  // 0 selects the default 2 * n * 1000
  std::size_t random_points = 1000;
  std::uint64_t seed = 0x7265616c2d736f6cull;
  double tol = 1e-12;  // witness residual bound, relative to max |a_i|
};

// Existence of a nonzero real zero of f_a. Odd degree is immediately soluble
// (antipodal sign flip); even degree tries exact small-point probes, then a
// deterministic low-discrepancy sampler plus seeded random points (any sign
// bracket is verified in exact rational arithmetic before bisection), then an
// exact decision: quadratics by rational congruence diagonalization of the
// Gram matrix, binary forms by Sturm root counting on the dehomogenization.
// Insoluble is only ever produced by one of the two exact deciders.
RealVerdict real_solubility(const VeroneseBasis& basis, std::span<const Int> a,
                            const RealOptions& opt = {});

// Same verdict: membership is invariant under the positive rescaling that
// maps a coefficient vector into the unit box.
RealVerdict t_infty_membership(const VeroneseBasis& basis, std::span<const Int> a,
                               const RealOptions& opt = {});

// Distinct real roots of a nonzero univariate polynomial (coefficients in
// ascending degree order) via a Sturm chain on its squarefree part.
int count_distinct_real_roots(const std::vector<Rat>& poly);

}  // namespace solcensus
