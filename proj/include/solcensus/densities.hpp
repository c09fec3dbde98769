#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "solcensus/forms.hpp"
#include "solcensus/numeric.hpp"
#include "solcensus/padic.hpp"
#include "solcensus/real_solver.hpp"
#include "solcensus/thin_set.hpp"

namespace solcensus {

enum class DensityMethod { exact_count, certified_interval, monte_carlo };

struct DensityInterval {
  Rat lower{0}, upper{0};  // exact endpoints; Monte Carlo embeds the binary64 values
  DensityMethod method = DensityMethod::exact_count;
  long level = 0;      // p-adic refinement level r
  double eta = 0.0;    // final Monte Carlo slab half-width
  std::uint64_t samples = 0;
  double stderr_value = 0.0;
  bool consistent = true;  // Monte Carlo schedule self-consistency
};

// Restriction on residue classes a mod p^r, via the least non-negative
// representative: a == residue mod p^{v_p(modulus)}, and/or representative
// fractions a_i / p^r confined to rational subintervals of [0,1].
struct PadicCondition {
  Int modulus = 1;
  std::vector<Int> residue;
  std::vector<std::pair<Rat, Rat>> representative_box;
  static PadicCondition all();
  static PadicCondition congruence(Int B, std::vector<Int> r0);
  static PadicCondition box(std::vector<std::pair<Rat, Rat>> intervals);
};

struct SigmaPOptions {
  std::uint64_t max_classes = 1ull << 27;  // direct-enumeration budget for p^{rN}
  bool allow_fiber = true;  // unconditioned counts may fall back to fiber root counting
  int jobs = 1;
};

// Finite-level local density of the thin set:
// p^{-r(N-1)} * #{a mod p^r : P(a) == 0 mod p^r, condition}; r = 0 gives 1.
Rat sigma_p_level(const ThinFormP& P, long p, int r,
                  const PadicCondition& cond = PadicCondition::all(),
                  const SigmaPOptions& opt = {});

// Roots of sum_j c[j] t^j modulo p^r, counted by recursive lifting; the
// identically-zero polynomial mod p^r has p^r roots.
Int count_poly_roots_mod(std::span<const Int> c, long p, int r);

enum class ClassStatus { certified_in, certified_out, unknown };

// Solubility of f_a over Z_p for the whole residue class of a0 mod p^r:
// certified_in needs a class-stable Hensel certificate with 2*alpha+1 <= r,
// certified_out an exhaustion level <= r; the all-zero class stays unknown.
ClassStatus classify_residue_class(const VeroneseBasis& basis, std::span<const Int> a0, long p,
                                   int r, const ZpOptions& zp = {});

// Certified bracket for sigma_p(T_p) at level r: every class on the thin
// surface is classified through classify_residue_class, and the result is
// [certified-in mass, total mass - certified-out mass] * p^{-r(N-1)}.
// samples reports the number of classes on the surface.
DensityInterval sigma_p_Tp(const ThinFormP& P, const VeroneseBasis& basis, long p, int r,
                           const ZpOptions& zp = {}, const SigmaPOptions& opt = {});

enum class InftyMembership { all, t_infty };

struct SigmaInftyOptions {
  std::vector<double> eta_schedule{0.1, 0.05, 0.025};
  std::uint64_t samples = 1000000;  // per eta
  std::uint64_t seed = 0;
  InftyMembership membership = InftyMembership::all;
  int jobs = 1;
  double unknown_flag_threshold = 0.1;  // tolerated unknown fraction among slab hits
  RealOptions real;                     // membership solver knobs
};

// Monte Carlo estimate of vol{y in region : |P(y)| < eta, membership} / (2 eta)
// for each eta in the (strictly decreasing, length >= 2) schedule; returns the
// last-eta estimate. With t_infty membership the real-place verdict splits the
// endpoints: certainly-soluble hits bound from below, unknown hits widen the
// upper end. consistent clears when adjacent schedule estimates disagree by
// more than two combined standard errors or the unknown fraction exceeds the
// threshold. A region on which interval evaluation bounds |P| >= max eta
// short-circuits to an exact zero. Counts accumulate per fixed-size chunk with
// derived seeds, so results are bit-identical for every jobs value.
DensityInterval sigma_infty(const ThinFormP& P, const BoxSpec& region,
                            const SigmaInftyOptions& opt);

// t_infty membership needs the basis of the forms f_a; the membership=all
// overload above rejects that mode.
DensityInterval sigma_infty(const ThinFormP& P, const VeroneseBasis& basis, const BoxSpec& region,
                            const SigmaInftyOptions& opt);

struct PlaceFactor {
  long p = 0;  // 0 is the real place
  DensityInterval numerator;
  DensityInterval denominator;
};

struct DeficitEntry {
  long p = 0;
  double estimated_deficit = 0.0;
  bool estimated = false;  // false: unquantified, no certificate mechanism at this place
};

struct RSchedule {
  int r_small = 3;
  long p_small = 5;
  int r_mid = 2;
  long p_mid = 13;
  int r_tail = 1;
  int pick(long p) const { return p <= p_small ? r_small : p <= p_mid ? r_mid : r_tail; }
};

struct CPEstimate {
  std::vector<PlaceFactor> factors;  // real place first, then primes ascending
  long p_max = 0;
  double lower = 0.0, upper = 0.0;  // interval product of per-place ratios
  std::vector<DeficitEntry> deficits;
};

struct CPOptions {
  RSchedule r_schedule;
  ZpOptions zp;
  SigmaPOptions sigma_p;
  SigmaInftyOptions sigma_infty;  // membership is overridden per factor
  long deficit_primes = 5;        // primes past p_max receiving a deficit entry
  std::uint64_t deficit_samples = 200;
};

// Truncated product for the solubility constant: the real ratio
// sigma_infty(T_infty)/sigma_infty(region) times prod_{p <= p_max} of the
// sigma_p_Tp / sigma_p_level ratio intervals. The numerator and denominator
// real factors reuse one sample stream, so their ratio never exceeds 1.
// witness must be a nontrivial integer zero of P. Primes past p_max appear
// as deficit entries, estimated by smooth-reduction sampling where the
// plane-curve point guarantee applies (n = 3) and flagged unquantified
// otherwise; they are never silently treated as exact 1.
CPEstimate c_p_estimate(const ThinFormP& P, const VeroneseBasis& basis, long p_max,
                        std::span<const Int> witness, const CPOptions& opt = {});

}  // namespace solcensus
