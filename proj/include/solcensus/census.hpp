#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "solcensus/densities.hpp"
#include "solcensus/forms.hpp"
#include "solcensus/numeric.hpp"
#include "solcensus/padic.hpp"
#include "solcensus/real_solver.hpp"
#include "solcensus/thin_set.hpp"

namespace solcensus {

enum class CensusMode { exhaustive, sampled };

struct CensusBudgets {
  ZpOptions zp;
  RealOptions real;
  std::uint64_t smooth_budget = 20000000;  // mod-p smooth point scan cap
  long witness_span = 4000;                // tail insolubility witness search width
  std::uint64_t sample_m = 0;              // sampled-mode draw count
  int jobs = 1;
  std::string cache_dir;  // empty disables the verdict cache
};

// How a point's verdict was settled. rational_zero and tail_witness are the
// conclusive endings that no finite place list alone could give.
enum class VerdictRoute : char {
  rational_zero = 'R',   // exact nontrivial zero over Q: soluble everywhere
  places = 'P',          // real place or some p <= p_max decided
  tail_covered = 'C',    // all checked places soluble and the tail is covered
  tail_witness = 'W',    // insoluble at an explicit prime beyond p_max
  undecided = 'U',
};

struct PointVerdict {
  char code = 'U';  // 'S' soluble, 'I' insoluble, 'U' unknown
  long place = -1;  // 0 real, p prime: the deciding place when code == 'I'
  VerdictRoute route = VerdictRoute::undecided;
};

// Full local verdict for one coefficient vector: an exact global-zero
// shortcut, then the real place, then primes p <= p_max, then the tail
// policy for the remaining primes (exact for d = 2 and for binary forms
// with a found witness; the sampled point-count shortcut for ternary
// d >= 3; never covered for n >= 4, d >= 3).
PointVerdict classify_point(const ThinFormP& P, const VeroneseBasis& basis, std::span<const Int> a,
                            long p_max, const CensusBudgets& budgets = {});

struct PlaceStats {
  long p = 0;                   // 0 is the real place
  std::uint64_t insoluble = 0;  // points this place decided insoluble
  std::uint64_t unknown = 0;    // Unknown verdicts here among fresh (uncached) points
};

struct CensusReport {
  long A = 0;
  Int total{0}, soluble{0}, insoluble{0}, unknown{0};
  Rat rho_lower{0}, rho_upper{0};
  bool defined = false;  // total > 0
  std::vector<PlaceStats> place_stats;
  std::uint64_t rational_zero = 0, tail_covered = 0, tail_witness = 0;
  CensusMode mode = CensusMode::exhaustive;
  std::uint64_t cache_hits = 0;
};

// Proportion of locally soluble fibers over the primitive thin set in
// [-A,A]^N, as the certified interval
// [soluble/total, (soluble + unknown)/total]; unknowns are never split.
CensusReport rho_estimate(const ThinFormP& P, const VeroneseBasis& basis, long A, long p_max,
                          const CensusBudgets& budgets = {}, std::uint64_t seed = 0,
                          CensusMode mode = CensusMode::exhaustive);

// Product of local boxes: the real factor is a box of coefficient fractions
// a/A (or the T_infty membership marker), each finite place either a p-adic
// box a = center mod p^level or the T_p membership marker.
struct LocalConditionProduct {
  struct FinitePlace {
    long p = 0;
    bool t_marker = false;
    std::vector<Int> center;
    int level = 0;
  };
  bool real_t_marker = false;
  std::optional<BoxSpec> real_box;  // empty means the full box
  std::vector<FinitePlace> finite;
  static LocalConditionProduct full();
};

struct DQuantity {
  Rat value{0};
  bool defined = false;
  Int numerator{0}, denominator{0};
  std::uint64_t unknown_members = 0;  // marker memberships left undecided
};

// Fraction of primitive thin-set points in [-A,A]^N whose adelic image
// (a/A, a, a, ...) lands in U. Box conditions count exactly; membership
// markers count certified members only and report the undecided ones.
DQuantity d_quantity(const ThinFormP& P, const VeroneseBasis& basis,
                     const LocalConditionProduct& U, long A, const CensusBudgets& budgets = {});

struct ConvergenceRow {
  CensusReport report;
  double midpoint = 0.0;
  double delta = -1.0;  // midpoint move from the previous row; -1 on the first
};

struct ConvergenceOptions {
  CensusBudgets budgets;
  std::uint64_t seed = 0;
  double noise_tolerance = 0.01;
  CPOptions cp;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  CPEstimate cp;
  double cp_lower_inflated = 0.0, cp_upper = 1.0;
  std::string verdict;  // PASS, FAIL or SKIP
  std::string reason;
};

// Census over an increasing A schedule: interval per A, successive midpoint
// deltas, and the truncated-product reference interval widened by its
// estimated deficits. PASS needs non-increasing deltas (within the noise
// tolerance) and overlap of the final interval with the widened reference.
ConvergenceReport convergence_report(const ThinFormP& P, const VeroneseBasis& basis,
                                     std::span<const long> A_schedule, long p_max,
                                     const ConvergenceOptions& opt = {});

struct PrimeBall {
  long p = 0;
  long alpha = 0;
  Rat eta{0};  // p^(-2 alpha)
  std::uint64_t validated = 0;
};

struct PositivityCertificate {
  std::vector<Int> b;  // coefficient vector on the thin set
  std::vector<Int> y;  // primitive smooth integer zero of f_b
  int pivot = 0;       // gradient coordinate carrying the sign bracket
  std::vector<PrimeBall> prime_balls;
  Rat eta_infty{0};
  Rat C{1};  // scaling with B(b/C, eta_infty/C) inside the unit box
  std::uint64_t real_validated = 0;
};

struct ProbeResult {
  std::optional<PositivityCertificate> certificate;
  std::string failure_reason;  // set when no certificate was produced
};

// Searches [-H,H]^n for a smooth integer zero of f_b and dresses it into
// perturbation balls: at each p <= p_max the radius p^(-2 alpha_p) with 20
// seeded coefficient perturbations re-checked for solubility, at the real
// place a sign bracket with margin-derived radius. Failure to find a point
// is reported as such, never as a disproof.
ProbeResult positivity_probe(const ThinFormP& P, const VeroneseBasis& basis,
                             std::span<const Int> b, long H, long p_max,
                             const CensusBudgets& budgets = {}, std::uint64_t seed = 0);

}  // namespace solcensus
