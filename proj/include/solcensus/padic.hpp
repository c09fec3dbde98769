#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "solcensus/forms.hpp"

namespace solcensus {

// p-adic valuation; empty optional encodes v_p(0) = +infinity.
std::optional<long> vp(const Int& m, long p);

// Nonzero m: true iff m is a square in Q_p (even valuation and square unit
// part: QR mod p for odd p, == 1 mod 8 for p = 2). m = 0 is a domain error.
bool is_square_in_Qp(const Int& m, long p);

struct HenselCertificate {
  long p = 0;
  std::vector<Int> point;  // canonical residues mod p^level, primitive mod p
  long level = 0;          // j: f(point) == 0 mod p^j and j >= 2*alpha + 1
  long alpha = 0;          // exact valuation of the pivot gradient coordinate
  int pivot = -1;          // coordinate attaining alpha
  long content_valuation = 0;  // the certificate is stated for f_{a / p^cv}
};

struct ExactZeroCertificate {
  std::vector<Int> point;  // nontrivial integer zero of the form, exact over Z
  long content_valuation = 0;
};

struct InsolubleExhaustion {
  // Verified: no primitive residue point solves f == 0 mod p^exhaustion_level.
  // The lift frontier first came up empty one level earlier
  // (first_empty_level); emptiness propagates to every deeper level.
  long exhaustion_level = 0;
  long first_empty_level = 0;
  long content_valuation = 0;
};

struct UnknownOutcome {
  enum class Reason { depth_exceeded, frontier_cap, work_cap };
  Reason reason = Reason::depth_exceeded;
  long level_reached = 0;
  std::size_t frontier_size = 0;
  long content_valuation = 0;
};

struct SolubilityVerdict {
  enum class Kind { soluble, insoluble, unknown };
  Kind kind = Kind::unknown;
  long p = 0;
  std::optional<HenselCertificate> hensel;
  std::optional<ExactZeroCertificate> exact_zero;
  std::optional<InsolubleExhaustion> exhaustion;
  std::optional<UnknownOutcome> unknown;

  bool soluble() const { return kind == Kind::soluble; }
  bool insoluble() const { return kind == Kind::insoluble; }
};

struct ZpOptions {
  long max_level = 26;  // 2 * (1 + alpha budget), default alpha budget 12
  std::size_t frontier_cap = 1000000;   // solutions stored per level
  std::uint64_t work_cap = 50000000;    // total candidate points evaluated
  // Density mode: only certificates valid for the entire residue class mod
  // p^max_level are admitted; exact integer zeros must convert to Hensel
  // certificates (2*alpha+1 <= max_level) or are ignored.
  bool class_stable = false;
  bool strip_content = true;
  std::size_t exact_zero_scan = 4096;  // leading frontier block checked per level
};

// Breadth-first search over primitive residue points x mod p^j with
// f_a(x) == 0 mod p^j, level-synchronous, j = 1..max_level. At each
// solution the gradient valuation alpha is recomputed (residues mod p^j, so
// values >= j are not yet certifiable); j >= 2*alpha+1 certifies a Z_p zero.
// An empty level is conclusive insolubility: any nontrivial Z_p zero scales
// to a primitive one, which would reduce to a solution at every level.
SolubilityVerdict zp_solubility(const VeroneseBasis& basis, std::span<const Int> a, long p,
                                const ZpOptions& opt = {});

// p^{-2*alpha}: coefficient perturbations within this radius (that is,
// a' == a mod p^{2*alpha+1}) preserve the certificate.
Rat stability_radius(const HenselCertificate& cert);

// True iff the reduction mod p has no nonzero singular zero (f == 0 and
// grad f == 0 simultaneously). Scans p^n points; nullopt if that exceeds
// the budget.
std::optional<bool> smooth_reduction(const VeroneseBasis& basis, std::span<const Int> a, long p,
                                     std::uint64_t budget = 20000000);

// Plane-curve point guarantee: n = 3 only. True iff (p+1)^2 > 4 g^2 p with
// g = (d-1)(d-2)/2, in which case a smooth degree-d plane curve over F_p
// has a rational point; combined with smooth_reduction it certifies a
// soluble reduction with alpha = 0.
bool hasse_weil_guarantee(int n, int d, long p);

// Exact classification of binary quadratics a1 x^2 + a2 xy + a3 y^2 at one
// place: prime p, or the real place when place is empty. Soluble iff a1 = 0
// or the discriminant a2^2 - 4 a1 a3 is zero, a square in Q_p, resp. >= 0.
bool binary_quadratic_oracle(std::span<const Int> a, std::optional<long> place);

}  // namespace solcensus
