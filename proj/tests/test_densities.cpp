#include "solcensus/densities.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "solcensus/numeric.hpp"
#include "solcensus/rng.hpp"

using namespace solcensus;

namespace {

std::vector<Int> zi(std::initializer_list<long> v) { return std::vector<Int>(v.begin(), v.end()); }

ThinFormP det_surface() { return parse_thin_form("1 1 1 0 0\n-1 0 0 1 1"); }

ThinFormP split_sixfold() {
  return parse_thin_form("1 1 1 0 0 0 0\n-1 0 0 1 1 0 0\n1 0 0 0 0 2 0\n-1 0 0 0 0 0 2");
}

ThinFormP census_cone() {
  return make_thin_form(3, {{{2, 0, 0}, 1}, {{0, 2, 0}, 1}, {{0, 0, 2}, -2}});
}

// Odometer reference: every class mod p^r on its least representative, the
// condition applied literally, no fiber shortcuts.
Rat brute_sigma(const ThinFormP& P, long p, int r, const PadicCondition& cond) {
  Int M = 1;
  for (int i = 0; i < r; ++i) M *= p;
  Int pv = 1;
  if (cond.modulus > 1) {
    Int B = cond.modulus;
    while (B % p == 0) {
      B /= p;
      pv *= p;
    }
  }
  std::vector<Int> a(static_cast<std::size_t>(P.N), 0);
  Int count = 0;
  while (true) {
    bool ok = true;
    for (int i = 0; i < P.N && ok; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (pv > 1) {
        Int diff = ((a[ui] - cond.residue[ui]) % pv + pv) % pv;
        ok = diff == 0;
      }
      if (ok && !cond.representative_box.empty()) {
        Rat frac(a[ui], M);
        frac.canonicalize();
        ok = frac >= cond.representative_box[ui].first && frac <= cond.representative_box[ui].second;
      }
    }
    if (ok) {
      Int val = evaluate_thin(P, a);
      if (((val % M) + M) % M == 0) ++count;
    }
    int i = P.N - 1;
    while (i >= 0 && a[static_cast<std::size_t>(i)] == M - 1) {
      a[static_cast<std::size_t>(i)] = 0;
      --i;
    }
    if (i < 0) break;
    ++a[static_cast<std::size_t>(i)];
  }
  Int denom = 1;
  for (int i = 0; i < r * (P.N - 1); ++i) denom *= p;
  return Rat(count) / Rat(denom);
}

Int brute_roots(std::span<const Int> c, long p, int r) {
  Int M = 1;
  for (int i = 0; i < r; ++i) M *= p;
  Int count = 0;
  for (Int t = 0; t < M; ++t) {
    Int val = 0;
    for (std::size_t j = c.size(); j-- > 0;) val = val * t + c[j];
    if (((val % M) + M) % M == 0) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("densities: level densities of the determinant surface are exact") {
  const ThinFormP P = det_surface();
  CHECK(sigma_p_level(P, 3, 0) == Rat(1));
  // classes mod p solving xy = zw number p^3 + p^2 - p
  CHECK(sigma_p_level(P, 2, 1) == Rat(5, 4));
  CHECK(sigma_p_level(P, 3, 1) == Rat(11, 9));
  CHECK(sigma_p_level(P, 5, 1) == Rat(29, 25));
  CHECK(sigma_p_level(P, 3, 2) == Rat(35, 27));
  // the level-2 value sits within ten percent of the level-1 value
  Rat gap = sigma_p_level(P, 3, 2) - sigma_p_level(P, 3, 1);
  if (gap < 0) gap = -gap;
  CHECK(gap * 10 <= sigma_p_level(P, 3, 1));

  CHECK(sigma_p_level(split_sixfold(), 2, 1) == Rat(1));

  // x^2 y + z^3: cubing permutes residues when p = 2 mod 3, and root counts
  // still average to one class per prefix at p = 1 mod 3
  const ThinFormP C = make_thin_form(3, {{{2, 1, 0}, 1}, {{0, 0, 3}, 1}});
  CHECK(sigma_p_level(C, 5, 1) == Rat(1));
  CHECK(sigma_p_level(C, 7, 1) == Rat(1));
}

TEST_CASE("densities: congruence and box conditions slice the level count") {
  const ThinFormP P = det_surface();

  // slices over all residues mod 3 partition the unconditioned count
  for (int r = 1; r <= 2; ++r) {
    Rat sum = 0;
    std::vector<Int> r0(4);
    for (int code = 0; code < 81; ++code) {
      int rest = code;
      for (int i = 0; i < 4; ++i) {
        r0[static_cast<std::size_t>(i)] = rest % 3;
        rest /= 3;
      }
      sum += sigma_p_level(P, 3, r, PadicCondition::congruence(3, r0));
    }
    CHECK(sum == sigma_p_level(P, 3, r));
  }

  CHECK(sigma_p_level(P, 3, 1, PadicCondition::congruence(3, zi({1, 1, 1, 1}))) == Rat(1, 27));
  CHECK(sigma_p_level(P, 3, 2, PadicCondition::congruence(3, zi({1, 1, 1, 1}))) == Rat(1, 27));
  CHECK(sigma_p_level(P, 3, 2, PadicCondition::congruence(9, zi({1, 1, 1, 1}))) == Rat(1, 729));
  // only the p-part of the condition modulus binds
  CHECK(sigma_p_level(P, 3, 1, PadicCondition::congruence(6, zi({1, 1, 1, 1}))) ==
        sigma_p_level(P, 3, 1, PadicCondition::congruence(3, zi({1, 1, 1, 1}))));
  // residues reduce modulo the p-part
  CHECK(sigma_p_level(P, 3, 1, PadicCondition::congruence(3, zi({4, 4, 4, 4}))) == Rat(1, 27));

  // representative boxes against the odometer reference
  auto box1 = PadicCondition::box({{Rat(0), Rat(1, 3)},
                                   {Rat(1, 3), Rat(1)},
                                   {Rat(0), Rat(1)},
                                   {Rat(0), Rat(2, 3)}});
  CHECK(sigma_p_level(P, 3, 1, box1) == brute_sigma(P, 3, 1, box1));
  CHECK(sigma_p_level(P, 3, 2, box1) == brute_sigma(P, 3, 2, box1));
  auto box2 = PadicCondition::box({{Rat(0), Rat(1, 2)},
                                   {Rat(0), Rat(1)},
                                   {Rat(1, 4), Rat(3, 4)},
                                   {Rat(0), Rat(1)}});
  CHECK(sigma_p_level(P, 2, 3, box2) == brute_sigma(P, 2, 3, box2));

  // congruence and box combined
  PadicCondition mixed = PadicCondition::congruence(2, zi({1, 0, 1, 0}));
  mixed.representative_box = {{Rat(0), Rat(3, 4)}, {Rat(0), Rat(1)}, {Rat(0), Rat(1)}, {Rat(0), Rat(1)}};
  CHECK(sigma_p_level(P, 2, 3, mixed) == brute_sigma(P, 2, 3, mixed));

  const ThinFormP Q = census_cone();
  auto box3 = PadicCondition::box({{Rat(0), Rat(2, 5)}, {Rat(1, 5), Rat(1)}, {Rat(0), Rat(4, 5)}});
  CHECK(sigma_p_level(Q, 5, 2, box3) == brute_sigma(Q, 5, 2, box3));

  // a box too narrow to catch any representative gives an exact zero
  auto narrow = PadicCondition::box({{Rat(1, 100), Rat(2, 100)},
                                     {Rat(0), Rat(1)},
                                     {Rat(0), Rat(1)},
                                     {Rat(0), Rat(1)}});
  CHECK(sigma_p_level(P, 3, 2, narrow) == Rat(0));

  // direct enumeration and the parallel merge agree
  SigmaPOptions par;
  par.jobs = 3;
  CHECK(sigma_p_level(P, 3, 2, PadicCondition::all(), par) == Rat(35, 27));
}

TEST_CASE("densities: conditioned level densities validate their inputs") {
  const ThinFormP P = det_surface();
  CHECK_THROWS_AS(sigma_p_level(P, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(sigma_p_level(P, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sigma_p_level(P, 3, -1), std::invalid_argument);
  CHECK_THROWS_AS(sigma_p_level(P, 3, 50), std::runtime_error);
  CHECK_THROWS_AS(sigma_p_level(P, 3, 1, PadicCondition::congruence(9, zi({0, 0, 0, 0}))),
                  std::invalid_argument);
  CHECK_THROWS_AS(sigma_p_level(P, 3, 1, PadicCondition::congruence(3, zi({0, 0}))),
                  std::invalid_argument);
  CHECK_THROWS_AS(sigma_p_level(P, 3, 1, PadicCondition::congruence(0, zi({0, 0, 0, 0}))),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      sigma_p_level(P, 3, 1, PadicCondition::box({{Rat(0), Rat(1)}, {Rat(0), Rat(1)}})),
      std::invalid_argument);
  CHECK_THROWS_AS(sigma_p_level(P, 3, 1,
                                PadicCondition::box({{Rat(-1, 2), Rat(1, 2)},
                                                     {Rat(0), Rat(1)},
                                                     {Rat(0), Rat(1)},
                                                     {Rat(0), Rat(1)}})),
                  std::invalid_argument);
  CHECK_THROWS_AS(sigma_p_level(P, 3, 1,
                                PadicCondition::box({{Rat(1, 2), Rat(1, 2)},
                                                     {Rat(0), Rat(1)},
                                                     {Rat(0), Rat(1)},
                                                     {Rat(0), Rat(1)}})),
                  std::invalid_argument);

  // class budgets: conditioned or non-solvable overflows have no fallback
  SigmaPOptions tiny;
  tiny.max_classes = 100;
  CHECK_THROWS_AS(sigma_p_level(P, 5, 2, PadicCondition::congruence(5, zi({0, 0, 0, 0})), tiny),
                  std::runtime_error);
  const ThinFormP bad = make_thin_form(3, {{{3, 0, 0}, 2}, {{1, 1, 1}, 3}});
  SigmaPOptions small;
  small.max_classes = 1000;
  CHECK_THROWS_AS(sigma_p_level(bad, 7, 2, PadicCondition::all(), small), std::runtime_error);
  // fiber fallback disabled, or its own prefix budget exceeded
  SigmaPOptions nofiber = tiny;
  nofiber.allow_fiber = false;
  CHECK_THROWS_AS(sigma_p_level(P, 5, 2, PadicCondition::all(), nofiber), std::runtime_error);
  CHECK_THROWS_AS(sigma_p_level(P, 3, 2, PadicCondition::all(), tiny), std::runtime_error);
}

TEST_CASE("densities: fiber root counting matches direct enumeration") {
  const ThinFormP P = det_surface();
  SigmaPOptions fiber;
  fiber.max_classes = 50;
  CHECK(sigma_p_level(P, 3, 1, PadicCondition::all(), fiber) == Rat(11, 9));
  fiber.max_classes = 1000;
  CHECK(sigma_p_level(P, 3, 2, PadicCondition::all(), fiber) == Rat(35, 27));
  fiber.max_classes = 20000;
  CHECK(sigma_p_level(P, 5, 2, PadicCondition::all(), fiber) == sigma_p_level(P, 5, 2));
  fiber.jobs = 2;
  CHECK(sigma_p_level(P, 5, 2, PadicCondition::all(), fiber) == sigma_p_level(P, 5, 2));

  SigmaPOptions f6;
  f6.max_classes = 2000;
  CHECK(sigma_p_level(split_sixfold(), 2, 2, PadicCondition::all(), f6) ==
        sigma_p_level(split_sixfold(), 2, 2));

  // cubic monic tail variable
  const ThinFormP C = make_thin_form(3, {{{2, 1, 0}, 1}, {{0, 0, 3}, 1}});
  SigmaPOptions fc;
  fc.max_classes = 30;
  CHECK(sigma_p_level(C, 5, 1, PadicCondition::all(), fc) == Rat(1));
  fc.max_classes = 60;
  CHECK(sigma_p_level(C, 7, 1, PadicCondition::all(), fc) == Rat(1));
}

TEST_CASE("densities: root counts modulo prime powers lift correctly") {
  CHECK(count_poly_roots_mod(zi({0, 0, 1}), 3, 2) == 3);
  CHECK(count_poly_roots_mod(zi({-1, 0, 1}), 2, 3) == 4);
  CHECK(count_poly_roots_mod(zi({0, 0, 0, 1}), 2, 3) == 4);
  CHECK(count_poly_roots_mod(zi({1, 0, 1}), 2, 2) == 0);
  CHECK(count_poly_roots_mod(zi({0, 3}), 3, 2) == 3);
  CHECK(count_poly_roots_mod(zi({0}), 3, 2) == 9);
  CHECK(count_poly_roots_mod(std::vector<Int>{}, 5, 3) == 125);
  CHECK(count_poly_roots_mod(zi({7}), 7, 2) == 0);
  CHECK(count_poly_roots_mod(zi({0, 1}), 5, 0) == 1);
  CHECK_THROWS_AS(count_poly_roots_mod(zi({0, 1}), 6, 1), std::invalid_argument);
  CHECK_THROWS_AS(count_poly_roots_mod(zi({0, 1}), 5, -1), std::invalid_argument);

  Rng rng(2026);
  std::vector<Int> c(4);
  for (int trial = 0; trial < 40; ++trial) {
    for (auto& x : c) x = rng.next_int(-10, 10);
    for (long p : {2L, 3L, 5L})
      for (int r = 1; r <= 4; ++r)
        CHECK(count_poly_roots_mod(c, p, r) == brute_roots(c, p, r));
  }
}

TEST_CASE("densities: residue class certification") {
  const VeroneseBasis b22 = veronese_basis(2, 2);
  const VeroneseBasis b32 = veronese_basis(3, 2);

  // x^2 - 17 y^2 over Z_2: soluble with alpha = 1, so level 5 certifies the
  // class while level 2 cannot reach 2 alpha + 1
  CHECK(classify_residue_class(b32, zi({1, 0, 0, 1, 0, 1}), 2, 3) == ClassStatus::certified_out);
  CHECK(classify_residue_class(b32, zi({1, 0, 0, 1, 0, 1}), 2, 5) == ClassStatus::certified_out);
  CHECK(classify_residue_class(b32, zi({1, 0, 0, 1, 0, 1}), 2, 2) == ClassStatus::unknown);
  CHECK(classify_residue_class(b22, zi({1, 0, -17}), 2, 5) == ClassStatus::certified_in);
  CHECK(classify_residue_class(b22, zi({1, 0, -17}), 2, 2) == ClassStatus::unknown);

  // the zero class certifies nothing at any level
  CHECK(classify_residue_class(b22, zi({0, 0, 0}), 2, 3) == ClassStatus::unknown);
  CHECK(classify_residue_class(b22, zi({8, 0, 8}), 2, 3) == ClassStatus::unknown);

  CHECK(classify_residue_class(b22, zi({1, 0, -1}), 3, 1) == ClassStatus::certified_in);

  CHECK_THROWS_AS(classify_residue_class(b22, zi({1, 0, -17}), 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(classify_residue_class(b22, zi({1, 0}), 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(classify_residue_class(b22, zi({1, 0, -17}), 6, 2), std::invalid_argument);
}

TEST_CASE("densities: certified density brackets tighten with the level") {
  const ThinFormP P = det_surface();
  const VeroneseBasis b23 = veronese_basis(2, 3);

  auto r1 = sigma_p_Tp(P, b23, 2, 1);
  CHECK(r1.lower == Rat(3, 4));
  CHECK(r1.upper == Rat(5, 4));
  CHECK(r1.samples == 10);
  CHECK(r1.level == 1);
  CHECK(r1.method == DensityMethod::certified_interval);
  auto r2 = sigma_p_Tp(P, b23, 2, 2);
  CHECK(r2.lower == Rat(3, 4));
  CHECK(r2.upper == Rat(11, 8));
  CHECK(r2.samples == 88);
  auto r3 = sigma_p_Tp(P, b23, 2, 3);
  CHECK(r3.lower == Rat(17, 16));
  CHECK(r3.upper == Rat(21, 16));
  CHECK(r3.samples == 736);

  // certified-in and certified-out masses only grow with the level
  CHECK(r1.lower <= r2.lower);
  CHECK(r2.lower <= r3.lower);
  Rat out1 = sigma_p_level(P, 2, 1) - r1.upper;
  Rat out2 = sigma_p_level(P, 2, 2) - r2.upper;
  Rat out3 = sigma_p_level(P, 2, 3) - r3.upper;
  CHECK(out1 >= 0);
  CHECK(out2 >= out1);
  CHECK(out3 >= out2);

  for (int r = 1; r <= 2; ++r) {
    auto iv = sigma_p_Tp(P, b23, 3, r);
    CHECK(iv.lower >= 0);
    CHECK(iv.lower <= iv.upper);
    CHECK(iv.upper <= sigma_p_level(P, 3, r));
  }
  CHECK(sigma_p_Tp(P, b23, 3, 1).samples == 33);

  // a starved solver keeps the cheap level-1 certificates and nothing more,
  // so its bracket can only be looser than the default one
  ZpOptions starved;
  starved.work_cap = 1;
  starved.frontier_cap = 1;
  starved.exact_zero_scan = 0;
  auto loose = sigma_p_Tp(P, b23, 2, 2, starved);
  CHECK(loose.lower == Rat(3, 8));
  CHECK(loose.upper == Rat(11, 8));
  CHECK(loose.lower <= r2.lower);
  CHECK(loose.upper >= r2.upper);

  CHECK_THROWS_AS(sigma_p_Tp(P, b23, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(sigma_p_Tp(P, veronese_basis(2, 2), 2, 1), std::invalid_argument);
  SigmaPOptions tiny;
  tiny.max_classes = 100;
  CHECK_THROWS_AS(sigma_p_Tp(P, b23, 3, 2, ZpOptions{}, tiny), std::runtime_error);
}

TEST_CASE("densities: slab volume estimates are deterministic") {
  const ThinFormP P = det_surface();

  // interval bound certifies an empty slab exactly
  const ThinFormP S = make_thin_form(
      4, {{{2, 0, 0, 0}, 1}, {{0, 2, 0, 0}, 1}, {{0, 0, 2, 0}, 1}, {{0, 0, 0, 2}, 1}});
  BoxSpec off;
  off.intervals = {{Rat(1, 2), Rat(1)}, {Rat(1, 2), Rat(1)}, {Rat(1, 2), Rat(1)}, {Rat(1, 2), Rat(1)}};
  SigmaInftyOptions zo;
  zo.samples = 1000;
  zo.seed = 3;
  auto zero = sigma_infty(S, off, zo);
  CHECK(zero.method == DensityMethod::exact_count);
  CHECK(zero.lower == Rat(0));
  CHECK(zero.upper == Rat(0));
  CHECK(zero.samples == 0);
  CHECK(zero.consistent);

  SigmaInftyOptions mc;
  mc.samples = 25000;
  mc.seed = 7;
  auto est = sigma_infty(P, BoxSpec::full(4), mc);
  CHECK(est.method == DensityMethod::monte_carlo);
  CHECK(est.eta == doctest::Approx(0.025));
  CHECK(est.samples == 25000);
  CHECK(est.lower == est.upper);
  CHECK(est.stderr_value > 0.0);
  // at this sample count the eta drift stays inside the error bars
  CHECK(est.consistent);
  CHECK(est.lower.get_d() > 14.0);
  CHECK(est.lower.get_d() < 17.2);

  // bit-identical reruns, and the chunked reduction is jobs-invariant
  auto again = sigma_infty(P, BoxSpec::full(4), mc);
  CHECK(again.lower == est.lower);
  CHECK(again.upper == est.upper);
  CHECK(again.stderr_value == est.stderr_value);
  CHECK(again.consistent == est.consistent);
  for (int jobs : {2, 3}) {
    SigmaInftyOptions pj = mc;
    pj.jobs = jobs;
    auto par = sigma_infty(P, BoxSpec::full(4), pj);
    CHECK(par.lower == est.lower);
    CHECK(par.upper == est.upper);
    CHECK(par.stderr_value == est.stderr_value);
  }

  // a different seed moves the estimate
  SigmaInftyOptions other = mc;
  other.seed = 8;
  CHECK(sigma_infty(P, BoxSpec::full(4), other).lower != est.lower);

  SigmaInftyOptions badsched = mc;
  badsched.eta_schedule = {0.1};
  CHECK_THROWS_AS(sigma_infty(P, BoxSpec::full(4), badsched), std::invalid_argument);
  badsched.eta_schedule = {0.05, 0.1};
  CHECK_THROWS_AS(sigma_infty(P, BoxSpec::full(4), badsched), std::invalid_argument);
  badsched.eta_schedule = {0.1, -0.05};
  CHECK_THROWS_AS(sigma_infty(P, BoxSpec::full(4), badsched), std::invalid_argument);
  SigmaInftyOptions nosamples = mc;
  nosamples.samples = 0;
  CHECK_THROWS_AS(sigma_infty(P, BoxSpec::full(4), nosamples), std::invalid_argument);
  CHECK_THROWS_AS(sigma_infty(P, BoxSpec::full(3), mc), std::invalid_argument);
  BoxSpec wide = BoxSpec::full(4);
  wide.intervals[0] = {Rat(-2), Rat(1)};
  CHECK_THROWS_AS(sigma_infty(P, wide, mc), std::invalid_argument);
  SigmaInftyOptions member = mc;
  member.membership = InftyMembership::t_infty;
  CHECK_THROWS_AS(sigma_infty(P, BoxSpec::full(4), member), std::invalid_argument);
}

TEST_CASE("densities: membership-restricted slab estimates") {
  const ThinFormP Q = census_cone();
  const VeroneseBasis b22 = veronese_basis(2, 2);

  SigmaInftyOptions mc;
  mc.samples = 20000;
  mc.seed = 11;
  auto den = sigma_infty(Q, BoxSpec::full(3), mc);
  SigmaInftyOptions tm = mc;
  tm.membership = InftyMembership::t_infty;
  auto num = sigma_infty(Q, b22, BoxSpec::full(3), tm);

  // binary quadratics get conclusive real verdicts, so the bracket is a point
  CHECK(num.lower == num.upper);
  CHECK(num.lower >= 0);
  // the same sample stream makes the restricted count dominate pointwise
  CHECK(num.upper <= den.upper);
  CHECK(num.samples == den.samples);

  auto again = sigma_infty(Q, b22, BoxSpec::full(3), tm);
  CHECK(again.lower == num.lower);
  CHECK(again.upper == num.upper);

  // membership=all through the basis overload matches the plain overload
  auto dual = sigma_infty(Q, b22, BoxSpec::full(3), mc);
  CHECK(dual.lower == den.lower);
  CHECK(dual.upper == den.upper);
}

TEST_CASE("densities: truncated solubility products") {
  const ThinFormP Q = census_cone();
  const VeroneseBasis b22 = veronese_basis(2, 2);

  CHECK_THROWS_AS(c_p_estimate(Q, b22, 5, zi({0, 0, 0})), std::invalid_argument);
  CHECK_THROWS_AS(c_p_estimate(Q, b22, 5, zi({1, 1, 0})), std::invalid_argument);
  CHECK_THROWS_AS(c_p_estimate(Q, b22, 5, zi({1, 1})), std::invalid_argument);
  CHECK_THROWS_AS(c_p_estimate(Q, b22, -1, zi({1, 1, 1})), std::invalid_argument);
  CHECK_THROWS_AS(c_p_estimate(Q, veronese_basis(2, 3), 5, zi({1, 1, 1, 1})),
                  std::invalid_argument);

  CPOptions opt;
  opt.sigma_infty.samples = 30000;
  opt.sigma_infty.eta_schedule = {0.1, 0.05};
  opt.sigma_infty.seed = 5;
  opt.deficit_samples = 40;
  auto est = c_p_estimate(Q, b22, 5, zi({1, 1, 1}), opt);
  REQUIRE(est.factors.size() == 4);
  CHECK(est.factors[0].p == 0);
  CHECK(est.factors[1].p == 2);
  CHECK(est.factors[2].p == 3);
  CHECK(est.factors[3].p == 5);
  CHECK(est.p_max == 5);
  // real numerator and denominator ride one stream: numerator never exceeds
  CHECK(est.factors[0].numerator.upper <= est.factors[0].denominator.upper);
  CHECK(est.factors[0].numerator.lower <= est.factors[0].denominator.lower);
  for (std::size_t i = 1; i < est.factors.size(); ++i) {
    const auto& f = est.factors[i];
    CHECK(f.denominator.lower == f.denominator.upper);
    CHECK(f.denominator.method == DensityMethod::exact_count);
    CHECK(f.denominator.level == 3);
    CHECK(f.numerator.lower >= 0);
    CHECK(f.numerator.lower <= f.numerator.upper);
    CHECK(f.numerator.upper <= f.denominator.upper);
    CHECK(f.denominator.lower == sigma_p_level(Q, f.p, 3));
  }
  CHECK(est.lower >= 0.0);
  CHECK(est.lower <= est.upper);
  CHECK(est.upper <= 1.0);
  REQUIRE(est.deficits.size() == 5);
  long expect[] = {7, 11, 13, 17, 19};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(est.deficits[i].p == expect[i]);
    // binary forms carry no point-count guarantee, so the tail is unquantified
    CHECK_FALSE(est.deficits[i].estimated);
    CHECK(est.deficits[i].estimated_deficit == 0.0);
  }

  auto bare = c_p_estimate(Q, b22, 0, zi({1, 1, 1}), opt);
  REQUIRE(bare.factors.size() == 1);
  CHECK(bare.factors[0].p == 0);
  REQUIRE(bare.deficits.size() == 5);
  CHECK(bare.deficits[0].p == 2);

  // ternary quadrics get sampled deficits through the point-count guarantee
  const ThinFormP P6 = split_sixfold();
  const VeroneseBasis b32 = veronese_basis(3, 2);
  CPOptions topt;
  topt.r_schedule = {1, 5, 1, 13, 1};
  topt.sigma_infty.samples = 8000;
  topt.sigma_infty.eta_schedule = {0.1, 0.05};
  topt.sigma_infty.seed = 9;
  topt.deficit_primes = 3;
  topt.deficit_samples = 30;
  auto t = c_p_estimate(P6, b32, 3, zi({1, 1, 1, 1, 1, 1}), topt);
  REQUIRE(t.factors.size() == 3);
  CHECK(t.factors[1].p == 2);
  CHECK(t.factors[2].p == 3);
  REQUIRE(t.deficits.size() == 3);
  CHECK(t.deficits[0].p == 5);
  CHECK(t.deficits[1].p == 7);
  CHECK(t.deficits[2].p == 11);
  for (const auto& d : t.deficits) {
    CHECK(d.estimated);
    CHECK(d.estimated_deficit >= 0.0);
    CHECK(d.estimated_deficit <= 1.0);
  }
  CHECK(t.lower >= 0.0);
  CHECK(t.lower <= t.upper);
  CHECK(t.upper <= 1.0);
}
