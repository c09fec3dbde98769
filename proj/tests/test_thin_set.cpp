#include "solcensus/thin_set.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "solcensus/numeric.hpp"

using namespace solcensus;

namespace {

std::vector<Int> zi(std::initializer_list<long> v) { return std::vector<Int>(v.begin(), v.end()); }

ThinFormP det_surface() { return parse_thin_form("1 1 1 0 0\n-1 0 0 1 1"); }

ThinFormP monic_sixfold() {
  return parse_thin_form("1 1 1 0 0 0 0\n-1 0 0 1 1 0 0\n1 0 0 0 0 2 0\n-1 0 0 0 0 0 2");
}

// Direct odometer oracle: no congruence alignment tricks, no fiber solving.
Int brute_count(const ThinFormP& P, long A, const BoxSpec& box, const CongruenceSpec& cong,
                bool primitive) {
  std::vector<long> lo(P.N), hi(P.N);
  for (int i = 0; i < P.N; ++i) {
    const auto& [l, h] = box.intervals[i];
    double lv = A * l.get_d(), hv = A * h.get_d();
    lo[i] = static_cast<long>(std::ceil(lv - 1e-9));
    hi[i] = static_cast<long>(std::floor(hv + 1e-9));
  }
  const long B = cong.modulus.get_si();
  std::vector<Int> a(P.N);
  Int n = 0;
  std::vector<long> cur(lo);
  for (;;) {
    bool ok = true;
    for (int i = 0; i < P.N && ok; ++i)
      ok = ((cur[i] - cong.residue[i].get_si()) % B + B) % B == 0;
    if (ok) {
      for (int i = 0; i < P.N; ++i) a[i] = cur[i];
      if (evaluate_thin(P, a) == 0 && (!primitive || vector_content(a) == 1)) ++n;
    }
    int d = P.N - 1;
    while (d >= 0 && cur[d] == hi[d]) cur[d] = lo[d], --d;
    if (d < 0) break;
    ++cur[d];
  }
  return n;
}

Int brute_count(const ThinFormP& P, long A, bool primitive = false) {
  return brute_count(P, A, BoxSpec::full(P.N), CongruenceSpec::none(P.N), primitive);
}

}  // namespace

TEST_CASE("thin_set: form parsing and validation") {
  auto P = det_surface();
  CHECK(P.N == 4);
  CHECK(P.k == 2);
  CHECK(P.terms.size() == 2);
  CHECK(!P.diagonal);
  CHECK(P.solvable_last);
  CHECK(evaluate_thin(P, zi({2, 3, 1, 6})) == 0);
  CHECK(evaluate_thin(P, zi({2, 3, 1, 5})) == 1);

  auto D = parse_thin_form("# diagonal quartic\n1 4 0\n-3 0 4");
  CHECK(D.diagonal);
  CHECK(D.k == 4);
  CHECK(!D.solvable_last);

  auto M = monic_sixfold();
  CHECK(M.N == 6);
  CHECK(M.solvable_last);

  // duplicate rows merge, cancellation to zero is rejected
  auto merged = make_thin_form(2, {{{1, 1}, 2}, {{1, 1}, 3}, {{2, 0}, 1}});
  CHECK(merged.terms.size() == 2);
  CHECK_THROWS_AS(make_thin_form(2, {{{1, 1}, 2}, {{1, 1}, -2}}), std::invalid_argument);
  CHECK_THROWS_AS(make_thin_form(2, {{{1, 1}, 1}, {{2, 1}, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(make_thin_form(2, {{{1, 0}, 1}, {{0, 1}, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(make_thin_form(2, {{{1, -1}, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(make_thin_form(3, {{{1, 1}, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(parse_thin_form(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_thin_form("1 1 1\n1 1 1 1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_thin_form("x 1 1"), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_thin(P, zi({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("thin_set: frozen lattice counts on the determinant surface") {
  auto P = det_surface();
  for (auto strat : {ThinStrategy::full_scan, ThinStrategy::solve_last}) {
    ThinOptions o;
    o.strategy = strat;
    CHECK(count_thin(P, 1, o) == 33);
    CHECK(count_thin(P, 2, o) == 129);
    o.primitive_only = true;
    CHECK(count_thin(P, 1, o) == 32);
    CHECK(count_thin(P, 2, o) == 96);
  }
}

TEST_CASE("thin_set: scan strategies agree") {
  auto P = det_surface();
  ThinOptions full, solve;
  solve.strategy = ThinStrategy::solve_last;
  for (long A : {1L, 2L, 4L, 8L}) CHECK(count_thin(P, A, full) == count_thin(P, A, solve));
  for (long A : {1L, 4L}) {
    auto a = collect_thin(P, A, BoxSpec::full(4), CongruenceSpec::none(4), full);
    auto b = collect_thin(P, A, BoxSpec::full(4), CongruenceSpec::none(4), solve);
    CHECK(a == b);
  }

  auto M = monic_sixfold();
  for (long A : {1L, 2L}) {
    auto a = collect_thin(M, A, BoxSpec::full(6), CongruenceSpec::none(6), full);
    auto b = collect_thin(M, A, BoxSpec::full(6), CongruenceSpec::none(6), solve);
    CHECK(a == b);
  }

  CongruenceSpec odd;
  odd.modulus = 2;
  odd.residue = zi({1, 1, 1, 1});
  BoxSpec half = BoxSpec::full(4);
  half.intervals[0] = {Rat(0), Rat(1)};
  half.intervals[2] = {Rat(-1), Rat(1, 2)};
  for (long A : {3L, 6L}) {
    auto a = collect_thin(P, A, half, odd, full);
    auto b = collect_thin(P, A, half, odd, solve);
    CHECK(a == b);
    CHECK(Int(a.size()) == brute_count(P, A, half, odd, false));
  }
}

TEST_CASE("thin_set: emitted vectors satisfy every constraint") {
  auto P = det_surface();
  BoxSpec box = BoxSpec::full(4);
  box.intervals[1] = {Rat(-1, 2), Rat(1)};
  CongruenceSpec cong;
  cong.modulus = 3;
  cong.residue = zi({0, 2, 1, 0});
  for (auto strat : {ThinStrategy::full_scan, ThinStrategy::solve_last}) {
    ThinOptions o;
    o.strategy = strat;
    auto pts = collect_thin(P, 7, box, cong, o);
    CHECK(!pts.empty());
    for (const auto& a : pts) {
      CHECK(evaluate_thin(P, a) == 0);
      CHECK(a[0] >= -7);
      CHECK(a[0] <= 7);
      CHECK(a[1] >= -3);  // ceil(7 * -1/2)
      CHECK(a[1] <= 7);
      for (int i = 0; i < 4; ++i) {
        Int r = a[i] - cong.residue[i];
        CHECK(r % 3 == 0);
      }
    }
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i - 1] < pts[i]);
    CHECK(Int(pts.size()) == brute_count(P, 7, box, cong, false));
  }

  // raw scans include the zero vector, primitive scans never do
  ThinOptions o;
  auto raw = collect_thin(P, 2, BoxSpec::full(4), CongruenceSpec::none(4), o);
  CHECK(std::count(raw.begin(), raw.end(), zi({0, 0, 0, 0})) == 1);
  o.primitive_only = true;
  auto prim = collect_thin(P, 2, BoxSpec::full(4), CongruenceSpec::none(4), o);
  CHECK(std::count(prim.begin(), prim.end(), zi({0, 0, 0, 0})) == 0);
  for (const auto& a : prim) CHECK(vector_content(a) == 1);
  CHECK(std::count(prim.begin(), prim.end(), zi({-2, 1, -1, 2})) == 1);
}

TEST_CASE("thin_set: moebius inclusion-exclusion matches the direct primitive filter") {
  auto P = det_surface();
  for (long A : {1L, 2L, 3L, 4L, 5L, 6L}) {
    std::map<long, Int> raw;
    for (long e = 1; e <= A; ++e) raw[e] = brute_count(P, A / e, false);
    CHECK(moebius_primitive_count(raw) == brute_count(P, A, true));
  }
  CHECK(moebius_primitive_count({{1, Int(129)}, {2, Int(33)}}) == 96);
  CHECK(moebius_primitive_count({{1, Int(33)}}) == 32);
  // counts that already exclude the zero vector skip the correction
  CHECK(moebius_primitive_count({{1, Int(128)}, {2, Int(32)}}, false) == 96);
  CHECK_THROWS_AS(moebius_primitive_count({}), std::invalid_argument);
  CHECK_THROWS_AS(moebius_primitive_count({{1, Int(5)}, {3, Int(1)}}), std::invalid_argument);
  CHECK_THROWS_AS(moebius_primitive_count({{0, Int(5)}}), std::invalid_argument);
}

TEST_CASE("thin_set: growth exponents track the lattice point counts") {
  auto P = det_surface();
  std::vector<Int> As{Int(4), Int(8), Int(16)};
  auto rows = growth_diagnostic(P, As);
  REQUIRE(rows.size() == 3);
  CHECK(!rows[0].exponent.has_value());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].A == As[i]);
    CHECK(rows[i].count == brute_count(P, As[i].get_si(), false));
    if (i > 0) {
      REQUIRE(rows[i].exponent.has_value());
      CHECK(*rows[i].exponent > 1.2);
      CHECK(*rows[i].exponent < 2.8);
    }
  }

  ThinOptions solve;
  solve.strategy = ThinStrategy::solve_last;
  std::vector<Int> As6{Int(2), Int(4), Int(8)};
  auto rows6 = growth_diagnostic(monic_sixfold(), As6, solve);
  for (std::size_t i = 1; i < rows6.size(); ++i) {
    REQUIRE(rows6[i].exponent.has_value());
    CHECK(*rows6[i].exponent > 2.0);
    CHECK(*rows6[i].exponent < 5.5);
  }

  auto one = growth_diagnostic(P, std::vector<Int>{Int(3)});
  REQUIRE(one.size() == 1);
  CHECK(!one[0].exponent.has_value());

  // a pointless surface keeps the ratio undefined at every step
  auto D = parse_thin_form("1 2 0\n1 0 2");
  ThinOptions prim;
  prim.primitive_only = true;
  auto empty_rows = growth_diagnostic(D, As, prim);
  for (const auto& r : empty_rows) {
    CHECK(r.count == 0);
    CHECK(!r.exponent.has_value());
  }
  CHECK_THROWS_AS(growth_diagnostic(P, std::vector<Int>{}), std::invalid_argument);
}

TEST_CASE("thin_set: congruence slices match the filtered count") {
  auto P = det_surface();
  const long A = 12, Q = 3;
  std::vector<Int> c = zi({3, 1, 2, 3});
  auto slice = congruence_bound_check(P, A, Q, c);
  CongruenceSpec cong;
  cong.modulus = Q;
  cong.residue = zi({0, 1, 2, 0});
  CHECK(slice.count == brute_count(P, A, BoxSpec::full(4), cong, false));
  const double expected = slice.count.get_d() / ((A / double(Q)) * (A / double(Q)));
  CHECK(slice.normalized_ratio == doctest::Approx(expected).epsilon(1e-12));

  // Q = 1 collapses to the raw count scaled by A^(N-k)
  auto whole = congruence_bound_check(P, 2, 1, zi({1, 1, 1, 1}));
  CHECK(whole.count == 129);
  CHECK(whole.normalized_ratio == doctest::Approx(129.0 / 4.0).epsilon(1e-12));

  // all-odd forces P even but nonzero residues can still miss the surface
  auto miss = congruence_bound_check(P, 8, 2, zi({1, 1, 2, 2}));
  CHECK(miss.count == 0);

  CHECK_THROWS_AS(congruence_bound_check(P, 16, 32, zi({1, 1, 1, 1})), std::invalid_argument);
  CHECK_THROWS_AS(congruence_bound_check(P, 12, 3, zi({0, 1, 1, 1})), std::invalid_argument);
  CHECK_THROWS_AS(congruence_bound_check(P, 12, 3, zi({1, 1, 4, 1})), std::invalid_argument);
  CHECK_THROWS_AS(congruence_bound_check(P, 12, 3, zi({1, 1, 1})), std::invalid_argument);
  CHECK_THROWS_AS(congruence_bound_check(P, 12, 3, zi({1, 1, 1, 1}), {}, 5), std::invalid_argument);
}

TEST_CASE("thin_set: fiber sampling lands on the surface") {
  auto P = det_surface();
  auto s = sample_thin(P, 100, 400, 42);
  CHECK(s.complete);
  CHECK(s.points.size() == 400);
  CHECK(s.attempts >= 400);
  CHECK(s.law == "fiber-uniform");
  bool nonzero = false;
  for (const auto& a : s.points) {
    CHECK(evaluate_thin(P, a) == 0);
    for (const auto& x : a) {
      CHECK(x >= -100);
      CHECK(x <= 100);
      if (x != 0) nonzero = true;
    }
  }
  CHECK(nonzero);

  auto again = sample_thin(P, 100, 400, 42);
  CHECK(again.points == s.points);
  auto other = sample_thin(P, 100, 400, 43);
  CHECK(other.points != s.points);

  auto none = sample_thin(P, 100, 0, 7);
  CHECK(none.complete);
  CHECK(none.points.empty());
  CHECK(none.attempts == 0);

  auto M = monic_sixfold();
  auto sm = sample_thin(M, 50, 100, 9);
  CHECK(sm.complete);
  for (const auto& a : sm.points) CHECK(evaluate_thin(M, a) == 0);

  auto bad = make_thin_form(3, {{{3, 0, 0}, 2}, {{1, 1, 1}, 3}});
  CHECK(!bad.solvable_last);
  CHECK_THROWS_AS(sample_thin(bad, 10, 5, 1), std::invalid_argument);
}

TEST_CASE("thin_set: counts respect the sign and swap symmetries") {
  auto P = det_surface();
  BoxSpec posbox = BoxSpec::full(4), negbox = BoxSpec::full(4);
  for (auto& iv : posbox.intervals) iv = {Rat(0), Rat(1)};
  for (auto& iv : negbox.intervals) iv = {Rat(-1), Rat(0)};
  ThinOptions o;
  const auto cong = CongruenceSpec::none(4);
  CHECK(count_thin(P, 9, posbox, cong, o) == count_thin(P, 9, negbox, cong, o));

  // swapping (t1,t2) with (t3,t4) negates P, so restricted counts match
  BoxSpec first = BoxSpec::full(4), third = BoxSpec::full(4);
  first.intervals[0] = {Rat(1, 3), Rat(1)};
  third.intervals[2] = {Rat(1, 3), Rat(1)};
  CHECK(count_thin(P, 9, first, cong, o) == count_thin(P, 9, third, cong, o));
}

TEST_CASE("thin_set: worker count never changes the stream") {
  auto P = det_surface();
  BoxSpec box = BoxSpec::full(4);
  box.intervals[3] = {Rat(-1, 2), Rat(1)};
  CongruenceSpec cong;
  cong.modulus = 2;
  cong.residue = zi({0, 1, 0, 1});
  for (auto strat : {ThinStrategy::full_scan, ThinStrategy::solve_last}) {
    ThinOptions o1, o2, o3;
    o1.strategy = o2.strategy = o3.strategy = strat;
    o1.jobs = 1, o2.jobs = 2, o3.jobs = 3;
    auto a = collect_thin(P, 6, box, cong, o1);
    auto b = collect_thin(P, 6, box, cong, o2);
    auto c = collect_thin(P, 6, box, cong, o3);
    CHECK(!a.empty());
    CHECK(a == b);
    CHECK(a == c);
  }
}

TEST_CASE("thin_set: huge coefficients fall back to exact arithmetic") {
  Int big = 1;
  for (int i = 0; i < 20; ++i) big *= 10;
  auto P = make_thin_form(4, {{{1, 1, 0, 0}, big}, {{0, 0, 1, 1}, -big}});
  for (auto strat : {ThinStrategy::full_scan, ThinStrategy::solve_last}) {
    ThinOptions o;
    o.strategy = strat;
    CHECK(count_thin(P, 2, o) == 129);
    o.primitive_only = true;
    CHECK(count_thin(P, 2, o) == 96);
  }

  // monic fiber solving with an oversized linear coefficient stays exact
  auto M = make_thin_form(2, {{{2, 1}, big}, {{0, 3}, 1}});
  ThinOptions o;
  o.strategy = ThinStrategy::solve_last;
  auto pts = collect_thin(M, 1, BoxSpec::full(2), CongruenceSpec::none(2), o);
  ThinOptions full;
  CHECK(pts == collect_thin(M, 1, BoxSpec::full(2), CongruenceSpec::none(2), full));
  for (const auto& a : pts) CHECK(evaluate_thin(M, a) == 0);
}

TEST_CASE("thin_set: enumeration rejects malformed requests") {
  auto P = det_surface();
  ThinOptions o;
  auto emit = [](std::span<const Int>) {};
  CHECK_THROWS_AS(enumerate_thin(P, 0, BoxSpec::full(4), CongruenceSpec::none(4), o, emit),
                  std::invalid_argument);
  CHECK_THROWS_AS(enumerate_thin(P, 4, BoxSpec::full(3), CongruenceSpec::none(4), o, emit),
                  std::invalid_argument);
  CHECK_THROWS_AS(enumerate_thin(P, 4, BoxSpec::full(4), CongruenceSpec::none(3), o, emit),
                  std::invalid_argument);
  BoxSpec wide = BoxSpec::full(4);
  wide.intervals[2] = {Rat(-2), Rat(1)};
  CHECK_THROWS_AS(enumerate_thin(P, 4, wide, CongruenceSpec::none(4), o, emit),
                  std::invalid_argument);
  BoxSpec flipped = BoxSpec::full(4);
  flipped.intervals[1] = {Rat(1, 2), Rat(1, 2)};
  CHECK_THROWS_AS(enumerate_thin(P, 4, flipped, CongruenceSpec::none(4), o, emit),
                  std::invalid_argument);
  CongruenceSpec bad;
  bad.modulus = 4;
  bad.residue = zi({0, 1, 4, 2});
  CHECK_THROWS_AS(enumerate_thin(P, 4, BoxSpec::full(4), bad, o, emit), std::invalid_argument);
  bad.modulus = 0;
  bad.residue = zi({0, 0, 0, 0});
  CHECK_THROWS_AS(enumerate_thin(P, 4, BoxSpec::full(4), bad, o, emit), std::invalid_argument);

  auto D = parse_thin_form("1 4 0\n-3 0 4");
  ThinOptions solve;
  solve.strategy = ThinStrategy::solve_last;
  CHECK_THROWS_AS(count_thin(D, 2, solve), std::invalid_argument);
}
