#include "solcensus/real_solver.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <vector>

#include "doctest.h"
#include "solcensus/padic.hpp"
#include "solcensus/rng.hpp"

using namespace solcensus;

namespace {

std::vector<Int> zi(std::initializer_list<long> v) { return {v.begin(), v.end()}; }

double coeff_linf(const std::vector<Int>& a) {
  double m = 0.0;
  for (const Int& v : a) m = std::max(m, std::abs(v.get_d()));
  return m;
}

// Independent recheck of the advertised witness contract: unit length and a
// residual below tol * max|a_i|.
void check_witness(const VeroneseBasis& b, const std::vector<Int>& a, const RealVerdict& v) {
  REQUIRE(v.witness.has_value());
  const RealWitness& w = *v.witness;
  REQUIRE(w.point.size() == static_cast<std::size_t>(b.n));
  double norm2 = 0.0;
  for (double x : w.point) norm2 += x * x;
  CHECK(std::abs(std::sqrt(norm2) - 1.0) < 1e-9);
  std::vector<double> ad;
  ad.reserve(a.size());
  for (const Int& c : a) ad.push_back(c.get_d());
  const double res = std::abs(evaluate_form<double>(b, std::span<const double>(ad),
                                                    std::span<const double>(w.point)));
  CHECK(res < 1e-12 * coeff_linf(a));
  CHECK(w.residual == res);
}

bool soluble_method(RealVerdict::Method m) {
  return m == RealVerdict::Method::odd_degree || m == RealVerdict::Method::exact_zero ||
         m == RealVerdict::Method::sign_change;
}

}  // namespace

TEST_CASE("real_solver: definite quadratics are insoluble") {
  const auto b2 = veronese_basis(2, 2);
  for (const auto& a : {zi({1, 0, 1}), zi({2, 0, 2}), zi({1, 1, 1}), zi({-1, 0, -1}),
                        zi({10000, -6300, 993})}) {
    const auto v = real_solubility(b2, a);
    CHECK(v.insoluble());
    CHECK(v.method == RealVerdict::Method::definiteness);
    CHECK(!v.witness.has_value());
    CHECK(t_infty_membership(b2, a).kind == v.kind);
  }
  const auto b3 = veronese_basis(3, 2);
  const auto v3 = real_solubility(b3, zi({1, 0, 0, 1, 0, 1}));  // x^2 + y^2 + z^2
  CHECK(v3.insoluble());
  CHECK(v3.method == RealVerdict::Method::definiteness);
}

TEST_CASE("real_solver: witnessed solubility for indefinite and singular quadratics") {
  const auto b2 = veronese_basis(2, 2);

  auto v = real_solubility(b2, zi({1, 0, -1}));  // x^2 - y^2, zero along (1,1)
  CHECK(v.soluble());
  check_witness(b2, zi({1, 0, -1}), v);
  CHECK(std::abs(std::abs(v.witness->point[0]) - std::abs(v.witness->point[1])) < 1e-9);

  v = real_solubility(b2, zi({1, 0, -17}));  // x^2 = 17 y^2
  CHECK(v.soluble());
  check_witness(b2, zi({1, 0, -17}), v);
  const double ratio = v.witness->point[0] / v.witness->point[1];
  CHECK(ratio * ratio == doctest::Approx(17.0).epsilon(1e-9));

  v = real_solubility(b2, zi({1, 2, 1}));  // (x + y)^2, singular semidefinite
  CHECK(v.soluble());
  check_witness(b2, zi({1, 2, 1}), v);
  CHECK(v.witness->point[0] == doctest::Approx(-v.witness->point[1]).epsilon(1e-9));

  const auto b3 = veronese_basis(3, 2);
  v = real_solubility(b3, zi({1, 0, 0, 1, 0, 0}));  // x^2 + y^2, kernel along e3
  CHECK(v.soluble());
  check_witness(b3, zi({1, 0, 0, 1, 0, 0}), v);
  CHECK(std::abs(v.witness->point[2]) == doctest::Approx(1.0).epsilon(1e-9));

  // Indefinite with both roots of f(t,1) inside (0.31, 0.32): every small
  // integer probe is positive, so the exact signature has to decide.
  v = real_solubility(b2, zi({10000, -6300, 992}));
  CHECK(v.soluble());
  check_witness(b2, zi({10000, -6300, 992}), v);
}

TEST_CASE("real_solver: odd degree always yields a witness") {
  const auto b23 = veronese_basis(2, 3);
  int seen = 0;
  std::vector<Int> a(4);
  for (long a0 = -2; a0 <= 2; ++a0)
    for (long a1 = -2; a1 <= 2; ++a1)
      for (long a2 = -2; a2 <= 2; ++a2)
        for (long a3 = -2; a3 <= 2; ++a3) {
          if (a0 == 0 && a1 == 0 && a2 == 0 && a3 == 0) continue;
          a[0] = a0;
          a[1] = a1;
          a[2] = a2;
          a[3] = a3;
          const auto v = real_solubility(b23, a);
          REQUIRE(v.soluble());
          CHECK(soluble_method(v.method));
          check_witness(b23, a, v);
          ++seen;
        }
  CHECK(seen == 624);

  const auto b33 = veronese_basis(3, 3);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Int> c(b33.size());
    bool nz = false;
    for (auto& x : c) {
      const long t = rng.next_int(-9, 9);
      x = t;
      nz = nz || t != 0;
    }
    if (!nz) continue;
    const auto v = real_solubility(b33, c);
    REQUIRE(v.soluble());
    check_witness(b33, c, v);
  }

  const auto b21 = veronese_basis(2, 1);
  CHECK(real_solubility(b21, zi({3, -7})).soluble());
  const auto b25 = veronese_basis(2, 5);
  CHECK(real_solubility(b25, zi({1, 0, 0, 0, 0, 1})).soluble());
}

TEST_CASE("real_solver: binary quadratic verdicts match the discriminant oracle") {
  const auto b2 = veronese_basis(2, 2);
  int checked = 0;
  std::vector<Int> a(3);
  for (long a1 = -10; a1 <= 10; ++a1)
    for (long a2 = -10; a2 <= 10; ++a2)
      for (long a3 = -10; a3 <= 10; ++a3) {
        if (a1 == 0 && a2 == 0 && a3 == 0) continue;
        a[0] = a1;
        a[1] = a2;
        a[2] = a3;
        const auto v = real_solubility(b2, a);
        REQUIRE(v.kind != RealVerdict::Kind::unknown);
        const bool expected = binary_quadratic_oracle(a, std::nullopt);
        CHECK(v.soluble() == expected);
        if (v.soluble()) {
          check_witness(b2, a, v);
        } else {
          CHECK(v.method == RealVerdict::Method::definiteness);
          CHECK(!v.witness.has_value());
        }
        ++checked;
      }
  CHECK(checked == 9260);
}

TEST_CASE("real_solver: binary quartic verdicts match exact root counting") {
  const auto b = veronese_basis(2, 4);
  Rng rng(0xbead5);
  int soluble_count = 0, insoluble_count = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<Int> a(5);
    bool nz = false;
    for (auto& c : a) {
      const long t = rng.next_int(-20, 20);
      c = t;
      nz = nz || t != 0;
    }
    if (!nz) continue;
    const auto v = real_solubility(b, a);
    REQUIRE(v.kind != RealVerdict::Kind::unknown);
    bool expected;
    if (a[0] == 0) {
      expected = true;  // (1, 0) is a zero
    } else {
      std::vector<Rat> g(5);
      for (int m = 0; m <= 4; ++m) g[static_cast<std::size_t>(m)] = Rat(a[static_cast<std::size_t>(4 - m)]);
      expected = count_distinct_real_roots(g) > 0;
    }
    CHECK(v.soluble() == expected);
    if (v.soluble()) {
      check_witness(b, a, v);
      ++soluble_count;
    } else {
      CHECK(v.method == RealVerdict::Method::binary_root_count);
      CHECK(!v.witness.has_value());
      ++insoluble_count;
    }
  }
  CHECK(soluble_count > 3000);
  CHECK(insoluble_count > 300);
}

TEST_CASE("real_solver: distinct real root counts on frozen polynomials") {
  auto poly = [](std::initializer_list<long> asc) {
    std::vector<Rat> p;
    for (long c : asc) p.emplace_back(c);
    return p;
  };
  CHECK(count_distinct_real_roots(poly({1, 0, 1})) == 0);        // t^2 + 1
  CHECK(count_distinct_real_roots(poly({-1, 0, 1})) == 2);       // t^2 - 1
  CHECK(count_distinct_real_roots(poly({1, -2, 1})) == 1);       // (t - 1)^2
  CHECK(count_distinct_real_roots(poly({0, -1, 0, 1})) == 3);    // t^3 - t
  CHECK(count_distinct_real_roots(poly({4, 0, -4, 0, 1})) == 2); // (t^2 - 2)^2
  CHECK(count_distinct_real_roots(poly({-6, 11, -6, 1})) == 3);  // (t-1)(t-2)(t-3)
  CHECK(count_distinct_real_roots(poly({5})) == 0);
  CHECK(count_distinct_real_roots(poly({0, 1})) == 1);
  CHECK_THROWS_AS(count_distinct_real_roots(std::vector<Rat>{}), std::invalid_argument);
  CHECK_THROWS_AS(count_distinct_real_roots(std::vector<Rat>{Rat(0), Rat(0)}),
                  std::invalid_argument);
}

TEST_CASE("real_solver: verdicts are invariant under coefficient scaling") {
  Rng rng(99);
  for (auto [n, d] : {std::pair{2, 2}, {2, 4}, {3, 2}, {2, 3}}) {
    const auto b = veronese_basis(n, d);
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<Int> a(b.size());
      bool nz = false;
      for (auto& c : a) {
        const long t = rng.next_int(-8, 8);
        c = t;
        nz = nz || t != 0;
      }
      if (!nz) continue;
      const auto base = real_solubility(b, a);
      for (long s : {2L, -3L, 7L, -1L}) {
        std::vector<Int> scaled(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) scaled[i] = a[i] * s;
        CHECK(real_solubility(b, scaled).kind == base.kind);
      }
    }
  }
}

TEST_CASE("real_solver: sampling finds thin sign regions and certifies them exactly") {
  // (100x - 31y)(100x - 32y)(x^2 + y^2) + z^4: strictly positive at every
  // point of {-1,0,1}^3, negative only on a wedge of about 0.3% of directions.
  const auto b = veronese_basis(3, 4);
  std::vector<Int> a(b.size(), 0);
  auto set = [&](int ex, int ey, int ez, long c) {
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b.exponents[i][0] == ex && b.exponents[i][1] == ey && b.exponents[i][2] == ez) {
        a[i] = c;
        return;
      }
    REQUIRE(false);
  };
  set(4, 0, 0, 10000);
  set(3, 1, 0, -6300);
  set(2, 2, 0, 10992);
  set(1, 3, 0, -6300);
  set(0, 4, 0, 992);
  set(0, 0, 4, 1);
  const auto v = real_solubility(b, a);
  REQUIRE(v.soluble());
  CHECK(v.method == RealVerdict::Method::sign_change);
  check_witness(b, a, v);
  // Any real zero has x/y strictly inside the factor-root wedge.
  const double t = v.witness->point[0] / v.witness->point[1];
  CHECK(t > 0.3099);
  CHECK(t < 0.3201);
}

TEST_CASE("real_solver: undecided shapes answer unknown and never insoluble") {
  const auto b = veronese_basis(3, 4);
  std::vector<Int> diag(b.size(), 0);
  for (std::size_t i = 0; i < b.size(); ++i)
    if (std::any_of(b.exponents[i].begin(), b.exponents[i].end(), [&](int e) { return e == 4; }))
      diag[i] = 1;
  const auto v = real_solubility(b, diag);  // x^4 + y^4 + z^4
  CHECK(v.kind == RealVerdict::Kind::unknown);
  CHECK(v.method == RealVerdict::Method::none);
  CHECK(!v.witness.has_value());

  // No exact decider exists for n=3, d=4, so insoluble must never appear.
  Rng rng(4242);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Int> c(b.size());
    bool nz = false;
    for (auto& x : c) {
      const long t = rng.next_int(-6, 6);
      x = t;
      nz = nz || t != 0;
    }
    if (!nz) continue;
    const auto r = real_solubility(b, c);
    CHECK(r.kind != RealVerdict::Kind::insoluble);
    if (r.soluble()) check_witness(b, c, r);
  }
}

TEST_CASE("real_solver: infinite place membership equals real solubility") {
  Rng rng(31);
  for (auto [n, d] : {std::pair{2, 2}, {2, 4}}) {
    const auto b = veronese_basis(n, d);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Int> a(b.size());
      bool nz = false;
      for (auto& c : a) {
        const long t = rng.next_int(-9, 9);
        c = t;
        nz = nz || t != 0;
      }
      if (!nz) continue;
      CHECK(t_infty_membership(b, a).kind == real_solubility(b, a).kind);
    }
  }
}

TEST_CASE("real_solver: domain errors") {
  const auto b2 = veronese_basis(2, 2);
  CHECK_THROWS_AS(real_solubility(b2, zi({0, 0, 0})), std::invalid_argument);
  CHECK_THROWS_AS(real_solubility(b2, zi({1, 2})), std::invalid_argument);
  const auto b1 = veronese_basis(1, 2);
  CHECK_THROWS_AS(real_solubility(b1, zi({1})), std::invalid_argument);
}
