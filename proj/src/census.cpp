#include "solcensus/census.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <utility>

#include "solcensus/rng.hpp"

namespace solcensus {

namespace {

bool is_prime_long(long p) {
  if (p < 2) return false;
  for (long q = 2; q * q <= p; ++q)
    if (p % q == 0) return false;
  return true;
}

void chunked_run(std::uint64_t total, int jobs,
                 const std::function<void(std::size_t, std::uint64_t, std::uint64_t)>& body,
                 std::size_t nchunks) {
  if (total == 0) return;
  if (jobs <= 1 || nchunks <= 1) {
    body(0, 0, total);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      body(c, total * c / nchunks, total * (c + 1) / nchunks);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(jobs), nchunks);
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

Int mod_floor(const Int& a, const Int& m) {
  Int r = a % m;
  if (r < 0) r += m;
  return r;
}

int exponent_index(const VeroneseBasis& b, const std::vector<int>& e) {
  for (std::size_t i = 0; i < b.exponents.size(); ++i)
    if (b.exponents[i] == e) return static_cast<int>(i);
  return -1;
}

// b^2 - 4ac of the binary quadratic a0 x^2 + a1 xy + a2 y^2.
Int binary_disc(const VeroneseBasis& b, std::span<const Int> a) {
  const auto ixx = static_cast<std::size_t>(exponent_index(b, {2, 0}));
  const auto ixy = static_cast<std::size_t>(exponent_index(b, {1, 1}));
  const auto iyy = static_cast<std::size_t>(exponent_index(b, {0, 2}));
  return a[ixy] * a[ixy] - 4 * a[ixx] * a[iyy];
}

// A binary quadratic over Q_q represents zero nontrivially iff its
// discriminant is a square there; for nonzero disc that means even
// q-valuation and a square unit part (1 mod 8 when q = 2).
bool disc_square_in_Qq(Int disc, long q) {
  long v = 0;
  while (mpz_divisible_ui_p(disc.get_mpz_t(), static_cast<unsigned long>(q))) {
    disc /= q;
    ++v;
  }
  if (v & 1) return false;
  if (q == 2) return mpz_fdiv_ui(disc.get_mpz_t(), 8) == 1;
  const Int qz(q);
  return mpz_legendre(disc.get_mpz_t(), qz.get_mpz_t()) == 1;
}

// Divisors of |v| by trial division; empty when v is too large to scan.
std::vector<Int> divisors_of(const Int& v) {
  std::vector<Int> out;
  const Int n = abs(v);
  if (n > Int("1000000000000")) return out;
  for (Int i = 1; i * i <= n; ++i)
    if (n % i == 0) {
      out.push_back(i);
      out.push_back(n / i);
    }
  return out;
}

// f(x, y) = sum_j a[j] x^(d-j) y^j, the coefficient layout of the
// degree-d basis in two variables.
Int eval_binary(std::span<const Int> a, int d, const Int& x, const Int& y) {
  Int acc = a[0];
  Int yp(1);
  for (int j = 1; j <= d; ++j) {
    acc *= x;
    yp *= y;
    acc += a[static_cast<std::size_t>(j)] * yp;
  }
  return acc;
}

// Primitive integer zero of a binary form through the rational root
// theorem; nullopt when none exists or the coefficient divisors are out
// of scanning range (the caller treats that as "no shortcut").
std::optional<std::vector<Int>> binary_rational_zero(std::span<const Int> a, int d) {
  if (a[0] == 0) return std::vector<Int>{Int(1), Int(0)};
  if (a[static_cast<std::size_t>(d)] == 0) return std::vector<Int>{Int(0), Int(1)};
  const auto rs = divisors_of(a[static_cast<std::size_t>(d)]);
  const auto ss = divisors_of(a[0]);
  if (rs.empty() || ss.empty()) return std::nullopt;
  if (rs.size() * ss.size() > 200000) return std::nullopt;
  for (const Int& r : rs)
    for (const Int& s : ss) {
      if (gcd(r, s) != 1) continue;
      if (eval_binary(a, d, r, s) == 0) return std::vector<Int>{r, s};
      if (eval_binary(a, d, -r, s) == 0) return std::vector<Int>{-r, s};
    }
  return std::nullopt;
}

// Integer matrix M with x^T M x = 2 f(x) for a quadratic form f.
std::vector<std::vector<Int>> gram_matrix(const VeroneseBasis& b, std::span<const Int> a) {
  const int n = b.n;
  auto coeff_at = [&](int i, int j) {
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    e[static_cast<std::size_t>(i)] += 1;
    e[static_cast<std::size_t>(j)] += 1;
    return a[static_cast<std::size_t>(exponent_index(b, e))];
  };
  std::vector<std::vector<Int>> m(static_cast<std::size_t>(n),
                                  std::vector<Int>(static_cast<std::size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          (i == j) ? Int(2 * coeff_at(i, i)) : coeff_at(i, j);
  return m;
}

// Fraction-free elimination; every division below is exact.
Int bareiss_det(std::vector<std::vector<Int>> m) {
  const int n = static_cast<int>(m.size());
  Int prev(1);
  int sign = 1;
  for (int k = 0; k + 1 < n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (m[ku][ku] == 0) {
      int pr = -1;
      for (int i = k + 1; i < n; ++i)
        if (m[static_cast<std::size_t>(i)][ku] != 0) {
          pr = i;
          break;
        }
      if (pr < 0) return Int(0);
      std::swap(m[ku], m[static_cast<std::size_t>(pr)]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j) {
        auto& mij = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        mij = mij * m[ku][ku] -
              m[static_cast<std::size_t>(i)][ku] * m[ku][static_cast<std::size_t>(j)];
        mpz_divexact(mij.get_mpz_t(), mij.get_mpz_t(), prev.get_mpz_t());
      }
    prev = m[ku][ku];
  }
  Int det = m[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(n - 1)];
  if (sign < 0) det = -det;
  return det;
}

// Primitive integer kernel vector of a singular matrix.
std::vector<Int> kernel_vector(const std::vector<std::vector<Int>>& mi) {
  const int n = static_cast<int>(mi.size());
  std::vector<std::vector<Rat>> m(static_cast<std::size_t>(n),
                                  std::vector<Rat>(static_cast<std::size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          Rat(mi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  std::vector<int> pivot_col;
  int row = 0;
  for (int col = 0; col < n && row < n; ++col) {
    int pr = -1;
    for (int i = row; i < n; ++i)
      if (m[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)] != 0) {
        pr = i;
        break;
      }
    if (pr < 0) continue;
    std::swap(m[static_cast<std::size_t>(row)], m[static_cast<std::size_t>(pr)]);
    for (int i = row + 1; i < n; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      if (m[iu][static_cast<std::size_t>(col)] == 0) continue;
      const Rat f = m[iu][static_cast<std::size_t>(col)] /
                    m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
      for (int j = col; j < n; ++j)
        m[iu][static_cast<std::size_t>(j)] -=
            f * m[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)];
    }
    pivot_col.push_back(col);
    ++row;
  }
  std::vector<bool> is_pivot(static_cast<std::size_t>(n), false);
  for (int c : pivot_col) is_pivot[static_cast<std::size_t>(c)] = true;
  int free_col = 0;
  while (free_col < n && is_pivot[static_cast<std::size_t>(free_col)]) ++free_col;
  std::vector<Rat> x(static_cast<std::size_t>(n), Rat(0));
  x[static_cast<std::size_t>(free_col)] = 1;
  for (int i = row - 1; i >= 0; --i) {
    const int c = pivot_col[static_cast<std::size_t>(i)];
    Rat s(0);
    for (int j = c + 1; j < n; ++j)
      s += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
           x[static_cast<std::size_t>(j)];
    x[static_cast<std::size_t>(c)] =
        -s / m[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  }
  Int scale(1);
  for (const Rat& xi : x) scale = lcm(scale, Int(xi.get_den()));
  std::vector<Int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rat s = x[static_cast<std::size_t>(i)] * Rat(scale);
    s.canonicalize();
    v[static_cast<std::size_t>(i)] = s.get_num();
  }
  const Int c = vector_content(v);
  if (c > 1)
    for (Int& vi : v) vi /= c;
  return v;
}

// Prime factors by trial division to 10^6; the cofactor is kept when its
// primality is certain (no factor below 10^6 and under 10^12), otherwise
// the factorization failed and nullopt is returned.
std::optional<std::vector<long>> prime_factors_small(Int v) {
  std::vector<long> out;
  v = abs(v);
  for (long q = 2; q <= 1000000; ++q) {
    if (Int(q) * q > v) break;
    if (!mpz_divisible_ui_p(v.get_mpz_t(), static_cast<unsigned long>(q))) continue;
    out.push_back(q);
    while (mpz_divisible_ui_p(v.get_mpz_t(), static_cast<unsigned long>(q))) v /= q;
  }
  if (v > 1) {
    if (!v.fits_slong_p() || v >= Int("1000000000000")) return std::nullopt;
    out.push_back(v.get_si());
  }
  return out;
}

// True iff the binary form has a root in P^1(F_q).
bool binary_has_root_mod(std::span<const Int> a, int d, long q) {
  std::vector<long> c(static_cast<std::size_t>(d) + 1);
  for (int j = 0; j <= d; ++j)
    c[static_cast<std::size_t>(j)] = static_cast<long>(
        mpz_fdiv_ui(a[static_cast<std::size_t>(j)].get_mpz_t(), static_cast<unsigned long>(q)));
  if (c[0] == 0) return true;  // the point (1 : 0)
  for (long t = 0; t < q; ++t) {
    long acc = 0;
    for (int j = 0; j <= d; ++j) acc = (acc * t + c[static_cast<std::size_t>(j)]) % q;
    if (acc == 0) return true;
  }
  return false;
}

struct ShortcutContext {
  std::optional<Int> disc;  // n = 2, d = 2
  std::optional<Int> det;   // d = 2, n >= 3: Gram determinant
};

struct TailOutcome {
  enum class Kind { covered, witness, unknown } kind = Kind::unknown;
  long q = 0;
};

// Decides the primes beyond p_max for a point already soluble at every
// checked place. Exact for quadratic fibers; witness-scanning for binary
// forms of higher degree; the sampled smooth-reduction shortcut for
// ternary fibers; nothing for n >= 4, d >= 3.
TailOutcome cover_tail(const VeroneseBasis& basis, std::span<const Int> a, long p_max,
                       const CensusBudgets& budgets, const ShortcutContext& ctx) {
  const int n = basis.n;
  const int d = basis.d;
  const long lo = std::max(2L, p_max + 1);

  if (n == 2 && d == 2) {
    // disc is nonzero and not a perfect square here, so some prime sees it
    // as a nonsquare; almost always a small one.
    for (long q = lo; q <= p_max + budgets.witness_span; ++q) {
      if (!is_prime_long(q)) continue;
      if (disc_square_in_Qq(*ctx.disc, q)) continue;
      const auto zv = zp_solubility(basis, a, q, budgets.zp);
      if (zv.insoluble()) return {TailOutcome::Kind::witness, q};
    }
    return {TailOutcome::Kind::unknown, 0};
  }

  if (d == 2 && n >= 3) {
    // Away from 2 det the reduction is a nonsingular quadric in >= 3
    // variables: a nontrivial zero exists mod p and it is smooth, so it
    // lifts. Only the primes dividing 2 det need individual checks.
    const auto bad = prime_factors_small(2 * abs(*ctx.det));
    if (!bad) return {TailOutcome::Kind::unknown, 0};
    for (long q : *bad) {
      if (q <= p_max) continue;
      const auto zv = zp_solubility(basis, a, q, budgets.zp);
      if (zv.insoluble()) return {TailOutcome::Kind::witness, q};
      if (!zv.soluble()) return {TailOutcome::Kind::unknown, 0};
    }
    return {TailOutcome::Kind::covered, 0};
  }

  if (n == 2 && d >= 3) {
    // A prime where the reduction has no projective root is an exact
    // insolubility witness; solubility at every large prime has no
    // finite certificate here, so exhausting the scan leaves unknown.
    for (long q = lo; q <= p_max + budgets.witness_span; ++q) {
      if (!is_prime_long(q)) continue;
      if (binary_has_root_mod(a, d, q)) continue;
      const auto zv = zp_solubility(basis, a, q, budgets.zp);
      if (zv.insoluble()) return {TailOutcome::Kind::witness, q};
    }
    return {TailOutcome::Kind::unknown, 0};
  }

  if (n == 3 && d >= 3) {
    // Sampled coverage: at the least prime with the plane-curve point
    // guarantee, a smooth reduction certifies solubility there and is
    // taken as representative of the whole tail.
    const long g = static_cast<long>(d - 1) * (d - 2) / 2;
    const long cap = std::max(p_max, 4 * g * g) + 10000;
    for (long q = lo; q <= cap; ++q) {
      if (!is_prime_long(q) || !hasse_weil_guarantee(3, d, q)) continue;
      const auto sm = smooth_reduction(basis, a, q, budgets.smooth_budget);
      if (sm && *sm) return {TailOutcome::Kind::covered, 0};
      return {TailOutcome::Kind::unknown, 0};
    }
    return {TailOutcome::Kind::unknown, 0};
  }

  return {TailOutcome::Kind::unknown, 0};
}

struct RichVerdict {
  PointVerdict v;
  std::vector<long> unknown_places;
};

RichVerdict classify_rich(const VeroneseBasis& basis, std::span<const Int> a, long p_max,
                          const CensusBudgets& budgets) {
  if (a.size() != basis.size())
    throw std::invalid_argument("classify_point: coefficient arity mismatch");
  bool all_zero = true;
  for (const Int& ai : a)
    if (ai != 0) {
      all_zero = false;
      break;
    }
  if (all_zero) throw std::invalid_argument("classify_point: zero coefficient vector");
  if (p_max < 0) throw std::invalid_argument("classify_point: negative p_max");

  const int n = basis.n;
  const int d = basis.d;
  RichVerdict out;

  if (n == 1) {
    // a x^d with a != 0 vanishes only at zero, at every place.
    out.v = {'I', 0, VerdictRoute::places};
    return out;
  }

  // Exact global zero shortcuts: soluble at every place at once.
  ShortcutContext ctx;
  if (d == 1) {
    out.v = {'S', -1, VerdictRoute::rational_zero};
    return out;  // a hyperplane always carries primitive integer points
  }
  if (d == 2 && n == 2) {
    ctx.disc = binary_disc(basis, a);
    if (*ctx.disc >= 0 && mpz_perfect_square_p(ctx.disc->get_mpz_t())) {
      out.v = {'S', -1, VerdictRoute::rational_zero};
      return out;
    }
  } else if (d == 2 && n >= 3) {
    const auto m = gram_matrix(basis, a);
    ctx.det = bareiss_det(m);
    if (*ctx.det == 0) {
      const auto y = kernel_vector(m);
      std::vector<Int> ac(a.begin(), a.end());
      if (evaluate_form<Int>(basis, ac, y) == 0) {
        out.v = {'S', -1, VerdictRoute::rational_zero};
        return out;
      }
    }
  } else if (d >= 3 && n == 2) {
    if (binary_rational_zero(a, d)) {
      out.v = {'S', -1, VerdictRoute::rational_zero};
      return out;
    }
  }

  // The listed places: real first, then primes up to p_max, stopping at
  // the first insolubility.
  const auto rv = real_solubility(basis, a, budgets.real);
  if (rv.insoluble()) {
    out.v = {'I', 0, VerdictRoute::places};
    return out;
  }
  if (!rv.soluble()) out.unknown_places.push_back(0);
  for (long p : primes_up_to(p_max)) {
    const auto zv = zp_solubility(basis, a, p, budgets.zp);
    if (zv.insoluble()) {
      out.v = {'I', p, VerdictRoute::places};
      return out;
    }
    if (!zv.soluble()) out.unknown_places.push_back(p);
  }

  // The tail. A witness there is conclusive even past unknown places;
  // coverage is not, since soluble needs every place certified.
  const auto tail = cover_tail(basis, a, p_max, budgets, ctx);
  if (tail.kind == TailOutcome::Kind::witness) {
    out.v = {'I', tail.q, VerdictRoute::tail_witness};
    return out;
  }
  if (!out.unknown_places.empty()) {
    out.v = {'U', -1, VerdictRoute::undecided};
    return out;
  }
  if (tail.kind == TailOutcome::Kind::covered) {
    out.v = {'S', -1, VerdictRoute::tail_covered};
    return out;
  }
  out.v = {'U', -1, VerdictRoute::undecided};
  return out;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string verdict_inputs_digest(const ThinFormP& P, const VeroneseBasis& basis, long p_max,
                                  const CensusBudgets& b) {
  std::ostringstream os;
  os << basis.n << ' ' << basis.d << ' ' << p_max;
  for (const auto& [e, c] : P.terms) {
    for (int x : e) os << ' ' << x;
    os << ' ' << c;
  }
  os << " | " << b.zp.max_level << ' ' << b.zp.frontier_cap << ' ' << b.zp.work_cap << ' '
     << b.zp.class_stable << ' ' << b.zp.strip_content << ' ' << b.zp.exact_zero_scan;
  os << " | " << b.real.lowdisc_points << ' ' << b.real.random_points << ' ' << b.real.seed << ' '
     << b.real.tol;
  os << " | " << b.smooth_budget << ' ' << b.witness_span;
  std::ostringstream hex;
  hex << std::hex << fnv1a64(os.str());
  return hex.str();
}

std::string point_key(std::span<const Int> a) {
  std::ostringstream os;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) os << ' ';
    os << a[i];
  }
  return os.str();
}

struct CacheEntry {
  char code = 'U';
  long place = -1;
  char route = 'U';
};

using VerdictCache = std::unordered_map<std::string, CacheEntry>;

// Cache lines are "code place route a1 ... aN"; unparsable lines are skipped.
VerdictCache load_cache(const std::string& path) {
  VerdictCache cache;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream is(line);
    CacheEntry e;
    std::string key;
    if (!(is >> e.code >> e.place >> e.route)) continue;
    std::getline(is, key);
    if (key.empty() || key[0] != ' ') continue;
    cache.emplace(key.substr(1), e);
  }
  return cache;
}

bool store_cache(const std::string& dir, const std::string& path, const VerdictCache& cache) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string lock = path + ".lock";
  std::FILE* lf = std::fopen(lock.c_str(), "wx");
  if (!lf) return false;  // another writer holds it; the cache is advisory
  std::fclose(lf);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [key, e] : cache)
      out << e.code << ' ' << e.place << ' ' << e.route << ' ' << key << '\n';
  }
  std::filesystem::rename(tmp, path, ec);
  std::filesystem::remove(lock);
  return !ec;
}

char route_char(VerdictRoute r) { return static_cast<char>(r); }

VerdictRoute route_from_char(char c) {
  switch (c) {
    case 'R': return VerdictRoute::rational_zero;
    case 'P': return VerdictRoute::places;
    case 'C': return VerdictRoute::tail_covered;
    case 'W': return VerdictRoute::tail_witness;
    default: return VerdictRoute::undecided;
  }
}

ThinOptions census_thin_options(const ThinFormP& P, const CensusBudgets& budgets) {
  ThinOptions to;
  to.strategy = P.solvable_last ? ThinStrategy::solve_last : ThinStrategy::full_scan;
  to.primitive_only = true;
  to.jobs = budgets.jobs;
  return to;
}

// Sum of |monomial| values of the basis at a rational point.
Rat monomial_abs_sum(const VeroneseBasis& basis, std::span<const Rat> x) {
  Rat s(0);
  for (const auto& e : basis.exponents) {
    Rat m(1);
    for (int j = 0; j < basis.n; ++j)
      for (int t = 0; t < e[static_cast<std::size_t>(j)]; ++t) m *= x[static_cast<std::size_t>(j)];
    s += abs(m);
  }
  return s;
}

}  // namespace

PointVerdict classify_point(const ThinFormP& P, const VeroneseBasis& basis, std::span<const Int> a,
                            long p_max, const CensusBudgets& budgets) {
  if (static_cast<std::size_t>(P.N) != basis.size())
    throw std::invalid_argument("classify_point: thin form arity does not match the basis");
  return classify_rich(basis, a, p_max, budgets).v;
}

CensusReport rho_estimate(const ThinFormP& P, const VeroneseBasis& basis, long A, long p_max,
                          const CensusBudgets& budgets, std::uint64_t seed, CensusMode mode) {
  if (static_cast<std::size_t>(P.N) != basis.size())
    throw std::invalid_argument("rho_estimate: thin form arity does not match the basis");
  if (A < 1) throw std::invalid_argument("rho_estimate: A must be positive");
  if (p_max < 0) throw std::invalid_argument("rho_estimate: negative p_max");

  CensusReport rep;
  rep.A = A;
  rep.mode = mode;

  std::vector<std::vector<Int>> pts;
  if (mode == CensusMode::exhaustive) {
    pts = collect_thin(P, Int(A), BoxSpec::full(P.N), CongruenceSpec::none(P.N),
                       census_thin_options(P, budgets));
  } else {
    pts = sample_thin(P, Int(A), budgets.sample_m, seed).points;
  }

  VerdictCache cache;
  std::string cache_path;
  if (!budgets.cache_dir.empty()) {
    cache_path = budgets.cache_dir + "/census-" + verdict_inputs_digest(P, basis, p_max, budgets) +
                 ".txt";
    cache = load_cache(cache_path);
  }

  const std::size_t total = pts.size();
  std::vector<RichVerdict> results(total);
  std::vector<char> fresh(total, 0);
  std::atomic<std::uint64_t> hits{0};
  chunked_run(
      total, budgets.jobs,
      [&](std::size_t, std::uint64_t b, std::uint64_t e) {
        for (std::uint64_t i = b; i < e; ++i) {
          const auto& a = pts[static_cast<std::size_t>(i)];
          if (!cache_path.empty()) {
            const auto it = cache.find(point_key(a));
            if (it != cache.end()) {
              results[static_cast<std::size_t>(i)].v = {it->second.code, it->second.place,
                                                        route_from_char(it->second.route)};
              hits.fetch_add(1);
              continue;
            }
          }
          results[static_cast<std::size_t>(i)] = classify_rich(basis, a, p_max, budgets);
          fresh[static_cast<std::size_t>(i)] = 1;
        }
      },
      static_cast<std::size_t>(budgets.jobs) * 8);
  rep.cache_hits = hits.load();

  rep.total = total;
  std::map<long, PlaceStats> stats;
  std::uint64_t nsol = 0, nins = 0, nunk = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const auto& r = results[i];
    switch (r.v.code) {
      case 'S': ++nsol; break;
      case 'I':
        ++nins;
        stats[r.v.place].insoluble++;
        break;
      default: ++nunk; break;
    }
    switch (r.v.route) {
      case VerdictRoute::rational_zero: rep.rational_zero++; break;
      case VerdictRoute::tail_covered: rep.tail_covered++; break;
      case VerdictRoute::tail_witness: rep.tail_witness++; break;
      default: break;
    }
    if (fresh[i])
      for (long q : r.unknown_places) stats[q].unknown++;
  }
  rep.soluble = nsol;
  rep.insoluble = nins;
  rep.unknown = nunk;
  rep.defined = total > 0;
  if (rep.defined) {
    rep.rho_lower = Rat(rep.soluble, rep.total);
    rep.rho_upper = Rat(rep.soluble + rep.unknown, rep.total);
    rep.rho_lower.canonicalize();
    rep.rho_upper.canonicalize();
  }
  for (auto& [p, s] : stats) {
    s.p = p;
    rep.place_stats.push_back(s);
  }

  if (!cache_path.empty()) {
    std::uint64_t added = 0;
    for (std::size_t i = 0; i < total; ++i)
      if (fresh[i]) {
        cache[point_key(pts[i])] = {results[i].v.code, results[i].v.place,
                                    route_char(results[i].v.route)};
        ++added;
      }
    if (added > 0) store_cache(budgets.cache_dir, cache_path, cache);
  }
  return rep;
}

LocalConditionProduct LocalConditionProduct::full() { return {}; }

DQuantity d_quantity(const ThinFormP& P, const VeroneseBasis& basis,
                     const LocalConditionProduct& U, long A, const CensusBudgets& budgets) {
  if (static_cast<std::size_t>(P.N) != basis.size())
    throw std::invalid_argument("d_quantity: thin form arity does not match the basis");
  if (A < 1) throw std::invalid_argument("d_quantity: A must be positive");
  if (U.real_t_marker && U.real_box)
    throw std::invalid_argument("d_quantity: real place has both a box and the membership marker");

  // Fold the box conditions at the finite places into one congruence.
  CongruenceSpec cong = CongruenceSpec::none(P.N);
  std::vector<long> seen;
  bool finite_markers = false;
  for (const auto& fp : U.finite) {
    if (!is_prime_long(fp.p)) throw std::invalid_argument("d_quantity: place is not prime");
    for (long q : seen)
      if (q == fp.p) throw std::invalid_argument("d_quantity: duplicate finite place");
    seen.push_back(fp.p);
    if (fp.t_marker) {
      finite_markers = true;
      continue;
    }
    if (fp.level < 1) throw std::invalid_argument("d_quantity: box level must be at least 1");
    if (fp.center.size() != static_cast<std::size_t>(P.N))
      throw std::invalid_argument("d_quantity: center arity mismatch");
    Int m;
    mpz_pow_ui(m.get_mpz_t(), Int(fp.p).get_mpz_t(), static_cast<unsigned long>(fp.level));
    Int inv;
    if (cong.modulus > 1 && !mpz_invert(inv.get_mpz_t(), cong.modulus.get_mpz_t(), m.get_mpz_t()))
      throw std::invalid_argument("d_quantity: duplicate finite place");  // unreachable: distinct primes
    for (int i = 0; i < P.N; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      const Int r2 = mod_floor(fp.center[iu], m);
      if (cong.modulus == 1) {
        cong.residue[iu] = r2;
      } else {
        const Int t = mod_floor((r2 - cong.residue[iu]) * inv, m);
        cong.residue[iu] += cong.modulus * t;
      }
    }
    cong.modulus *= m;
  }

  const BoxSpec box = U.real_box ? *U.real_box : BoxSpec::full(P.N);
  const ThinOptions to = census_thin_options(P, budgets);

  DQuantity out;
  out.denominator = count_thin(P, Int(A), to);
  if (!U.real_t_marker && !finite_markers) {
    out.numerator = count_thin(P, Int(A), box, cong, to);
  } else {
    for (const auto& a : collect_thin(P, Int(A), box, cong, to)) {
      bool excluded = false, undecided = false;
      if (U.real_t_marker) {
        const auto rv = t_infty_membership(basis, a, budgets.real);
        if (rv.insoluble())
          excluded = true;
        else if (!rv.soluble())
          undecided = true;
      }
      for (const auto& fp : U.finite) {
        if (!fp.t_marker || excluded) break;
        const auto zv = zp_solubility(basis, a, fp.p, budgets.zp);
        if (zv.insoluble())
          excluded = true;
        else if (!zv.soluble())
          undecided = true;
      }
      if (excluded) continue;
      if (undecided) {
        out.unknown_members++;
        continue;
      }
      out.numerator++;
    }
  }
  out.defined = out.denominator > 0;
  if (out.defined) {
    out.value = Rat(out.numerator, out.denominator);
    out.value.canonicalize();
  }
  return out;
}

ConvergenceReport convergence_report(const ThinFormP& P, const VeroneseBasis& basis,
                                     std::span<const long> A_schedule, long p_max,
                                     const ConvergenceOptions& opt) {
  if (A_schedule.size() < 3)
    throw std::invalid_argument("convergence_report: need at least three box sizes");
  for (std::size_t i = 1; i < A_schedule.size(); ++i)
    if (A_schedule[i] <= A_schedule[i - 1])
      throw std::invalid_argument("convergence_report: A schedule must be strictly increasing");

  ConvergenceReport rep;
  for (long A : A_schedule) {
    ConvergenceRow row;
    row.report = rho_estimate(P, basis, A, p_max, opt.budgets, opt.seed, CensusMode::exhaustive);
    if (row.report.defined)
      row.midpoint = Rat(Rat(row.report.rho_lower + row.report.rho_upper) / 2).get_d();
    rep.rows.push_back(std::move(row));
  }
  for (const auto& row : rep.rows)
    if (!row.report.defined) {
      rep.verdict = "SKIP";
      rep.reason = "empty thin set at A = " + std::to_string(row.report.A);
      return rep;
    }
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    rep.rows[i].delta = std::fabs(rep.rows[i].midpoint - rep.rows[i - 1].midpoint);
  if (p_max < 2) {
    rep.verdict = "SKIP";
    rep.reason = "no finite places with p_max = " + std::to_string(p_max);
    return rep;
  }

  const auto witness_pts = collect_thin(P, Int(A_schedule.front()), BoxSpec::full(P.N),
                                        CongruenceSpec::none(P.N),
                                        census_thin_options(P, opt.budgets));
  rep.cp = c_p_estimate(P, basis, p_max, witness_pts.front(), opt.cp);
  double infl = rep.cp.lower;
  for (const auto& def : rep.cp.deficits)
    if (def.estimated) infl *= std::max(0.0, 1.0 - def.estimated_deficit);
  rep.cp_lower_inflated = infl;
  rep.cp_upper = rep.cp.upper;

  bool monotone = true;
  for (std::size_t i = 2; i < rep.rows.size(); ++i)
    if (rep.rows[i].delta > rep.rows[i - 1].delta + opt.noise_tolerance) monotone = false;
  const double lo = rep.rows.back().report.rho_lower.get_d();
  const double hi = rep.rows.back().report.rho_upper.get_d();
  const bool overlap = hi >= rep.cp_lower_inflated - 1e-12 && rep.cp_upper >= lo - 1e-12;

  if (monotone && overlap) {
    rep.verdict = "PASS";
    rep.reason = "midpoint deltas non-increasing and the final interval meets the reference";
  } else {
    rep.verdict = "FAIL";
    if (!monotone)
      rep.reason = "midpoint deltas increase beyond the noise tolerance";
    if (!overlap) {
      if (!rep.reason.empty()) rep.reason += "; ";
      rep.reason += "final interval misses the deficit-widened reference";
    }
  }
  return rep;
}

ProbeResult positivity_probe(const ThinFormP& P, const VeroneseBasis& basis,
                             std::span<const Int> b, long H, long p_max,
                             const CensusBudgets& budgets, std::uint64_t seed) {
  if (static_cast<std::size_t>(P.N) != basis.size())
    throw std::invalid_argument("positivity_probe: thin form arity does not match the basis");
  if (b.size() != basis.size())
    throw std::invalid_argument("positivity_probe: coefficient arity mismatch");
  if (H < 1) throw std::invalid_argument("positivity_probe: H must be positive");
  if (p_max < 0) throw std::invalid_argument("positivity_probe: negative p_max");
  bool all_zero = true;
  for (const Int& bi : b)
    if (bi != 0) {
      all_zero = false;
      break;
    }
  if (all_zero) throw std::invalid_argument("positivity_probe: zero coefficient vector");
  if (evaluate_thin(P, b) != 0)
    throw std::domain_error("positivity_probe: b is not on the thin set");

  const int n = basis.n;
  const std::vector<Int> bc(b.begin(), b.end());

  // Lexicographic scan of [-H, H]^n for a smooth integer zero of f_b.
  std::vector<Int> y;
  std::vector<Int> grad;
  {
    std::vector<Int> x(static_cast<std::size_t>(n), Int(-H));
    for (;;) {
      bool zero = true;
      for (const Int& xi : x)
        if (xi != 0) {
          zero = false;
          break;
        }
      if (!zero && evaluate_form<Int>(basis, bc, x) == 0) {
        auto g = gradient_form<Int>(basis, bc, x);
        bool gz = true;
        for (const Int& gi : g)
          if (gi != 0) {
            gz = false;
            break;
          }
        if (!gz) {
          y = x;
          grad = std::move(g);
          break;
        }
      }
      int i = n - 1;
      while (i >= 0 && x[static_cast<std::size_t>(i)] == H) {
        x[static_cast<std::size_t>(i)] = -H;
        --i;
      }
      if (i < 0) break;
      x[static_cast<std::size_t>(i)] += 1;
    }
  }
  if (y.empty())
    return {std::nullopt, "no smooth integer zero of f_b in the box [-H, H]^n"};
  {
    const Int c = vector_content(y);
    if (c > 1) {
      for (Int& yi : y) yi /= c;
      grad = gradient_form<Int>(basis, bc, y);
    }
  }

  PositivityCertificate cert;
  cert.b.assign(b.begin(), b.end());
  cert.y = y;

  int pivot = 0;
  for (int i = 1; i < n; ++i)
    if (abs(grad[static_cast<std::size_t>(i)]) > abs(grad[static_cast<std::size_t>(pivot)]))
      pivot = i;
  cert.pivot = pivot;

  // Sign bracket across the pivot direction: f_b changes sign between
  // y -+ t e_pivot for small t, because the pivot derivative is nonzero.
  std::vector<Rat> br(bc.size());
  for (std::size_t i = 0; i < bc.size(); ++i) br[i] = Rat(bc[i]);
  std::vector<Rat> yp(static_cast<std::size_t>(n)), ym(static_cast<std::size_t>(n));
  Rat fp, fm;
  Rat t(1);
  bool bracket = false;
  for (int s = 0; s < 80; ++s, t /= 2) {
    for (int i = 0; i < n; ++i) {
      yp[static_cast<std::size_t>(i)] = Rat(y[static_cast<std::size_t>(i)]);
      ym[static_cast<std::size_t>(i)] = Rat(y[static_cast<std::size_t>(i)]);
    }
    yp[static_cast<std::size_t>(pivot)] += t;
    ym[static_cast<std::size_t>(pivot)] -= t;
    fp = evaluate_form<Rat>(basis, br, yp);
    fm = evaluate_form<Rat>(basis, br, ym);
    if (fp * fm < 0) {
      bracket = true;
      break;
    }
  }
  if (!bracket) return {std::nullopt, "no sign bracket across the pivot direction"};

  const Rat margin = std::min(Rat(abs(fp)), Rat(abs(fm)));
  const Rat spread = std::max(Rat(monomial_abs_sum(basis, yp)), Rat(monomial_abs_sum(basis, ym)));
  cert.eta_infty = margin / (2 * spread);

  // Any coefficient move below eta_infty shifts both bracket values by
  // less than the margin, so the sign change survives; the seeded draws
  // re-check that exactly.
  {
    Rng rng = Rng(seed).derive({0x7265616cull});
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Rat> bpert = br;
      for (auto& ci : bpert) ci += cert.eta_infty * Rat(rng.next_int(-8, 8), 8);
      const Rat gp = evaluate_form<Rat>(basis, bpert, yp);
      const Rat gm = evaluate_form<Rat>(basis, bpert, ym);
      if (!(gp * gm < 0)) return {std::nullopt, "real perturbation validation failed"};
      cert.real_validated++;
    }
  }

  // One ball per prime: radius p^(-2 alpha) with alpha the pivot gradient
  // valuation, so perturbed coefficients keep a liftable zero at y.
  for (long p : primes_up_to(p_max)) {
    PrimeBall ball;
    ball.p = p;
    Int g = abs(grad[static_cast<std::size_t>(pivot)]);
    const Int pz(p);
    Int reduced;
    ball.alpha = static_cast<long>(mpz_remove(reduced.get_mpz_t(), g.get_mpz_t(), pz.get_mpz_t()));
    Int shift;
    mpz_pow_ui(shift.get_mpz_t(), pz.get_mpz_t(), static_cast<unsigned long>(2 * ball.alpha + 1));
    Int denom;
    mpz_pow_ui(denom.get_mpz_t(), pz.get_mpz_t(), static_cast<unsigned long>(2 * ball.alpha));
    ball.eta = Rat(Int(1), denom);
    ball.eta.canonicalize();

    Rng rng = Rng(seed).derive({0x706f7369ull, static_cast<std::uint64_t>(p)});
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Int> bpert = bc;
      bool pert_zero = true;
      for (auto& ci : bpert) {
        ci += shift * rng.next_int(-3, 3);
        if (ci != 0) pert_zero = false;
      }
      if (pert_zero) continue;
      const auto zv = zp_solubility(basis, bpert, p, budgets.zp);
      if (!zv.soluble())
        return {std::nullopt,
                "prime perturbation validation failed at p = " + std::to_string(p)};
      ball.validated++;
    }
    cert.prime_balls.push_back(std::move(ball));
  }

  Rat maxb(0);
  for (const Int& bi : b) maxb = std::max(maxb, Rat(abs(bi)));
  cert.C = std::max(Rat(1), Rat(maxb + cert.eta_infty));

  return {std::move(cert), ""};
}

}  // namespace solcensus
