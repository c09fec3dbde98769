#include "solcensus/combinatorics.hpp"

#include <algorithm>

#include "solcensus/forms.hpp"

namespace solcensus {

std::vector<int> moebius_table(long limit) {
  if (limit < 1) throw std::invalid_argument("moebius_table: limit < 1");
  std::vector<int> mu(static_cast<std::size_t>(limit) + 1, 1);
  std::vector<char> sieved(static_cast<std::size_t>(limit) + 1, 0);
  mu[0] = 0;
  for (long p = 2; p <= limit; ++p) {
    if (sieved[p]) continue;
    for (long k = p; k <= limit; k += p) {
      sieved[k] = 1;
      mu[k] = (k / p) % p == 0 ? 0 : -mu[k];
    }
  }
  // the sieve above flips signs per prime factor; squares were zeroed inline
  return mu;
}

std::vector<long> primes_up_to(long limit) {
  std::vector<long> out;
  if (limit < 2) return out;
  std::vector<char> comp(static_cast<std::size_t>(limit) + 1, 0);
  for (long p = 2; p <= limit; ++p) {
    if (comp[p]) continue;
    out.push_back(p);
    for (long k = p * p; k <= limit; k += p) comp[k] = 1;
  }
  return out;
}

namespace {

Rat c_nd_half(int n, int d, int di) {
  Rat r(factorial(d) * factorial(n + di - 1), factorial(di) * factorial(n + d - 1));
  r.canonicalize();
  return r;
}

}  // namespace

Rat c_nd(int n, int d, int d1, int d2) {
  if (n < 1) throw std::invalid_argument("c_nd: need n >= 1");
  if (d1 < 1 || d2 < 1 || d1 + d2 != d)
    throw std::invalid_argument("c_nd: need d1,d2 >= 1 with d1+d2 = d");
  return c_nd_half(n, d, d1) + c_nd_half(n, d, d2);
}

Lemma24Result lemma24_holds(int n, int d) {
  if (n < 3 || d < 3) throw std::invalid_argument("lemma24_holds: domain is n,d >= 3");
  Lemma24Result r;
  r.lhs = Rat(Int(n + d) * (n + d - 1), n - 1);
  r.lhs.canonicalize();
  r.rhs = binomial(n + d, d);
  r.holds = r.lhs < Rat(r.rhs);
  return r;
}

CndMax c_nd_max(int n, int d) {
  if (d < 2) throw std::invalid_argument("c_nd_max: need d >= 2");
  CndMax best;
  for (int d1 = 1; d1 <= d - 1; ++d1) {
    Rat v = c_nd(n, d, d1, d - d1);
    if (best.argmax.empty() || v > best.value) {
      best.value = v;
      best.argmax = {{d1, d - d1}};
    } else if (v == best.value) {
      best.argmax.emplace_back(d1, d - d1);
    }
  }
  return best;
}

RegimeReport regime_report(int n, int d) {
  if (n < 1 || d < 2) throw std::invalid_argument("regime_report: need n >= 1 and d >= 2");
  RegimeReport rep;
  rep.N = veronese_dimension(n, d);
  Rat margin = (1 - c_nd(n, d, 1, d - 1)) * Rat(Int(rep.N));
  Int flo;
  mpz_fdiv_q(flo.get_mpz_t(), margin.get_num().get_mpz_t(), margin.get_den().get_mpz_t());
  rep.threshold = to_long_checked(flo, "regime_report threshold");
  const Int N(rep.N);
  for (long k = 2; k < rep.threshold; ++k) {
    Int lhs = Int(k - 1) << static_cast<unsigned long>(k);
    if (lhs < N) rep.admissible_k.push_back(k);
  }
  for (int d1 = 1; d1 <= d - 1; ++d1) {
    Int m = binomial(n + d1 - 1, n - 1) + binomial(n + (d - d1) - 1, n - 1);
    rep.m_values.emplace_back(d1, d - d1, m);
  }
  return rep;
}

int symmetric_rank(const std::vector<std::vector<Int>>& m) {
  // Bareiss fraction-free elimination with full pivoting; exact over Z.
  std::vector<std::vector<Int>> a = m;
  const std::size_t n = a.size();
  Int prev(1);
  std::size_t rank = 0;
  for (std::size_t col = 0; rank < n && col < n; ++rank, ++col) {
    std::size_t pr = n, pc = n;
    for (std::size_t i = rank; i < n && pr == n; ++i)
      for (std::size_t j = rank; j < n; ++j)
        if (a[i][j] != 0) {
          pr = i;
          pc = j;
          break;
        }
    if (pr == n) return static_cast<int>(rank);
    std::swap(a[rank], a[pr]);
    for (std::size_t i = 0; i < n; ++i) std::swap(a[i][rank], a[i][pc]);
    for (std::size_t i = rank + 1; i < n; ++i) {
      for (std::size_t j = rank + 1; j < n; ++j) {
        a[i][j] = (a[rank][rank] * a[i][j] - a[i][rank] * a[rank][j]) / prev;
      }
      a[i][rank] = 0;
    }
    prev = a[rank][rank];
  }
  return static_cast<int>(rank);
}

bool quadratic_is_reducible(std::span<const Int> a, int n) {
  const auto basis = veronese_basis(n, 2);
  if (a.size() != basis.size())
    throw std::invalid_argument("quadratic_is_reducible: coefficient count != N(n,2)");
  // doubled Gram matrix keeps entries integral: diag 2*a_ii, off-diag a_ij
  std::vector<std::vector<Int>> g(n, std::vector<Int>(n, Int(0)));
  for (std::size_t row = 0; row < basis.size(); ++row) {
    const auto& e = basis.exponents[row];
    int i = -1, j = -1;
    for (int v = 0; v < n; ++v) {
      if (e[v] == 2) i = j = v;
      if (e[v] == 1) (i < 0 ? i : j) = v;
    }
    if (i == j) {
      g[i][i] = 2 * a[row];
    } else {
      g[i][j] = a[row];
      g[j][i] = a[row];
    }
  }
  return symmetric_rank(g) <= 2;
}

}  // namespace solcensus
