#pragma once

#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "solcensus/numeric.hpp"

namespace solcensus {

// C_{n,d}(d1,d2) = d!(n+d1-1)!/(d1!(n+d-1)!) + d!(n+d2-1)!/(d2!(n+d-1)!),
// exact. Requires n >= 1, d1,d2 >= 1, d1+d2 = d.
Rat c_nd(int n, int d, int d1, int d2);

struct Lemma24Result {
  Rat lhs;     // (n+d)(n+d-1)/(n-1)
  Int rhs;     // binom(n+d, d)
  bool holds;  // lhs < rhs
};

// Strict comparison (n+d)(n+d-1)/(n-1) < binom(n+d,d); domain n,d >= 3.
Lemma24Result lemma24_holds(int n, int d);

struct CndMax {
  Rat value;
  std::vector<std::pair<int, int>> argmax;  // all splits attaining the max
};

// Maximum of C_{n,d} over splits d1+d2=d with d1,d2 >= 1.
CndMax c_nd_max(int n, int d);

struct RegimeReport {
  std::size_t N = 0;
  long threshold = 0;                // floor((1 - C_{n,d}(1,d-1)) * N)
  std::vector<long> admissible_k;    // {k >= 2 : k < threshold, (k-1)*2^k < N}
  // (d1, d2, M) with M = binom(n+d1-1, n-1) + binom(n+d2-1, n-1)
  std::vector<std::tuple<int, int, Int>> m_values;
};

RegimeReport regime_report(int n, int d);

// Exact rank of an integer symmetric matrix via fraction-free elimination.
int symmetric_rank(const std::vector<std::vector<Int>>& m);

// Quadratic form (d = 2) reducibility over C: true iff Gram rank <= 2.
bool quadratic_is_reducible(std::span<const Int> a, int n);

}  // namespace solcensus
