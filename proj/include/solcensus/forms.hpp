#pragma once

#include <optional>
#include <span>
#include <vector>

#include "solcensus/numeric.hpp"

namespace solcensus {

// Monomial basis of degree-d forms in n variables, rows in descending
// lexicographic order on exponent vectors: (d,0,...,0) first, (0,...,0,d)
// last. A coefficient vector a of length N = binom(n+d-1, d) against this
// basis defines the form f_a(x) = sum_i a_i * x^exponents[i].
struct VeroneseBasis {
  int n = 0;
  int d = 0;
  std::vector<std::vector<int>> exponents;

  std::size_t size() const { return exponents.size(); }
};

std::size_t veronese_dimension(int n, int d);
VeroneseBasis veronese_basis(int n, int d);

namespace detail {

// pow[j*(d+1)+e] = x[j]^e, shared by value and gradient evaluation.
template <typename T>
void fill_power_table(const VeroneseBasis& b, std::span<const T> x, std::vector<T>& pow) {
  const int cols = b.d + 1;
  pow.assign(static_cast<std::size_t>(b.n) * cols, T(1));
  for (int j = 0; j < b.n; ++j)
    for (int e = 1; e <= b.d; ++e)
      pow[static_cast<std::size_t>(j) * cols + e] =
          pow[static_cast<std::size_t>(j) * cols + e - 1] * x[j];
}

template <typename T>
void check_sizes(const VeroneseBasis& b, std::span<const T> a, std::span<const T> x,
                 const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": coefficient count != basis size");
  if (x.size() != static_cast<std::size_t>(b.n))
    throw std::invalid_argument(std::string(what) + ": point arity != n");
}

}  // namespace detail

template <typename T>
T evaluate_form(const VeroneseBasis& b, std::span<const T> a, std::span<const T> x) {
  detail::check_sizes(b, a, x, "evaluate_form");
  std::vector<T> pow;
  detail::fill_power_table(b, x, pow);
  const int cols = b.d + 1;
  T acc(0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    T term(a[i]);
    const auto& e = b.exponents[i];
    for (int j = 0; j < b.n; ++j)
      if (e[j] != 0) term *= pow[static_cast<std::size_t>(j) * cols + e[j]];
    acc += term;
  }
  return acc;
}

template <typename T>
std::vector<T> gradient_form(const VeroneseBasis& b, std::span<const T> a, std::span<const T> x) {
  detail::check_sizes(b, a, x, "gradient_form");
  std::vector<T> pow;
  detail::fill_power_table(b, x, pow);
  const int cols = b.d + 1;
  std::vector<T> grad(static_cast<std::size_t>(b.n), T(0));
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& e = b.exponents[i];
    for (int j = 0; j < b.n; ++j) {
      if (e[j] == 0) continue;
      T term(a[i]);
      term *= e[j];
      for (int l = 0; l < b.n; ++l) {
        const int el = (l == j) ? e[l] - 1 : e[l];
        if (el != 0) term *= pow[static_cast<std::size_t>(l) * cols + el];
      }
      grad[j] += term;
    }
  }
  return grad;
}

struct ContentSplit {
  Int content;                                // 0 for the zero vector
  std::optional<std::vector<Int>> primitive;  // absent for the zero vector
};

ContentSplit content_and_primitive(std::span<const Int> a);

}  // namespace solcensus
