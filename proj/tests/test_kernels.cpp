#include "solcensus/kernels/batch_eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "solcensus/numeric.hpp"
#include "solcensus/rng.hpp"

using namespace solcensus;
using kernels::active_backend;
using kernels::avx2_backend;
using kernels::scalar_backend;

namespace {

struct DoubleBatch {
  std::vector<double> coef;
  std::vector<double> coords;
  std::size_t count;
};

DoubleBatch random_double_batch(const VeroneseBasis& basis, Rng& rng, std::size_t count) {
  DoubleBatch b;
  b.count = count;
  for (std::size_t i = 0; i < basis.size(); ++i)
    b.coef.push_back((rng.next_double() * 2.0 - 1.0) * 10.0);
  if (!b.coef.empty()) b.coef[rng.next_below(b.coef.size())] = 0.0;
  for (std::size_t k = 0; k < count * basis.n; ++k)
    b.coords.push_back((rng.next_double() * 2.0 - 1.0) * 3.0);
  return b;
}

}  // namespace

TEST_CASE("kernels: scalar double evaluation matches exact rational arithmetic") {
  Rng rng(600613);
  for (auto [n, d] : std::vector<std::pair<int, int>>{{2, 2}, {3, 2}, {2, 3}, {3, 3}, {4, 2}}) {
    auto basis = veronese_basis(n, d);
    auto batch = random_double_batch(basis, rng, 16);
    std::vector<double> out(batch.count);
    scalar_backend().eval_double(basis, batch.coef.data(), batch.coords.data(), batch.count,
                                 out.data());

    std::vector<Rat> coef_q(batch.coef.begin(), batch.coef.end());
    for (std::size_t k = 0; k < batch.count; ++k) {
      std::vector<Rat> x_q(batch.coords.begin() + k * n, batch.coords.begin() + (k + 1) * n);
      Rat exact = evaluate_form<Rat>(basis, std::span<const Rat>(coef_q), std::span<const Rat>(x_q));
      double want = exact.get_d();
      double scale = std::max(1.0, std::abs(want));
      CHECK(std::abs(out[k] - want) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("kernels: vector double path is bit-identical to scalar") {
  const auto* vec = avx2_backend();
  if (!vec) return;  // nothing to compare on this machine

  Rng rng(171717);
  for (auto [n, d] : std::vector<std::pair<int, int>>{{2, 2}, {3, 2}, {2, 3}, {3, 3}, {4, 3}}) {
    auto basis = veronese_basis(n, d);
    for (std::size_t count : {1ul, 2ul, 3ul, 4ul, 5ul, 7ul, 64ul, 257ul}) {
      auto batch = random_double_batch(basis, rng, count);
      std::vector<double> a(count), b(count);
      scalar_backend().eval_double(basis, batch.coef.data(), batch.coords.data(), count, a.data());
      vec->eval_double(basis, batch.coef.data(), batch.coords.data(), count, b.data());
      for (std::size_t k = 0; k < count; ++k)
        CHECK(std::bit_cast<std::uint64_t>(a[k]) == std::bit_cast<std::uint64_t>(b[k]));
    }
  }

  // A shape too wide for the in-register power table must still agree (the
  // vector entry point falls back internally).
  auto wide = veronese_basis(2, 80);
  auto batch = random_double_batch(wide, rng, 9);
  std::vector<double> a(batch.count), b(batch.count);
  scalar_backend().eval_double(wide, batch.coef.data(), batch.coords.data(), batch.count, a.data());
  vec->eval_double(wide, batch.coef.data(), batch.coords.data(), batch.count, b.data());
  for (std::size_t k = 0; k < batch.count; ++k)
    CHECK(std::bit_cast<std::uint64_t>(a[k]) == std::bit_cast<std::uint64_t>(b[k]));
}

TEST_CASE("kernels: modular paths agree exactly and with big-integer reference") {
  Rng rng(424242);
  const auto* vec = avx2_backend();
  std::vector<std::uint64_t> moduli{2,       3,         13,         125,      9409,
                                    912673,  (1u << 26) - 1, (1u << 26), 67108879, 1000003,
                                    2147483647ull, 1000000000039ull};
  for (auto [n, d] : std::vector<std::pair<int, int>>{{2, 2}, {3, 2}, {2, 3}, {3, 3}}) {
    auto basis = veronese_basis(n, d);
    for (std::uint64_t m : moduli) {
      const std::size_t count = 37;
      std::vector<std::uint64_t> coef, coords;
      for (std::size_t i = 0; i < basis.size(); ++i) coef.push_back(rng.next_u64() % m);
      for (std::size_t k = 0; k < count * basis.n; ++k) coords.push_back(rng.next_u64() % m);
      std::vector<std::uint64_t> a(count), b(count);
      scalar_backend().eval_mod(basis, coef.data(), coords.data(), count, m, a.data());
      if (vec) {
        vec->eval_mod(basis, coef.data(), coords.data(), count, m, b.data());
        CHECK(a == b);
      }
      // big-integer reference on a prefix
      for (std::size_t k = 0; k < 8; ++k) {
        std::vector<Int> cq(coef.begin(), coef.end());
        std::vector<Int> xq(coords.begin() + k * n, coords.begin() + (k + 1) * n);
        Int v = evaluate_form<Int>(basis, std::span<const Int>(cq), std::span<const Int>(xq));
        Int r;
        Int mm = Int(static_cast<unsigned long>(m));
        mpz_fdiv_r(r.get_mpz_t(), v.get_mpz_t(), mm.get_mpz_t());
        CHECK(Int(static_cast<unsigned long>(a[k])) == r);
      }
    }
  }
}

TEST_CASE("kernels: runtime dispatch picks a coherent backend") {
  const auto& act = active_backend();
  std::string name = act.name;
  CHECK((name == "scalar" || name == "avx2"));
  if (avx2_backend())
    CHECK(name == "avx2");
  else
    CHECK(name == "scalar");
#if defined(__x86_64__)
  CHECK((avx2_backend() != nullptr) == static_cast<bool>(__builtin_cpu_supports("avx2")));
#endif

  // The convenience wrappers route through the active backend.
  auto basis = veronese_basis(3, 2);
  Rng rng(99);
  auto batch = random_double_batch(basis, rng, 11);
  std::vector<double> a(batch.count), b(batch.count);
  kernels::batch_eval_double(basis, batch.coef.data(), batch.coords.data(), batch.count, a.data());
  act.eval_double(basis, batch.coef.data(), batch.coords.data(), batch.count, b.data());
  for (std::size_t k = 0; k < batch.count; ++k)
    CHECK(std::bit_cast<std::uint64_t>(a[k]) == std::bit_cast<std::uint64_t>(b[k]));

  std::vector<std::uint64_t> coef{1, 2, 3, 4, 5, 6}, coords{5, 6, 0, 1, 2, 3};
  std::vector<std::uint64_t> u(2), v(2);
  kernels::batch_eval_mod(basis, coef.data(), coords.data(), 2, 7, u.data());
  act.eval_mod(basis, coef.data(), coords.data(), 2, 7, v.data());
  CHECK(u == v);
}
