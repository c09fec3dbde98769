#include "solcensus/padic.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "solcensus/numeric.hpp"

namespace solcensus {

namespace {

void check_prime(long p) {
  if (p < 2) throw std::invalid_argument("p must be a prime >= 2");
  Int pz(p);
  if (mpz_probab_prime_p(pz.get_mpz_t(), 32) == 0)
    throw std::invalid_argument("p must be prime");
}

long vp_u64(std::uint64_t v, std::uint64_t p) {
  long k = 0;
  while (v % p == 0) {
    v /= p;
    ++k;
  }
  return k;
}

std::uint64_t addmod_u64(std::uint64_t x, std::uint64_t y, std::uint64_t m) {
  std::uint64_t s = x + y;
  return s >= m ? s - m : s;
}

Int pow_int(long p, long e) {
  Int r;
  mpz_ui_pow_ui(r.get_mpz_t(), static_cast<unsigned long>(p), static_cast<unsigned long>(e));
  return r;
}

Int mod_floor(const Int& v, const Int& m) {
  Int r;
  mpz_fdiv_r(r.get_mpz_t(), v.get_mpz_t(), m.get_mpz_t());
  return r;
}

// Form value and gradient over Z/(m) for m < 2^62; coordinates must already
// be reduced mod m.
struct EvalU64 {
  const VeroneseBasis* basis = nullptr;
  std::uint64_t mod = 1;
  std::vector<std::uint64_t> coef;
  std::vector<std::uint64_t> pw;

  void reset(const VeroneseBasis& b, std::span<const Int> a, std::uint64_t m) {
    basis = &b;
    mod = m;
    coef.resize(b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
      coef[i] = mpz_fdiv_ui(a[i].get_mpz_t(), static_cast<unsigned long>(m));
    pw.assign(static_cast<std::size_t>(b.n) * (b.d + 1), 0);
  }

  void fill_pw(const std::uint64_t* x) {
    const int n = basis->n, d = basis->d;
    for (int j = 0; j < n; ++j) {
      std::uint64_t* row = pw.data() + static_cast<std::size_t>(j) * (d + 1);
      row[0] = 1;
      for (int e = 1; e <= d; ++e) row[e] = mulmod_u64(row[e - 1], x[j], mod);
    }
  }

  std::uint64_t value(const std::uint64_t* x) {
    fill_pw(x);
    const int n = basis->n, d = basis->d;
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < basis->size(); ++i) {
      if (coef[i] == 0) continue;
      std::uint64_t t = coef[i];
      const auto& e = basis->exponents[i];
      for (int j = 0; j < n; ++j)
        if (e[j] > 0) t = mulmod_u64(t, pw[static_cast<std::size_t>(j) * (d + 1) + e[j]], mod);
      acc = addmod_u64(acc, t, mod);
    }
    return acc;
  }

  void gradient(const std::uint64_t* x, std::uint64_t* g) {
    fill_pw(x);
    const int n = basis->n, d = basis->d;
    for (int j = 0; j < n; ++j) g[j] = 0;
    for (std::size_t i = 0; i < basis->size(); ++i) {
      if (coef[i] == 0) continue;
      const auto& e = basis->exponents[i];
      for (int j = 0; j < n; ++j) {
        if (e[j] == 0) continue;
        std::uint64_t t = mulmod_u64(coef[i], static_cast<std::uint64_t>(e[j]) % mod, mod);
        for (int l = 0; l < n; ++l) {
          int ee = e[l] - (l == j ? 1 : 0);
          if (ee > 0) t = mulmod_u64(t, pw[static_cast<std::size_t>(l) * (d + 1) + ee], mod);
        }
        g[j] = addmod_u64(g[j], t, mod);
      }
    }
  }
};

// Arbitrary-modulus fallback; used once p^level outgrows 2^62.
struct EvalMpz {
  const VeroneseBasis* basis = nullptr;
  Int mod = 1;
  std::vector<Int> coef;

  void reset(const VeroneseBasis& b, std::span<const Int> a, const Int& m) {
    basis = &b;
    mod = m;
    coef.assign(a.begin(), a.end());
    for (auto& c : coef) c = mod_floor(c, mod);
  }

  Int value(std::span<const Int> x) const {
    return mod_floor(evaluate_form<Int>(*basis, std::span<const Int>(coef), x), mod);
  }

  std::vector<Int> gradient(std::span<const Int> x) const {
    auto g = gradient_form<Int>(*basis, std::span<const Int>(coef), x);
    for (auto& v : g) v = mod_floor(v, mod);
    return g;
  }
};

// Lex odometer over [0, p)^n; returns false after the last tuple.
bool odometer_step(std::vector<std::uint64_t>& t, std::uint64_t p) {
  for (std::size_t i = t.size(); i-- > 0;) {
    if (++t[i] < p) return true;
    t[i] = 0;
  }
  return false;
}

}  // namespace

std::optional<long> vp(const Int& m, long p) {
  check_prime(p);
  if (m == 0) return std::nullopt;
  Int tmp, pz(p);
  return static_cast<long>(mpz_remove(tmp.get_mpz_t(), m.get_mpz_t(), pz.get_mpz_t()));
}

namespace {
// valuation of a known-nonzero integer
long vp_nz(const Int& m, long p) { return *vp(m, p); }
}  // namespace

bool is_square_in_Qp(const Int& m, long p) {
  check_prime(p);
  if (m == 0) throw std::invalid_argument("square test requires a nonzero argument");
  long v = vp_nz(m, p);
  if (v % 2 != 0) return false;
  Int u = m / pow_int(p, v);
  if (p == 2) return mpz_fdiv_ui(u.get_mpz_t(), 8) == 1;
  std::uint64_t r = mpz_fdiv_ui(u.get_mpz_t(), static_cast<unsigned long>(p));
  return powmod_u64(r, static_cast<std::uint64_t>(p - 1) / 2, static_cast<std::uint64_t>(p)) == 1;
}

SolubilityVerdict zp_solubility(const VeroneseBasis& basis, std::span<const Int> a, long p,
                                const ZpOptions& opt) {
  check_prime(p);
  if (a.size() != basis.size())
    throw std::invalid_argument("coefficient count must match the monomial basis");
  if (std::all_of(a.begin(), a.end(), [](const Int& c) { return c == 0; }))
    throw std::invalid_argument("coefficient vector must be nonzero");
  if (opt.max_level < 1 || opt.frontier_cap < 1 || opt.work_cap < 1)
    throw std::invalid_argument("max_level, frontier_cap and work_cap must be positive");

  SolubilityVerdict out;
  out.p = p;

  std::vector<Int> b(a.begin(), a.end());
  long cv = 0;
  if (opt.strip_content) {
    for (const Int& c : b)
      if (c != 0) {
        long v = vp_nz(c, p);
        if (cv == 0 || v < cv) cv = v;
        if (cv == 0) break;
      }
    if (cv > 0) {
      Int q = pow_int(p, cv);
      for (Int& c : b) mpz_divexact(c.get_mpz_t(), c.get_mpz_t(), q.get_mpz_t());
    }
  }
  const std::span<const Int> bs(b);

  const int n = basis.n;
  const Int u64_limit = Int(1) << 62;
  const std::uint64_t pu = static_cast<std::uint64_t>(p);

  EvalU64 evu;
  EvalMpz evz;
  std::vector<std::uint64_t> gu(static_cast<std::size_t>(n));

  // Residue-gradient certification at level j. Nonzero residues mod p^j have
  // exact valuation < j, so alpha is exact whenever some coordinate survives.
  auto hensel_from_residue = [&](const std::vector<Int>& point, long j, long alpha, int pivot) {
    HenselCertificate c;
    c.p = p;
    c.point = point;
    c.level = j;
    c.alpha = alpha;
    c.pivot = pivot;
    c.content_valuation = cv;
    out.kind = SolubilityVerdict::Kind::soluble;
    out.hensel = std::move(c);
  };

  auto try_cert_u64 = [&](const std::uint64_t* x, long j) -> bool {
    evu.gradient(x, gu.data());
    long alpha = -1;
    int pivot = -1;
    for (int i = 0; i < n; ++i) {
      if (gu[i] == 0) continue;
      long v = vp_u64(gu[i], pu);
      if (alpha < 0 || v < alpha) {
        alpha = v;
        pivot = i;
      }
    }
    if (alpha < 0 || j < 2 * alpha + 1) return false;
    std::vector<Int> point;
    point.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) point.emplace_back(static_cast<unsigned long>(x[i]));
    hensel_from_residue(point, j, alpha, pivot);
    return true;
  };

  auto try_cert_mpz = [&](std::span<const Int> x, long j) -> bool {
    auto g = evz.gradient(x);
    long alpha = -1;
    int pivot = -1;
    for (int i = 0; i < n; ++i) {
      if (g[i] == 0) continue;
      long v = vp_nz(g[i], p);
      if (alpha < 0 || v < alpha) {
        alpha = v;
        pivot = i;
      }
    }
    if (alpha < 0 || j < 2 * alpha + 1) return false;
    hensel_from_residue(std::vector<Int>(x.begin(), x.end()), j, alpha, pivot);
    return true;
  };

  // An exact integer zero of the stripped form is a Z_p zero at every prime;
  // it is nontrivial because the residue point is primitive. In class mode it
  // must still convert into a certificate that pins down the whole class.
  auto exact_hit = [&](const std::vector<Int>& z) -> bool {
    if (!opt.class_stable) {
      out.kind = SolubilityVerdict::Kind::soluble;
      out.exact_zero = ExactZeroCertificate{z, cv};
      return true;
    }
    auto g = gradient_form<Int>(basis, bs, std::span<const Int>(z));
    long alpha = -1;
    int pivot = -1;
    for (int i = 0; i < n; ++i) {
      if (g[i] == 0) continue;
      long v = vp_nz(g[i], p);
      if (alpha < 0 || v < alpha) {
        alpha = v;
        pivot = i;
      }
    }
    if (alpha < 0) return false;
    long j = 2 * alpha + 1;
    if (j > opt.max_level) return false;
    Int mj = pow_int(p, j);
    std::vector<Int> point;
    point.reserve(static_cast<std::size_t>(n));
    for (const Int& c : z) point.push_back(mod_floor(c, mj));
    hensel_from_residue(point, j, alpha, pivot);
    return true;
  };

  // Balanced lift first (small negative coordinates are the common shape of
  // integer zeros), canonical lift as the fallback when they differ.
  auto try_exact = [&](const std::vector<Int>& canon, const Int& m) -> bool {
    std::vector<Int> bal(canon);
    bool differ = false;
    Int half = m / 2;
    for (Int& c : bal)
      if (c > half) {
        c -= m;
        differ = true;
      }
    if (evaluate_form<Int>(basis, bs, std::span<const Int>(bal)) == 0) return exact_hit(bal);
    if (differ && evaluate_form<Int>(basis, bs, std::span<const Int>(canon)) == 0)
      return exact_hit(canon);
    return false;
  };

  // Level-synchronous frontier. Level 1 expands a virtual origin parent with
  // step 1 over all residues mod p, skipping the non-primitive zero tuple;
  // deeper levels expand x to x + p^(j-1) t, preserving primitivity.
  std::vector<std::uint64_t> fr;
  std::vector<Int> frz;
  bool big = false;

  Int modz = 1;
  std::uint64_t work = 0;

  auto unknown_return = [&](UnknownOutcome::Reason why, long j, std::size_t fsz) {
    out.kind = SolubilityVerdict::Kind::unknown;
    out.unknown = UnknownOutcome{why, j, fsz, cv};
    return out;
  };

  for (long j = 1; j <= opt.max_level; ++j) {
    Int mz = modz * p;
    bool jbig = big || mz > u64_limit;

    if (jbig && !big) {
      frz.clear();
      frz.reserve(fr.size());
      for (std::uint64_t c : fr) frz.emplace_back(static_cast<unsigned long>(c));
      fr.clear();
      fr.shrink_to_fit();
      big = true;
    }

    std::size_t sols = 0;
    std::size_t exact_checked = 0;
    std::vector<std::uint64_t> t(static_cast<std::size_t>(n), 0);

    if (!big) {
      const std::uint64_t mu = mpz_get_ui(mz.get_mpz_t());
      const std::uint64_t step = mpz_get_ui(modz.get_mpz_t());
      evu.reset(basis, bs, mu);
      std::vector<std::uint64_t> nfr;
      std::vector<std::uint64_t> child(static_cast<std::size_t>(n));
      std::vector<Int> canon(static_cast<std::size_t>(n));
      const std::size_t parents = (j == 1) ? 1 : fr.size() / static_cast<std::size_t>(n);
      for (std::size_t pi = 0; pi < parents; ++pi) {
        const std::uint64_t* par = (j == 1) ? nullptr : fr.data() + pi * n;
        std::fill(t.begin(), t.end(), 0);
        bool skip_first = (j == 1);
        do {
          if (skip_first) {
            skip_first = false;
            continue;
          }
          for (int i = 0; i < n; ++i) child[i] = (par ? par[i] : 0) + step * t[i];
          if (++work > opt.work_cap) return unknown_return(UnknownOutcome::Reason::work_cap, j, sols);
          if (evu.value(child.data()) != 0) continue;
          if (try_cert_u64(child.data(), j)) return out;
          if (exact_checked < opt.exact_zero_scan) {
            ++exact_checked;
            for (int i = 0; i < n; ++i) canon[i] = Int(static_cast<unsigned long>(child[i]));
            if (try_exact(canon, mz)) return out;
          }
          if (sols + 1 > opt.frontier_cap)
            return unknown_return(UnknownOutcome::Reason::frontier_cap, j, sols + 1);
          nfr.insert(nfr.end(), child.begin(), child.end());
          ++sols;
        } while (odometer_step(t, pu));
      }
      fr = std::move(nfr);
    } else {
      evz.reset(basis, bs, mz);
      std::vector<Int> nfr;
      std::vector<Int> child(static_cast<std::size_t>(n));
      const std::size_t parents = (j == 1) ? 1 : frz.size() / static_cast<std::size_t>(n);
      for (std::size_t pi = 0; pi < parents; ++pi) {
        const Int* par = (j == 1) ? nullptr : frz.data() + pi * n;
        std::fill(t.begin(), t.end(), 0);
        bool skip_first = (j == 1);
        do {
          if (skip_first) {
            skip_first = false;
            continue;
          }
          for (int i = 0; i < n; ++i) {
            child[i] = modz * static_cast<unsigned long>(t[i]);
            if (par) child[i] += par[i];
          }
          if (++work > opt.work_cap) return unknown_return(UnknownOutcome::Reason::work_cap, j, sols);
          if (evz.value(std::span<const Int>(child)) != 0) continue;
          if (try_cert_mpz(std::span<const Int>(child), j)) return out;
          if (exact_checked < opt.exact_zero_scan) {
            ++exact_checked;
            if (try_exact(child, mz)) return out;
          }
          if (sols + 1 > opt.frontier_cap)
            return unknown_return(UnknownOutcome::Reason::frontier_cap, j, sols + 1);
          nfr.insert(nfr.end(), child.begin(), child.end());
          ++sols;
        } while (odometer_step(t, pu));
      }
      frz = std::move(nfr);
    }

    if (sols == 0) {
      // Empty level j: a nontrivial Z_p zero would scale to a primitive one
      // and reduce to a solution mod p^j, so none exists. Emptiness persists
      // at level j + 1 (and beyond), which is the level we report.
      out.kind = SolubilityVerdict::Kind::insoluble;
      out.exhaustion = InsolubleExhaustion{j + 1, j, cv};
      return out;
    }
    modz = mz;
  }

  std::size_t fsz = big ? frz.size() / static_cast<std::size_t>(n) : fr.size() / static_cast<std::size_t>(n);
  return unknown_return(UnknownOutcome::Reason::depth_exceeded, opt.max_level, fsz);
}

Rat stability_radius(const HenselCertificate& cert) {
  if (cert.p < 2 || cert.alpha < 0) throw std::invalid_argument("malformed certificate");
  Rat r(Int(1), pow_int(cert.p, 2 * cert.alpha));
  r.canonicalize();
  return r;
}

std::optional<bool> smooth_reduction(const VeroneseBasis& basis, std::span<const Int> a, long p,
                                     std::uint64_t budget) {
  check_prime(p);
  if (a.size() != basis.size())
    throw std::invalid_argument("coefficient count must match the monomial basis");
  if (std::all_of(a.begin(), a.end(), [](const Int& c) { return c == 0; }))
    throw std::invalid_argument("coefficient vector must be nonzero");

  Int total = 1;
  for (int i = 0; i < basis.n; ++i) total *= p;
  if (total > Int(budget)) return std::nullopt;

  const int n = basis.n;
  EvalU64 ev;
  ev.reset(basis, a, static_cast<std::uint64_t>(p));
  std::vector<std::uint64_t> x(static_cast<std::size_t>(n), 0);
  std::vector<std::uint64_t> g(static_cast<std::size_t>(n));
  bool first = true;
  do {
    if (first) {  // skip the origin
      first = false;
      continue;
    }
    if (ev.value(x.data()) != 0) continue;
    ev.gradient(x.data(), g.data());
    if (std::all_of(g.begin(), g.end(), [](std::uint64_t v) { return v == 0; })) return false;
  } while (odometer_step(x, static_cast<std::uint64_t>(p)));
  return true;
}

bool hasse_weil_guarantee(int n, int d, long p) {
  if (n != 3) throw std::invalid_argument("point guarantee applies to ternary forms only");
  if (d < 1) throw std::invalid_argument("degree must be positive");
  check_prime(p);
  Int g = Int(d - 1) * (d - 2) / 2;
  Int lhs = Int(p + 1) * (p + 1);
  Int rhs = 4 * g * g * p;
  return lhs > rhs;
}

bool binary_quadratic_oracle(std::span<const Int> a, std::optional<long> place) {
  if (a.size() != 3) throw std::invalid_argument("binary quadratic has three coefficients");
  if (a[0] == 0 && a[1] == 0 && a[2] == 0)
    throw std::invalid_argument("coefficient vector must be nonzero");
  Int disc = a[1] * a[1] - 4 * a[0] * a[2];
  if (!place.has_value()) return a[0] == 0 || disc >= 0;
  long p = *place;
  check_prime(p);
  return a[0] == 0 || disc == 0 || is_square_in_Qp(disc, p);
}

}  // namespace solcensus
