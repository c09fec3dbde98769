#include "solcensus/densities.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>

#include "solcensus/rng.hpp"

namespace solcensus {
namespace {

Int mod_floor(const Int& x, const Int& m) {
  Int r;
  mpz_fdiv_r(r.get_mpz_t(), x.get_mpz_t(), m.get_mpz_t());
  return r;
}

bool is_prime_long(long p) {
  if (p < 2) return false;
  for (long q = 2; q * q <= p; ++q)
    if (p % q == 0) return false;
  return true;
}

void check_prime(long p, const char* what) {
  if (!is_prime_long(p)) throw std::invalid_argument(std::string(what) + ": p must be prime");
}

std::uint64_t pow_u64_checked(long p, int r) {
  std::uint64_t m = 1;
  for (int i = 0; i < r; ++i) {
    if (m > (1ull << 62) / static_cast<std::uint64_t>(p))
      throw std::runtime_error("sigma_p_level: p^r overflows the class arithmetic");
    m *= static_cast<std::uint64_t>(p);
  }
  return m;
}

Int pow_int(long p, long e) {
  Int out;
  mpz_ui_pow_ui(out.get_mpz_t(), static_cast<unsigned long>(p), static_cast<unsigned long>(e));
  return out;
}

// Allowed least non-negative representatives per coordinate, from the
// congruence and representative-box constraints at modulus M = p^r.
struct ClassGrid {
  std::uint64_t M = 1;
  std::vector<std::vector<std::uint64_t>> values;
  std::uint64_t total = 1;
};

ClassGrid build_grid(int N, long p, int r, std::uint64_t M, const PadicCondition& cond) {
  if (cond.modulus < 1) throw std::invalid_argument("sigma_p_level: condition modulus must be >= 1");
  long v = 0;
  if (cond.modulus > 1) {
    auto val = vp(cond.modulus, p);
    v = val.value_or(0);
    if (v > r) throw std::invalid_argument("sigma_p_level: congruence is finer than level r");
    if (cond.residue.size() != static_cast<std::size_t>(N))
      throw std::invalid_argument("sigma_p_level: congruence residue arity != N");
  }
  const bool boxed = !cond.representative_box.empty();
  if (boxed && cond.representative_box.size() != static_cast<std::size_t>(N))
    throw std::invalid_argument("sigma_p_level: representative box arity != N");
  const std::uint64_t pv = pow_u64_checked(p, static_cast<int>(v));
  ClassGrid g;
  g.M = M;
  g.values.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    std::uint64_t from = 0, to = M - 1;
    if (boxed) {
      const auto& [l, h] = cond.representative_box[static_cast<std::size_t>(i)];
      if (l < 0 || h > 1 || !(l < h))
        throw std::invalid_argument("sigma_p_level: box intervals must sit inside [0,1] with interior");
      Int lov, hiv;
      mpz_cdiv_q(lov.get_mpz_t(), Int(Int(M) * l.get_num()).get_mpz_t(), l.get_den().get_mpz_t());
      mpz_fdiv_q(hiv.get_mpz_t(), Int(Int(M) * h.get_num()).get_mpz_t(), h.get_den().get_mpz_t());
      if (hiv < lov) {
        g.total = 0;
        return g;
      }
      from = std::max<long>(0, lov.get_si());
      to = std::min<std::uint64_t>(to, hiv.get_ui());
    }
    auto& list = g.values[static_cast<std::size_t>(i)];
    if (v > 0) {
      const std::uint64_t res = mod_floor(cond.residue[static_cast<std::size_t>(i)], Int(pv)).get_ui();
      std::uint64_t first = from + (res + pv - from % pv) % pv;
      for (std::uint64_t x = first; x <= to; x += pv) list.push_back(x);
    } else {
      for (std::uint64_t x = from; x <= to; ++x) list.push_back(x);
    }
    if (list.empty()) {
      g.total = 0;
      return g;
    }
    g.total *= list.size();
  }
  return g;
}

std::vector<std::pair<std::vector<int>, std::uint64_t>> reduce_terms(const ThinFormP& P,
                                                                     std::uint64_t M) {
  std::vector<std::pair<std::vector<int>, std::uint64_t>> out;
  for (const auto& [e, c] : P.terms) out.emplace_back(e, mod_floor(c, Int(M)).get_ui());
  return out;
}

std::uint64_t eval_terms_mod(const std::vector<std::pair<std::vector<int>, std::uint64_t>>& terms,
                             const std::vector<std::uint64_t>& digits, std::uint64_t M) {
  std::uint64_t acc = 0;
  for (const auto& [e, c] : terms) {
    std::uint64_t t = c;
    for (std::size_t j = 0; j < digits.size(); ++j)
      for (int rep = 0; rep < e[j]; ++rep) t = mulmod_u64(t, digits[j], M);
    acc = (acc + t) % M;
  }
  return acc;
}

// Runs fn over every grid class whose outer-coordinate index falls in
// [ob, oe), filling digits with the representatives.
void scan_grid(const ClassGrid& g, std::uint64_t ob, std::uint64_t oe,
               const std::function<void(const std::vector<std::uint64_t>&)>& fn) {
  const int N = static_cast<int>(g.values.size());
  std::vector<std::uint64_t> digits(static_cast<std::size_t>(N));
  std::vector<std::size_t> idx(static_cast<std::size_t>(N), 0);
  for (std::uint64_t oi = ob; oi < oe; ++oi) {
    digits[0] = g.values[0][static_cast<std::size_t>(oi)];
    std::fill(idx.begin() + 1, idx.end(), 0);
    for (;;) {
      for (int i = 1; i < N; ++i) digits[static_cast<std::size_t>(i)] = g.values[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
      fn(digits);
      int d = N - 1;
      while (d >= 1 && idx[static_cast<std::size_t>(d)] + 1 == g.values[static_cast<std::size_t>(d)].size()) idx[static_cast<std::size_t>(d)] = 0, --d;
      if (d < 1) break;
      ++idx[static_cast<std::size_t>(d)];
    }
  }
}

// Splits [0, total) into chunks, runs body(chunk, begin, end) on a pool of
// jobs threads, and hands the per-chunk results to fold in chunk order.
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

Rat scale_mass(const Int& count, long p, int r, int N) {
  Rat out(count, pow_int(p, static_cast<long>(r) * (N - 1)));
  out.canonicalize();
  return out;
}

// --- fiber mode: exact root counting in the last coordinate ---

Int count_roots_rec(const std::vector<Int>& g, long p, int r) {
  if (r <= 0) return 1;
  const Int M = pow_int(p, r);
  bool zero = true;
  for (const Int& c : g) zero = zero && mod_floor(c, M) == 0;
  if (zero) return M;
  Int total = 0;
  for (long t0 = 0; t0 < p; ++t0) {
    Int val = 0;
    for (std::size_t j = g.size(); j-- > 0;) val = mod_floor(val * t0 + g[j], Int(p));
    if (val != 0) continue;
    if (r == 1) {
      total += 1;
      continue;
    }
    // substitute t = t0 + p s exactly, then strip the content power of p
    std::vector<Int> g1(g.size(), Int(0));
    std::vector<Int> pw{Int(1)};  // (t0 + p s)^j, ascending in s
    for (std::size_t j = 0; j < g.size(); ++j) {
      for (std::size_t l = 0; l < pw.size(); ++l) g1[l] += g[j] * pw[l];
      if (j + 1 < g.size()) {
        std::vector<Int> nx(pw.size() + 1, Int(0));
        for (std::size_t l = 0; l < pw.size(); ++l) {
          nx[l] += pw[l] * t0;
          nx[l + 1] += pw[l] * p;
        }
        pw = std::move(nx);
      }
    }
    long m = r;
    for (const Int& c : g1)
      if (c != 0) m = std::min(m, vp(c, p).value());
    if (m >= r) {
      total += pow_int(p, r - 1);
      continue;
    }
    const Int pm = pow_int(p, m);
    std::vector<Int> h(g1.size());
    for (std::size_t l = 0; l < g1.size(); ++l) h[l] = g1[l] / pm;
    total += pow_int(p, m - 1) * count_roots_rec(h, p, r - static_cast<int>(m));
  }
  return total;
}

// --- sigma_infty helpers ---

struct RatIv {
  Rat lo, hi;
};

RatIv pow_iv(const RatIv& x, int e) {
  if (e == 0) return {Rat(1), Rat(1)};
  auto rpow = [](Rat b, int n) {
    Rat out(1);
    for (int i = 0; i < n; ++i) out *= b;
    return out;
  };
  if (e % 2 == 1 || x.lo >= 0) return {rpow(x.lo, e), rpow(x.hi, e)};
  if (x.hi <= 0) return {rpow(x.hi, e), rpow(x.lo, e)};
  Rat m = std::max(Rat(-x.lo), x.hi);
  return {Rat(0), rpow(m, e)};
}

RatIv thin_interval(const ThinFormP& P, const BoxSpec& region) {
  RatIv acc{Rat(0), Rat(0)};
  for (const auto& [e, c] : P.terms) {
    RatIv t{Rat(1), Rat(1)};
    for (int i = 0; i < P.N; ++i) {
      if (e[static_cast<std::size_t>(i)] == 0) continue;
      const auto& [l, h] = region.intervals[static_cast<std::size_t>(i)];
      RatIv pv = pow_iv({l, h}, e[static_cast<std::size_t>(i)]);
      Rat a = t.lo * pv.lo, b = t.lo * pv.hi, cc = t.hi * pv.lo, d = t.hi * pv.hi;
      t = {std::min(std::min(a, b), std::min(cc, d)), std::max(std::max(a, b), std::max(cc, d))};
    }
    Rat cr(c);
    if (cr >= 0)
      acc = {acc.lo + cr * t.lo, acc.hi + cr * t.hi};
    else
      acc = {acc.lo + cr * t.hi, acc.hi + cr * t.lo};
  }
  return acc;
}

double eval_thin_double(const std::vector<std::pair<std::vector<int>, double>>& terms,
                        const double* y) {
  double acc = 0;
  for (const auto& [e, c] : terms) {
    double t = c;
    for (std::size_t j = 0; j < e.size(); ++j)
      for (int rep = 0; rep < e[j]; ++rep) t *= y[j];
    acc += t;
  }
  return acc;
}

void validate_region(const ThinFormP& P, const BoxSpec& region) {
  if (region.intervals.size() != static_cast<std::size_t>(P.N))
    throw std::invalid_argument("sigma_infty: region arity != N");
  for (const auto& [l, h] : region.intervals)
    if (l < -1 || h > 1 || !(l < h))
      throw std::invalid_argument("sigma_infty: region must sit inside [-1,1] with interior");
}

DensityInterval sigma_infty_impl(const ThinFormP& P, const VeroneseBasis* basis,
                                 const BoxSpec& region, const SigmaInftyOptions& opt) {
  validate_region(P, region);
  const auto& etas = opt.eta_schedule;
  if (etas.size() < 2) throw std::invalid_argument("sigma_infty: eta schedule needs >= 2 values");
  for (std::size_t i = 0; i < etas.size(); ++i)
    if (etas[i] <= 0 || (i > 0 && etas[i] >= etas[i - 1]))
      throw std::invalid_argument("sigma_infty: eta schedule must be positive and strictly decreasing");
  if (opt.samples == 0) throw std::invalid_argument("sigma_infty: samples must be positive");
  if (opt.membership == InftyMembership::t_infty && basis == nullptr)
    throw std::invalid_argument("sigma_infty: t_infty membership needs the form basis");

  // certified short-circuit: |P| bounded away from every slab
  RatIv bound = thin_interval(P, region);
  Rat minabs(0);
  if (bound.lo > 0) minabs = bound.lo;
  if (bound.hi < 0) minabs = -bound.hi;
  if (minabs > 0 && minabs >= Rat(etas.front())) {
    DensityInterval out;
    out.method = DensityMethod::exact_count;
    out.eta = etas.back();
    return out;
  }

  std::vector<std::pair<std::vector<int>, double>> dterms;
  for (const auto& [e, c] : P.terms) dterms.emplace_back(e, c.get_d());
  std::vector<double> lo(P.N), hi(P.N);
  double vol = 1;
  for (int i = 0; i < P.N; ++i) {
    lo[static_cast<std::size_t>(i)] = region.intervals[static_cast<std::size_t>(i)].first.get_d();
    hi[static_cast<std::size_t>(i)] = region.intervals[static_cast<std::size_t>(i)].second.get_d();
    vol *= hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
  }

  constexpr std::uint64_t kChunk = 65536;
  const Rng root(opt.seed);
  struct EtaStats {
    double mid_lo = 0, mid_hi = 0, se = 0;
    std::uint64_t hits = 0, unknown = 0;
  };
  std::vector<EtaStats> stats(etas.size());
  bool consistent = true;

  for (std::size_t ei = 0; ei < etas.size(); ++ei) {
    const double eta = etas[ei];
    const std::uint64_t nchunks = (opt.samples + kChunk - 1) / kChunk;
    struct Counter {
      std::uint64_t in = 0, unknown = 0, hits = 0;
    };
    std::vector<Counter> per(nchunks);
    chunked_run(
        nchunks, opt.jobs,
        [&](std::size_t, std::uint64_t cb, std::uint64_t ce) {
          std::vector<double> y(static_cast<std::size_t>(P.N));
          std::vector<Int> a(static_cast<std::size_t>(P.N));
          for (std::uint64_t ci = cb; ci < ce; ++ci) {
            Rng rng = root.derive({0x73696d61ull, ei, ci});
            const std::uint64_t count = std::min(kChunk, opt.samples - ci * kChunk);
            Counter& c = per[ci];
            for (std::uint64_t s = 0; s < count; ++s) {
              for (int j = 0; j < P.N; ++j)
                y[static_cast<std::size_t>(j)] =
                    rng.next_double(lo[static_cast<std::size_t>(j)], hi[static_cast<std::size_t>(j)]);
              const double val = eval_thin_double(dterms, y.data());
              if (!(std::fabs(val) < eta)) continue;
              ++c.hits;
              if (opt.membership == InftyMembership::all) {
                ++c.in;
                continue;
              }
              for (int j = 0; j < P.N; ++j)
                a[static_cast<std::size_t>(j)] = Int(std::ldexp(y[static_cast<std::size_t>(j)], 53));
              const auto verdict = real_solubility(*basis, a, opt.real);
              if (verdict.soluble())
                ++c.in;
              else if (verdict.kind == RealVerdict::Kind::unknown)
                ++c.unknown;
            }
          }
        },
        static_cast<std::size_t>(nchunks));
    std::uint64_t in = 0, unknown = 0, hits = 0;
    for (const auto& c : per) in += c.in, unknown += c.unknown, hits += c.hits;
    const double scale = vol / (2 * eta);
    const double m = static_cast<double>(opt.samples);
    const double plo = static_cast<double>(in) / m;
    const double phi = static_cast<double>(in + unknown) / m;
    auto& st = stats[ei];
    st.mid_lo = plo * scale;
    st.mid_hi = phi * scale;
    st.se = scale * std::sqrt(std::max(phi * (1 - phi), plo * (1 - plo)) / m);
    st.hits = hits;
    st.unknown = unknown;
    if (hits > 0 &&
        static_cast<double>(unknown) / static_cast<double>(hits) > opt.unknown_flag_threshold)
      consistent = false;
  }

  for (std::size_t i = 1; i < etas.size(); ++i) {
    const auto &a = stats[i - 1], &b = stats[i];
    const double gap = std::max({b.mid_lo - a.mid_hi, a.mid_lo - b.mid_hi, 0.0});
    if (gap > 2 * std::sqrt(a.se * a.se + b.se * b.se)) consistent = false;
  }

  const auto& last = stats.back();
  DensityInterval out;
  out.lower = Rat(last.mid_lo);
  out.upper = Rat(last.mid_hi);
  out.lower.canonicalize();
  out.upper.canonicalize();
  out.method = DensityMethod::monte_carlo;
  out.eta = etas.back();
  out.samples = opt.samples;
  out.stderr_value = last.se;
  out.consistent = consistent;
  return out;
}

}  // namespace

PadicCondition PadicCondition::all() { return {}; }

PadicCondition PadicCondition::congruence(Int B, std::vector<Int> r0) {
  PadicCondition c;
  c.modulus = std::move(B);
  c.residue = std::move(r0);
  return c;
}

PadicCondition PadicCondition::box(std::vector<std::pair<Rat, Rat>> intervals) {
  PadicCondition c;
  c.representative_box = std::move(intervals);
  return c;
}

Rat sigma_p_level(const ThinFormP& P, long p, int r, const PadicCondition& cond,
                  const SigmaPOptions& opt) {
  check_prime(p, "sigma_p_level");
  if (r < 0) throw std::invalid_argument("sigma_p_level: r must be >= 0");
  if (r == 0) return Rat(1);
  const std::uint64_t M = pow_u64_checked(p, r);
  const ClassGrid grid = build_grid(P.N, p, r, M, cond);
  if (grid.total == 0) return Rat(0);

  if (grid.total <= opt.max_classes) {
    const auto terms = reduce_terms(P, M);
    const std::uint64_t outer = grid.values[0].size();
    const std::size_t nchunks =
        opt.jobs > 1 ? std::min<std::uint64_t>(outer, static_cast<std::uint64_t>(opt.jobs) * 4) : 1;
    std::vector<Int> partial(std::max<std::size_t>(nchunks, 1), Int(0));
    chunked_run(
        outer, opt.jobs,
        [&](std::size_t c, std::uint64_t b, std::uint64_t e) {
          std::uint64_t n = 0;
          scan_grid(grid, b, e, [&](const std::vector<std::uint64_t>& digits) {
            if (eval_terms_mod(terms, digits, M) == 0) ++n;
          });
          partial[c] = static_cast<unsigned long>(n);
        },
        nchunks);
    Int count = 0;
    for (const Int& c : partial) count += c;
    return scale_mass(count, p, r, P.N);
  }

  const bool unconditioned = cond.modulus == 1 && cond.representative_box.empty();
  if (!(opt.allow_fiber && unconditioned && P.solvable_last && P.N >= 2))
    throw std::runtime_error(
        "sigma_p_level: class budget exceeded; enable fiber mode (unconditioned, solvable form) "
        "or lower r");
  std::uint64_t prefixes = 1;
  for (int i = 0; i + 1 < P.N; ++i) {
    if (prefixes > (1ull << 62) / M)
      throw std::runtime_error("sigma_p_level: fiber prefix budget exceeded; lower r");
    prefixes *= M;
  }
  if (prefixes > opt.max_classes)
    throw std::runtime_error("sigma_p_level: fiber prefix budget exceeded; lower r");
  int last_deg = 0;
  for (const auto& [e, c] : P.terms) last_deg = std::max(last_deg, e[static_cast<std::size_t>(P.N - 1)]);
  const std::size_t nchunks =
      opt.jobs > 1 ? std::min<std::uint64_t>(prefixes, static_cast<std::uint64_t>(opt.jobs) * 4) : 1;
  std::vector<Int> partial(std::max<std::size_t>(nchunks, 1), Int(0));
  chunked_run(
      prefixes, opt.jobs,
      [&](std::size_t c, std::uint64_t b, std::uint64_t e) {
        std::vector<Int> prefix(static_cast<std::size_t>(P.N - 1));
        std::vector<Int> cf(static_cast<std::size_t>(last_deg) + 1);
        Int sum = 0;
        for (std::uint64_t pi = b; pi < e; ++pi) {
          std::uint64_t rest = pi;
          for (int i = P.N - 2; i >= 0; --i) {
            prefix[static_cast<std::size_t>(i)] = static_cast<unsigned long>(rest % M);
            rest /= M;
          }
          std::fill(cf.begin(), cf.end(), Int(0));
          for (const auto& [ex, coef] : P.terms) {
            Int t = coef;
            for (int l = 0; l + 1 < P.N; ++l)
              for (int rep = 0; rep < ex[static_cast<std::size_t>(l)]; ++rep)
                t *= prefix[static_cast<std::size_t>(l)];
            cf[static_cast<std::size_t>(ex[static_cast<std::size_t>(P.N - 1)])] += t;
          }
          sum += count_poly_roots_mod(cf, p, r);
        }
        partial[c] = sum;
      },
      nchunks);
  Int count = 0;
  for (const Int& c : partial) count += c;
  return scale_mass(count, p, r, P.N);
}

Int count_poly_roots_mod(std::span<const Int> c, long p, int r) {
  check_prime(p, "count_poly_roots_mod");
  if (r < 0) throw std::invalid_argument("count_poly_roots_mod: r must be >= 0");
  if (r == 0) return 1;
  std::vector<Int> g(c.begin(), c.end());
  if (g.empty()) g.push_back(Int(0));
  return count_roots_rec(g, p, r);
}

ClassStatus classify_residue_class(const VeroneseBasis& basis, std::span<const Int> a0, long p,
                                   int r, const ZpOptions& zp) {
  check_prime(p, "classify_residue_class");
  if (r < 1) throw std::invalid_argument("classify_residue_class: r must be >= 1");
  if (a0.size() != basis.size())
    throw std::invalid_argument("classify_residue_class: coefficient arity mismatch");
  const Int M = pow_int(p, r);
  std::vector<Int> a(a0.size());
  bool zero = true;
  for (std::size_t i = 0; i < a0.size(); ++i) {
    a[i] = mod_floor(a0[i], M);
    zero = zero && a[i] == 0;
  }
  if (zero) return ClassStatus::unknown;  // the zero form decides nothing for its lifts
  ZpOptions o = zp;
  o.max_level = r;
  o.class_stable = true;
  o.strip_content = false;
  const auto verdict = zp_solubility(basis, a, p, o);
  if (verdict.soluble() && verdict.hensel && 2 * verdict.hensel->alpha + 1 <= r)
    return ClassStatus::certified_in;
  if (verdict.insoluble() && verdict.exhaustion && verdict.exhaustion->exhaustion_level <= r)
    return ClassStatus::certified_out;
  return ClassStatus::unknown;
}

DensityInterval sigma_p_Tp(const ThinFormP& P, const VeroneseBasis& basis, long p, int r,
                           const ZpOptions& zp, const SigmaPOptions& opt) {
  check_prime(p, "sigma_p_Tp");
  if (r < 1) throw std::invalid_argument("sigma_p_Tp: r must be >= 1");
  if (basis.size() != static_cast<std::size_t>(P.N))
    throw std::invalid_argument("sigma_p_Tp: basis dimension != N");
  const std::uint64_t M = pow_u64_checked(p, r);
  const ClassGrid grid = build_grid(P.N, p, r, M, PadicCondition::all());
  if (grid.total > opt.max_classes)
    throw std::runtime_error("sigma_p_Tp: class budget exceeded; lower r");
  const auto terms = reduce_terms(P, M);
  const std::uint64_t outer = grid.values[0].size();
  const std::size_t nchunks =
      opt.jobs > 1 ? std::min<std::uint64_t>(outer, static_cast<std::uint64_t>(opt.jobs) * 4) : 1;
  struct Counter {
    std::uint64_t classes = 0, in = 0, out = 0;
  };
  std::vector<Counter> partial(std::max<std::size_t>(nchunks, 1));
  chunked_run(
      outer, opt.jobs,
      [&](std::size_t c, std::uint64_t b, std::uint64_t e) {
        std::vector<Int> a(static_cast<std::size_t>(P.N));
        Counter& ct = partial[c];
        scan_grid(grid, b, e, [&](const std::vector<std::uint64_t>& digits) {
          if (eval_terms_mod(terms, digits, M) != 0) return;
          ++ct.classes;
          bool zero = true;
          for (std::size_t i = 0; i < digits.size(); ++i) {
            a[i] = static_cast<unsigned long>(digits[i]);
            zero = zero && digits[i] == 0;
          }
          if (zero) return;  // stays unknown
          switch (classify_residue_class(basis, a, p, r, zp)) {
            case ClassStatus::certified_in: ++ct.in; break;
            case ClassStatus::certified_out: ++ct.out; break;
            case ClassStatus::unknown: break;
          }
        });
      },
      nchunks);
  Int classes = 0, in = 0, out = 0;
  for (const auto& ct : partial) {
    classes += static_cast<unsigned long>(ct.classes);
    in += static_cast<unsigned long>(ct.in);
    out += static_cast<unsigned long>(ct.out);
  }
  DensityInterval iv;
  iv.lower = scale_mass(in, p, r, P.N);
  iv.upper = scale_mass(classes - out, p, r, P.N);
  iv.method = DensityMethod::certified_interval;
  iv.level = r;
  iv.samples = classes.get_ui();
  return iv;
}

DensityInterval sigma_infty(const ThinFormP& P, const BoxSpec& region,
                            const SigmaInftyOptions& opt) {
  return sigma_infty_impl(P, nullptr, region, opt);
}

DensityInterval sigma_infty(const ThinFormP& P, const VeroneseBasis& basis, const BoxSpec& region,
                            const SigmaInftyOptions& opt) {
  return sigma_infty_impl(P, &basis, region, opt);
}

CPEstimate c_p_estimate(const ThinFormP& P, const VeroneseBasis& basis, long p_max,
                        std::span<const Int> witness, const CPOptions& opt) {
  if (basis.size() != static_cast<std::size_t>(P.N))
    throw std::invalid_argument("c_p_estimate: basis dimension != N");
  if (p_max < 0) throw std::invalid_argument("c_p_estimate: p_max must be >= 0");
  if (witness.size() != static_cast<std::size_t>(P.N))
    throw std::invalid_argument("c_p_estimate: witness arity != N");
  bool nonzero = false;
  for (const Int& w : witness) nonzero = nonzero || w != 0;
  if (!nonzero || evaluate_thin(P, witness) != 0)
    throw std::invalid_argument("c_p_estimate: witness is not a nontrivial zero of P");

  CPEstimate est;
  est.p_max = p_max;
  const BoxSpec region = BoxSpec::full(P.N);

  SigmaInftyOptions den_opt = opt.sigma_infty;
  den_opt.membership = InftyMembership::all;
  SigmaInftyOptions num_opt = opt.sigma_infty;
  num_opt.membership = InftyMembership::t_infty;
  PlaceFactor real_factor;
  real_factor.p = 0;
  real_factor.denominator = sigma_infty(P, region, den_opt);
  real_factor.numerator = sigma_infty(P, basis, region, num_opt);
  est.factors.push_back(real_factor);

  for (long p : primes_up_to(std::max(p_max, 1L))) {
    if (p > p_max) break;
    const int r = opt.r_schedule.pick(p);
    PlaceFactor f;
    f.p = p;
    const Rat den = sigma_p_level(P, p, r, PadicCondition::all(), opt.sigma_p);
    f.denominator.lower = f.denominator.upper = den;
    f.denominator.method = DensityMethod::exact_count;
    f.denominator.level = r;
    f.numerator = sigma_p_Tp(P, basis, p, r, opt.zp, opt.sigma_p);
    est.factors.push_back(std::move(f));
  }

  double lower = 1, upper = 1;
  for (const auto& f : est.factors) {
    const double den_lo = f.denominator.lower.get_d(), den_hi = f.denominator.upper.get_d();
    const double num_lo = f.numerator.lower.get_d(), num_hi = f.numerator.upper.get_d();
    double rlo = den_hi > 0 ? num_lo / den_hi : 0.0;
    double rhi = den_lo > 0 ? num_hi / den_lo : 1.0;
    rlo = std::clamp(rlo, 0.0, 1.0);
    rhi = std::clamp(rhi, rlo, 1.0);
    lower *= rlo;
    upper *= rhi;
  }
  est.lower = lower;
  est.upper = upper;

  // tail primes: estimate the unresolved mass fraction where the plane-curve
  // point guarantee can certify smooth classes, flag the rest unquantified
  std::vector<long> tail;
  for (long bound = std::max(p_max, 1L) + 64; static_cast<long>(tail.size()) < opt.deficit_primes;
       bound *= 2) {
    tail.clear();
    for (long q : primes_up_to(bound))
      if (q > p_max) {
        tail.push_back(q);
        if (static_cast<long>(tail.size()) == opt.deficit_primes) break;
      }
  }
  Rng rng = Rng(opt.sigma_infty.seed).derive({0xdef1c175ull});
  for (long q : tail) {
    DeficitEntry d;
    d.p = q;
    if (basis.n == 3 && hasse_weil_guarantee(basis.n, basis.d, q) && opt.deficit_samples > 0) {
      std::vector<Int> a(static_cast<std::size_t>(P.N));
      std::uint64_t sampled = 0, smooth = 0;
      for (std::uint64_t tries = 0; tries < 100 * opt.deficit_samples && sampled < opt.deficit_samples;
           ++tries) {
        for (auto& x : a) x = rng.next_int(0, q - 1);
        bool zero = true;
        for (const auto& x : a) zero = zero && x == 0;
        if (zero || mod_floor(evaluate_thin(P, a), Int(q)) != 0) continue;
        ++sampled;
        if (smooth_reduction(basis, a, q).value_or(false)) ++smooth;
      }
      if (sampled > 0) {
        d.estimated = true;
        d.estimated_deficit =
            1.0 - static_cast<double>(smooth) / static_cast<double>(sampled);
      }
    }
    est.deficits.push_back(d);
  }
  return est;
}

}  // namespace solcensus
