#include "solcensus/thin_set.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "solcensus/rng.hpp"

namespace solcensus {
namespace {

// The int64 engine is used only when every fiber coefficient stays below this
// bound; discriminants and Horner partial sums then fit in signed 64 bits.
constexpr long kI64Bound = 1L << 28;

Int mod_floor(const Int& x, const Int& m) {
  Int r;
  mpz_fdiv_r(r.get_mpz_t(), x.get_mpz_t(), m.get_mpz_t());
  return r;
}

long sabs(long v) { return v < 0 ? -v : v; }
Int sabs(const Int& v) { return abs(v); }

long isqrt_val(long x) {
  auto y = static_cast<long>(std::sqrt(static_cast<double>(x)));
  while (y > 0 && y * y > x) --y;
  while ((y + 1) * (y + 1) <= x) ++y;
  return y;
}
Int isqrt_val(const Int& x) { return isqrt_floor(x); }

bool content_one(const std::vector<long>& v) {
  unsigned long g = 0;
  for (long x : v) g = std::gcd(g, static_cast<unsigned long>(sabs(x)));
  return g == 1;
}
bool content_one(const std::vector<Int>& v) {
  return vector_content(std::span<const Int>(v)) == 1;
}

// Integer roots of sum_j cvals[j] * t^j inside [lo, hi]; nullopt when the
// polynomial is identically zero (the whole fiber solves the equation).
template <typename T>
std::optional<std::vector<T>> poly_roots(const std::vector<T>& cvals, const T& lo, const T& hi) {
  int m = static_cast<int>(cvals.size()) - 1;
  while (m >= 0 && cvals[static_cast<std::size_t>(m)] == 0) --m;
  if (m < 0) return std::nullopt;
  std::vector<T> roots;
  if (m == 0) return roots;
  if (m == 1) {
    if (cvals[0] % cvals[1] == 0) roots.push_back(T(-(cvals[0] / cvals[1])));
  } else if (m == 2) {
    T D = cvals[1] * cvals[1] - 4 * cvals[2] * cvals[0];
    if (D >= 0) {
      T s = isqrt_val(D);
      if (s * s == D) {
        const T den = 2 * cvals[2];
        for (int side = 0; side < (s == 0 ? 1 : 2); ++side) {
          T num = side == 0 ? T(-cvals[1] + s) : T(-cvals[1] - s);
          if (num % den == 0) roots.push_back(T(num / den));
        }
      }
    }
  } else {
    // Any integer root lies within the Cauchy bound; test candidates by
    // exact Horner evaluation.
    T mx(0);
    for (int j = 0; j < m; ++j) mx = std::max(mx, T(sabs(cvals[static_cast<std::size_t>(j)])));
    const T bound = mx + 1;
    T from = std::max(lo, T(-bound)), to = std::min(hi, bound);
    for (T t = from; t <= to; ++t) {
      T acc = cvals[static_cast<std::size_t>(m)];
      for (int j = m - 1; j >= 0; --j) acc = acc * t + cvals[static_cast<std::size_t>(j)];
      if (acc == 0) roots.push_back(t);
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

template <typename T>
struct FiberPoly {
  struct Term {
    T coef;
    const std::vector<int>* e;
  };
  int last_deg = 0;
  std::vector<std::vector<Term>> by_deg;

  static FiberPoly build(const ThinFormP& P) {
    FiberPoly f;
    for (const auto& [e, c] : P.terms) f.last_deg = std::max(f.last_deg, e[P.N - 1]);
    f.by_deg.resize(static_cast<std::size_t>(f.last_deg) + 1);
    for (const auto& [e, c] : P.terms) {
      T coef;
      if constexpr (std::is_same_v<T, Int>)
        coef = c;
      else
        coef = to_long_checked(c, "thin fiber coefficient");
      f.by_deg[static_cast<std::size_t>(e[P.N - 1])].push_back(Term{coef, &e});
    }
    return f;
  }

  void coeffs(const std::vector<T>& cur, int nprefix, std::vector<T>& out) const {
    out.assign(by_deg.size(), T(0));
    for (std::size_t j = 0; j < by_deg.size(); ++j)
      for (const auto& t : by_deg[j]) {
        T term = t.coef;
        for (int l = 0; l < nprefix; ++l)
          for (int rep = 0; rep < (*t.e)[l]; ++rep) term *= cur[l];
        out[j] += term;
      }
  }
};

template <typename T>
struct Engine {
  const ThinFormP* P = nullptr;
  int N = 0;
  bool solve = false;
  bool primitive_only = false;
  T step;
  std::vector<T> lo, hi, start, resid;
  struct Term {
    T coef;
    const std::vector<int>* e;
  };
  std::vector<Term> terms;
  FiberPoly<T> fiber;

  struct Scratch {
    std::vector<T> cur, cvals;
  };

  int limit() const { return solve ? N - 1 : N; }

  std::uint64_t values_at(int d) const {
    if (hi[static_cast<std::size_t>(d)] < start[static_cast<std::size_t>(d)]) return 0;
    T n = (hi[static_cast<std::size_t>(d)] - start[static_cast<std::size_t>(d)]) / step;
    if constexpr (std::is_same_v<T, Int>) {
      if (!n.fits_ulong_p()) throw std::overflow_error("enumerate_thin: box too large");
      return n.get_ui() + 1;
    } else {
      return static_cast<std::uint64_t>(n) + 1;
    }
  }

  std::uint64_t outer_count() const { return limit() == 0 ? 1 : values_at(0); }

  void emit_point(const std::vector<T>& cur, const std::function<void(std::vector<Int>&&)>& sink) const {
    if (primitive_only && !content_one(cur)) return;
    std::vector<Int> out;
    out.reserve(cur.size());
    for (const T& v : cur) out.emplace_back(v);
    sink(std::move(out));
  }

  bool congruent_last(const T& t) const {
    T d = t - resid[static_cast<std::size_t>(N - 1)];
    return d % step == 0;
  }

  void leaf(Scratch& s, const std::function<void(std::vector<Int>&&)>& sink) const {
    if (!solve) {
      T val(0);
      for (const auto& t : terms) {
        T term = t.coef;
        for (int j = 0; j < N; ++j)
          for (int rep = 0; rep < (*t.e)[j]; ++rep) term *= s.cur[j];
        val += term;
      }
      if (val == 0) emit_point(s.cur, sink);
      return;
    }
    fiber.coeffs(s.cur, N - 1, s.cvals);
    const std::size_t li = static_cast<std::size_t>(N - 1);
    auto roots = poly_roots<T>(s.cvals, lo[li], hi[li]);
    if (!roots) {  // the whole fiber lies on the thin set
      for (T v = start[li]; v <= hi[li]; v += step) {
        s.cur[li] = v;
        emit_point(s.cur, sink);
      }
      return;
    }
    for (const T& t : *roots) {
      if (t < lo[li] || t > hi[li] || !congruent_last(t)) continue;
      s.cur[li] = t;
      emit_point(s.cur, sink);
    }
  }

  void scan(int d, Scratch& s, const std::function<void(std::vector<Int>&&)>& sink) const {
    if (d == limit()) {
      leaf(s, sink);
      return;
    }
    const std::size_t di = static_cast<std::size_t>(d);
    for (T v = start[di]; v <= hi[di]; v += step) {
      s.cur[di] = v;
      scan(d + 1, s, sink);
    }
  }

  void run_chunk(std::uint64_t ob, std::uint64_t oe,
                 const std::function<void(std::vector<Int>&&)>& sink) const {
    Scratch s;
    s.cur.assign(static_cast<std::size_t>(N), T(0));
    if (limit() == 0) {  // N==1 with solve_last is rejected upstream
      if (ob == 0 && oe > 0) leaf(s, sink);
      return;
    }
    for (std::uint64_t oi = ob; oi < oe; ++oi) {
      T v = start[0];
      if constexpr (std::is_same_v<T, Int>)
        v += step * Int(static_cast<unsigned long>(oi));
      else
        v += step * static_cast<long>(oi);
      s.cur[0] = v;
      if (limit() == 1)
        leaf(s, sink);
      else
        scan(1, s, sink);
    }
  }
};

struct Prepared {
  std::vector<Int> lo, hi, start, resid;
  Int step;
  bool use_i64 = false;
};

Prepared prepare(const ThinFormP& P, const Int& A, const BoxSpec& box, const CongruenceSpec& cong,
                 const ThinOptions& opt) {
  if (P.N <= 0 || P.terms.empty()) throw std::invalid_argument("enumerate_thin: empty form");
  if (A < 1) throw std::invalid_argument("enumerate_thin: A must be >= 1");
  if (box.intervals.size() != static_cast<std::size_t>(P.N))
    throw std::invalid_argument("enumerate_thin: box arity != N");
  if (cong.modulus < 1) throw std::invalid_argument("enumerate_thin: modulus must be >= 1");
  if (cong.residue.size() != static_cast<std::size_t>(P.N))
    throw std::invalid_argument("enumerate_thin: residue arity != N");
  if (opt.strategy == ThinStrategy::solve_last && (!P.solvable_last || P.N < 2))
    throw std::invalid_argument("enumerate_thin: solve_last needs a quadratic or last-variable-monic form");
  Prepared pr;
  pr.step = cong.modulus;
  Int maxabs = 1;
  for (int i = 0; i < P.N; ++i) {
    const auto& [l, h] = box.intervals[static_cast<std::size_t>(i)];
    if (l < -1 || h > 1 || !(l < h))
      throw std::invalid_argument("enumerate_thin: box interval must sit inside [-1,1] with interior");
    const Int& r = cong.residue[static_cast<std::size_t>(i)];
    if (r < 0 || r >= cong.modulus)
      throw std::invalid_argument("enumerate_thin: residue out of range");
    Int lov, hiv;
    mpz_cdiv_q(lov.get_mpz_t(), Int(A * l.get_num()).get_mpz_t(), l.get_den().get_mpz_t());
    mpz_fdiv_q(hiv.get_mpz_t(), Int(A * h.get_num()).get_mpz_t(), h.get_den().get_mpz_t());
    pr.lo.push_back(lov);
    pr.hi.push_back(hiv);
    pr.start.push_back(lov + mod_floor(r - lov, cong.modulus));
    pr.resid.push_back(r);
    maxabs = std::max(maxabs, std::max(Int(abs(lov)), Int(abs(hiv))));
  }
  Int budget = 0;
  for (const auto& [e, c] : P.terms) {
    Int t = abs(c);
    for (int rep = 0; rep < P.k; ++rep) t *= maxabs;
    budget += t;
  }
  pr.use_i64 = budget < kI64Bound && maxabs < kI64Bound && pr.step.fits_slong_p();
  return pr;
}

template <typename T>
Engine<T> build_engine(const ThinFormP& P, const Prepared& pr, const ThinOptions& opt) {
  Engine<T> en;
  en.P = &P;
  en.N = P.N;
  en.solve = opt.strategy == ThinStrategy::solve_last;
  en.primitive_only = opt.primitive_only;
  auto conv = [](const Int& v) -> T {
    if constexpr (std::is_same_v<T, Int>)
      return v;
    else
      return to_long_checked(v, "thin lattice bound");
  };
  en.step = conv(pr.step);
  for (int i = 0; i < P.N; ++i) {
    en.lo.push_back(conv(pr.lo[static_cast<std::size_t>(i)]));
    en.hi.push_back(conv(pr.hi[static_cast<std::size_t>(i)]));
    en.start.push_back(conv(pr.start[static_cast<std::size_t>(i)]));
    en.resid.push_back(conv(pr.resid[static_cast<std::size_t>(i)]));
  }
  if (en.solve) {
    en.fiber = FiberPoly<T>::build(P);
  } else {
    for (const auto& [e, c] : P.terms) en.terms.push_back({conv(c), &e});
  }
  return en;
}

template <typename T>
void run_engine(const Engine<T>& en, int jobs,
                const std::function<void(std::span<const Int>)>& emit) {
  const std::uint64_t total = en.outer_count();
  if (total == 0) return;
  if (jobs <= 1) {
    en.run_chunk(0, total, [&](std::vector<Int>&& v) { emit(std::span<const Int>(v)); });
    return;
  }
  const std::uint64_t nchunks = std::min<std::uint64_t>(total, static_cast<std::uint64_t>(jobs) * 4);
  std::vector<std::vector<std::vector<Int>>> bufs(nchunks);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::uint64_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      const std::uint64_t b = total * c / nchunks, e = total * (c + 1) / nchunks;
      en.run_chunk(b, e, [&](std::vector<Int>&& v) { bufs[c].push_back(std::move(v)); });
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(jobs), nchunks));
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (const auto& chunk : bufs)
    for (const auto& v : chunk) emit(std::span<const Int>(v));
}

}  // namespace

ThinFormP make_thin_form(int N, std::vector<std::pair<std::vector<int>, Int>> terms) {
  if (N < 1) throw std::invalid_argument("make_thin_form: need at least one variable");
  std::map<std::vector<int>, Int> merged;
  int k = -1;
  for (auto& [e, c] : terms) {
    if (e.size() != static_cast<std::size_t>(N))
      throw std::invalid_argument("make_thin_form: exponent arity != N");
    int deg = 0;
    for (int x : e) {
      if (x < 0) throw std::invalid_argument("make_thin_form: negative exponent");
      deg += x;
    }
    if (k < 0) k = deg;
    if (deg != k) throw std::invalid_argument("make_thin_form: form is not homogeneous");
    merged[e] += c;
  }
  ThinFormP P;
  P.N = N;
  P.k = k;
  for (auto& [e, c] : merged)
    if (c != 0) P.terms.emplace_back(e, c);
  if (P.terms.empty()) throw std::invalid_argument("make_thin_form: zero form");
  if (P.k < 2) throw std::invalid_argument("make_thin_form: degree must be >= 2");
  std::sort(P.terms.begin(), P.terms.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  P.diagonal = std::all_of(P.terms.begin(), P.terms.end(), [](const auto& t) {
    return std::count_if(t.first.begin(), t.first.end(), [](int e) { return e != 0; }) == 1;
  });
  bool monic_last = false;
  for (const auto& [e, c] : P.terms)
    if (e[static_cast<std::size_t>(N - 1)] == P.k && (c == 1 || c == -1)) monic_last = true;
  P.solvable_last = P.k == 2 || monic_last;
  return P;
}

ThinFormP parse_thin_form(std::string_view text) {
  std::vector<std::pair<std::vector<int>, Int>> terms;
  int N = -1;
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::istringstream tok(line);
    std::string cs;
    if (!(tok >> cs)) continue;
    Int coef;
    try {
      coef = Int(cs);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("parse_thin_form: bad coefficient '" + cs + "'");
    }
    std::vector<int> e;
    long x;
    while (tok >> x) {
      if (x < 0) throw std::invalid_argument("parse_thin_form: negative exponent");
      e.push_back(static_cast<int>(x));
    }
    if (!tok.eof()) throw std::invalid_argument("parse_thin_form: bad exponent token");
    if (e.empty()) throw std::invalid_argument("parse_thin_form: term without exponents");
    if (N < 0) N = static_cast<int>(e.size());
    if (static_cast<int>(e.size()) != N)
      throw std::invalid_argument("parse_thin_form: inconsistent variable count");
    terms.emplace_back(std::move(e), coef);
  }
  if (N < 0) throw std::invalid_argument("parse_thin_form: no terms");
  return make_thin_form(N, std::move(terms));
}

Int evaluate_thin(const ThinFormP& P, std::span<const Int> a) {
  if (a.size() != static_cast<std::size_t>(P.N))
    throw std::invalid_argument("evaluate_thin: point arity != N");
  Int acc = 0;
  for (const auto& [e, c] : P.terms) {
    Int term = c;
    for (int j = 0; j < P.N; ++j)
      for (int rep = 0; rep < e[static_cast<std::size_t>(j)]; ++rep) term *= a[static_cast<std::size_t>(j)];
    acc += term;
  }
  return acc;
}

BoxSpec BoxSpec::full(int N) {
  BoxSpec b;
  b.intervals.assign(static_cast<std::size_t>(N), {Rat(-1), Rat(1)});
  return b;
}

CongruenceSpec CongruenceSpec::none(int N) {
  CongruenceSpec c;
  c.modulus = 1;
  c.residue.assign(static_cast<std::size_t>(N), Int(0));
  return c;
}

void enumerate_thin(const ThinFormP& P, const Int& A, const BoxSpec& box,
                    const CongruenceSpec& cong, const ThinOptions& opt,
                    const std::function<void(std::span<const Int>)>& emit) {
  const Prepared pr = prepare(P, A, box, cong, opt);
  if (pr.use_i64)
    run_engine(build_engine<long>(P, pr, opt), opt.jobs, emit);
  else
    run_engine(build_engine<Int>(P, pr, opt), opt.jobs, emit);
}

std::vector<std::vector<Int>> collect_thin(const ThinFormP& P, const Int& A, const BoxSpec& box,
                                           const CongruenceSpec& cong, const ThinOptions& opt) {
  std::vector<std::vector<Int>> out;
  enumerate_thin(P, A, box, cong, opt,
                 [&](std::span<const Int> a) { out.emplace_back(a.begin(), a.end()); });
  return out;
}

Int count_thin(const ThinFormP& P, const Int& A, const BoxSpec& box, const CongruenceSpec& cong,
               const ThinOptions& opt) {
  Int n = 0;
  enumerate_thin(P, A, box, cong, opt, [&](std::span<const Int>) { ++n; });
  return n;
}

Int count_thin(const ThinFormP& P, const Int& A, const ThinOptions& opt) {
  return count_thin(P, A, BoxSpec::full(P.N), CongruenceSpec::none(P.N), opt);
}

Int moebius_primitive_count(const std::map<long, Int>& raw_by_scale, bool zero_included) {
  if (raw_by_scale.empty()) throw std::invalid_argument("moebius_primitive_count: empty input");
  const long top = raw_by_scale.rbegin()->first;
  if (raw_by_scale.begin()->first < 1)
    throw std::invalid_argument("moebius_primitive_count: scales start at 1");
  const auto mu = moebius_table(top);
  Int acc = 0;
  long mertens = 0;
  for (long e = 1; e <= top; ++e) {
    const auto it = raw_by_scale.find(e);
    if (it == raw_by_scale.end())
      throw std::invalid_argument("moebius_primitive_count: missing scale " + std::to_string(e));
    acc += mu[static_cast<std::size_t>(e)] * it->second;
    mertens += mu[static_cast<std::size_t>(e)];
  }
  if (zero_included) acc -= mertens;
  return acc;
}

std::vector<GrowthRow> growth_diagnostic(const ThinFormP& P, std::span<const Int> A_values,
                                         const ThinOptions& opt) {
  if (A_values.empty()) throw std::invalid_argument("growth_diagnostic: need at least one A");
  std::vector<GrowthRow> rows;
  for (const Int& A : A_values) {
    GrowthRow row{A, count_thin(P, A, opt), std::nullopt};
    if (!rows.empty()) {
      const GrowthRow& prev = rows.back();
      if (row.count > 0 && prev.count > 0 && A != prev.A)
        row.exponent = std::log(row.count.get_d() / prev.count.get_d()) /
                       std::log(A.get_d() / prev.A.get_d());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

CongruenceRatio congruence_bound_check(const ThinFormP& P, const Int& A, const Int& Q,
                                       std::span<const Int> c, const ThinOptions& opt, long C) {
  if (Q < 1) throw std::invalid_argument("congruence_bound_check: Q must be >= 1");
  if (C < 1) throw std::invalid_argument("congruence_bound_check: C must be >= 1");
  if (c.size() != static_cast<std::size_t>(P.N))
    throw std::invalid_argument("congruence_bound_check: residue arity != N");
  if (C * Q > A) throw std::invalid_argument("congruence_bound_check: requires C*Q <= A");
  CongruenceSpec cong;
  cong.modulus = Q;
  for (const Int& ci : c) {
    if (ci < 1 || ci > Q)
      throw std::invalid_argument("congruence_bound_check: residues must lie in [1, Q]");
    cong.residue.push_back(mod_floor(ci, Q));
  }
  ThinOptions o = opt;
  o.primitive_only = false;
  CongruenceRatio out;
  out.count = count_thin(P, A, BoxSpec::full(P.N), cong, o);
  out.normalized_ratio =
      out.count.get_d() / std::pow(A.get_d() / Q.get_d(), static_cast<double>(P.N - P.k));
  return out;
}

ThinSample sample_thin(const ThinFormP& P, const Int& A, std::size_t m, std::uint64_t seed) {
  if (!P.solvable_last || P.N < 2)
    throw std::invalid_argument("sample_thin: needs a quadratic or last-variable-monic form");
  if (A < 1) throw std::invalid_argument("sample_thin: A must be >= 1");
  ThinSample out;
  if (m == 0) return out;
  const long Al = to_long_checked(A, "sample_thin bound");
  const auto fiber = FiberPoly<Int>::build(P);
  Rng rng(seed);
  const std::uint64_t max_attempts = 64 * static_cast<std::uint64_t>(m) + 256;
  std::vector<Int> prefix(static_cast<std::size_t>(P.N));
  std::vector<Int> cvals;
  const Int lo = -A, hi = A;
  while (out.points.size() < m && out.attempts < max_attempts) {
    ++out.attempts;
    for (int j = 0; j + 1 < P.N; ++j) prefix[static_cast<std::size_t>(j)] = rng.next_int(-Al, Al);
    fiber.coeffs(prefix, P.N - 1, cvals);
    auto roots = poly_roots<Int>(cvals, lo, hi);
    if (!roots) {  // degenerate fiber: the whole line solves; keep one draw
      prefix[static_cast<std::size_t>(P.N - 1)] = rng.next_int(-Al, Al);
      out.points.push_back(prefix);
      continue;
    }
    for (const Int& t : *roots) {
      if (t < lo || t > hi || out.points.size() >= m) continue;
      prefix[static_cast<std::size_t>(P.N - 1)] = t;
      out.points.push_back(prefix);
    }
  }
  out.complete = out.points.size() == m;
  return out;
}

}  // namespace solcensus
