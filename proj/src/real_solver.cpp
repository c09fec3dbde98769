#include "solcensus/real_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <utility>

#include "solcensus/kernels/batch_eval.hpp"
#include "solcensus/rng.hpp"

namespace solcensus {
namespace {

int sgn(const Rat& q) { return mpq_sgn(q.get_mpq_t()); }

struct Ctx {
  const VeroneseBasis& b;
  std::vector<Rat> aq;
  std::vector<double> ad;
  double linf = 0.0;
  double target = 0.0;  // bisection stops once the double residual drops below this
};

Rat eval(const Ctx& c, const std::vector<Rat>& x) {
  return evaluate_form<Rat>(c.b, std::span<const Rat>(c.aq), std::span<const Rat>(x));
}

RealWitness witness_at(const Ctx& c, const std::vector<Rat>& x) {
  RealWitness w;
  w.point.resize(c.b.n);
  double norm2 = 0.0;
  for (int j = 0; j < c.b.n; ++j) {
    w.point[j] = x[j].get_d();
    norm2 += w.point[j] * w.point[j];
  }
  const double norm = std::sqrt(norm2);
  for (double& v : w.point) v /= norm;
  w.residual = std::abs(evaluate_form<double>(c.b, std::span<const double>(c.ad),
                                              std::span<const double>(w.point)));
  return w;
}

RealVerdict soluble_verdict(const Ctx& c, RealVerdict::Method m, const std::vector<Rat>& pt) {
  RealVerdict v;
  v.kind = RealVerdict::Kind::soluble;
  v.method = m;
  v.witness = witness_at(c, pt);
  return v;
}

bool proportional(const std::vector<Rat>& u, const std::vector<Rat>& w) {
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = i + 1; j < u.size(); ++j)
      if (u[i] * w[j] != u[j] * w[i]) return false;
  return true;
}

// Shift w off the line through u while keeping f(w) strictly negative.
std::optional<std::vector<Rat>> nudge_independent(const Ctx& c, const std::vector<Rat>& u,
                                                  const std::vector<Rat>& w) {
  for (int k = 1; k <= 80; ++k) {
    Rat delta(Int(1), Int(1) << k);
    delta.canonicalize();
    for (int j = 0; j < c.b.n; ++j) {
      for (int side = 0; side < 2; ++side) {
        std::vector<Rat> cand = w;
        if (side == 0)
          cand[j] += delta;
        else
          cand[j] -= delta;
        if (sgn(eval(c, cand)) < 0 && !proportional(u, cand)) return cand;
      }
    }
  }
  return std::nullopt;
}

// Exact bisection on the segment [u, w]. Endpoint signs are established in
// rational arithmetic here regardless of how the bracket was found; linearly
// independent endpoints keep every midpoint away from the origin.
std::optional<RealVerdict> bisect_bracket(const Ctx& c, std::vector<Rat> u, std::vector<Rat> w,
                                          RealVerdict::Method m) {
  const int su = sgn(eval(c, u));
  if (su == 0) return soluble_verdict(c, RealVerdict::Method::exact_zero, u);
  const int sw = sgn(eval(c, w));
  if (sw == 0) return soluble_verdict(c, RealVerdict::Method::exact_zero, w);
  if (su == sw) return std::nullopt;
  if (su < 0) std::swap(u, w);
  if (proportional(u, w)) {
    auto adj = nudge_independent(c, u, w);
    if (!adj) return std::nullopt;
    w = std::move(*adj);
  }
  std::vector<Rat> mid(c.b.n);
  for (int iter = 0; iter < 1024; ++iter) {
    for (int j = 0; j < c.b.n; ++j) mid[j] = (u[j] + w[j]) / 2;
    const int s = sgn(eval(c, mid));
    if (s == 0) return soluble_verdict(c, RealVerdict::Method::exact_zero, mid);
    RealWitness cand = witness_at(c, mid);
    if (cand.residual < c.target) {
      RealVerdict v;
      v.kind = RealVerdict::Kind::soluble;
      v.method = m;
      v.witness = std::move(cand);
      return v;
    }
    if (s > 0)
      u = mid;
    else
      w = mid;
  }
  return std::nullopt;
}

// A nonzero degree-d form cannot vanish on all of {0..d}^n.
RealVerdict solve_odd(const Ctx& c) {
  const int n = c.b.n, d = c.b.d;
  std::vector<int> g(n, 0);
  std::vector<Rat> x0;
  int s0 = 0;
  for (;;) {
    int j = n - 1;
    while (j >= 0 && g[j] == d) g[j--] = 0;
    if (j < 0) break;
    ++g[j];
    std::vector<Rat> cand(n);
    for (int t = 0; t < n; ++t) cand[t] = g[t];
    const int s = sgn(eval(c, cand));
    if (s != 0) {
      x0 = std::move(cand);
      s0 = s;
      break;
    }
  }
  if (s0 == 0) return {};
  if (s0 < 0)
    for (Rat& v : x0) v = -v;  // odd degree: f(-x) = -f(x)
  std::vector<Rat> w(n);
  for (int t = 0; t < n; ++t) w[t] = -x0[t];
  if (auto v = bisect_bracket(c, std::move(x0), std::move(w), RealVerdict::Method::odd_degree))
    return *v;
  return {};
}

// Exact scan of small integer points; records the strongest strict-sign
// representatives for later bracketing.
std::optional<RealVerdict> exact_probes(const Ctx& c, std::optional<std::vector<Rat>>& best_pos,
                                        std::optional<std::vector<Rat>>& best_neg) {
  const int n = c.b.n;
  std::vector<std::vector<Rat>> pts;
  if (n <= 6) {
    std::vector<int> v(n, -1);
    for (;;) {
      if (std::any_of(v.begin(), v.end(), [](int t) { return t != 0; })) {
        std::vector<Rat> p(n);
        for (int j = 0; j < n; ++j) p[j] = v[j];
        pts.push_back(std::move(p));
      }
      int j = n - 1;
      while (j >= 0 && v[j] == 1) v[j--] = -1;
      if (j < 0) break;
      ++v[j];
    }
  } else {
    for (int j = 0; j < n; ++j)
      for (int s : {1, -1}) {
        std::vector<Rat> p(n, Rat(0));
        p[j] = s;
        pts.push_back(std::move(p));
      }
    for (int s : {1, -1}) {
      std::vector<Rat> ones(n, Rat(s)), alt(n);
      for (int j = 0; j < n; ++j) alt[j] = (j % 2 == 0) ? s : -s;
      pts.push_back(std::move(ones));
      pts.push_back(std::move(alt));
    }
  }
  Rat bp(0), bn(0);
  for (auto& x : pts) {
    Rat fv = eval(c, x);
    const int s = sgn(fv);
    if (s == 0) return soluble_verdict(c, RealVerdict::Method::exact_zero, x);
    if (s > 0 && (!best_pos || fv > bp)) {
      bp = fv;
      best_pos = x;
    } else if (s < 0 && (!best_neg || fv < bn)) {
      bn = fv;
      best_neg = x;
    }
  }
  return std::nullopt;
}

double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

// Low-discrepancy plus seeded random points in [-1,1]^n, prefiltered in
// doubles; only the two strongest candidates are re-checked exactly.
std::optional<RealVerdict> sampled_bracket(const Ctx& c, const RealOptions& opt) {
  const int n = c.b.n;
  const std::size_t nld =
      opt.lowdisc_points ? opt.lowdisc_points : static_cast<std::size_t>(2 * n) * 1000;
  const std::size_t total = nld + opt.random_points;
  if (total == 0) return std::nullopt;
  const auto bases = primes_up_to(std::max<long>(8L * n, 64L));
  Rng rng(opt.seed);
  constexpr std::size_t kChunk = 512;
  std::vector<double> coords(kChunk * n), vals(kChunk);
  double best_pos = 0.0, best_neg = 0.0;
  std::vector<double> ppos, pneg;
  std::size_t emitted = 0;
  while (emitted < total) {
    const std::size_t m = std::min(kChunk, total - emitted);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t gi = emitted + i;
      for (int j = 0; j < n; ++j)
        coords[i * n + j] = gi < nld
                                ? 2.0 * halton(gi + 1, static_cast<std::uint64_t>(bases[j])) - 1.0
                                : rng.next_double(-1.0, 1.0);
    }
    kernels::batch_eval_double(c.b, c.ad.data(), coords.data(), m, vals.data());
    for (std::size_t i = 0; i < m; ++i) {
      if (vals[i] > best_pos) {
        best_pos = vals[i];
        ppos.assign(coords.begin() + static_cast<std::ptrdiff_t>(i * n),
                    coords.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
      } else if (vals[i] < best_neg) {
        best_neg = vals[i];
        pneg.assign(coords.begin() + static_cast<std::ptrdiff_t>(i * n),
                    coords.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
      }
    }
    emitted += m;
  }
  const double thr = 1e-9 * c.linf;
  if (!(best_pos > thr) || !(best_neg < -thr)) return std::nullopt;
  std::vector<Rat> u(n), w(n);
  for (int j = 0; j < n; ++j) {
    u[j] = Rat(ppos[j]);
    w[j] = Rat(pneg[j]);
  }
  if (sgn(eval(c, u)) <= 0 || sgn(eval(c, w)) >= 0) return std::nullopt;
  return bisect_bracket(c, std::move(u), std::move(w), RealVerdict::Method::sign_change);
}

// ---- exact quadratic decision via rational congruence diagonalization ----

RealVerdict solve_quadratic(const Ctx& c) {
  const int n = c.b.n;
  std::vector<std::vector<Rat>> Q(n, std::vector<Rat>(n, Rat(0)));
  for (std::size_t i = 0; i < c.b.size(); ++i) {
    const auto& e = c.b.exponents[i];
    int j = -1, k = -1;
    for (int t = 0; t < n; ++t) {
      if (e[t] == 2) j = k = t;
      if (e[t] == 1) {
        if (j < 0)
          j = t;
        else
          k = t;
      }
    }
    if (j == k) {
      Q[j][j] += c.aq[i];
    } else {
      Rat h = c.aq[i] / 2;
      Q[j][k] += h;
      Q[k][j] += h;
    }
  }
  // Maintain Q <- E^T Q E and T <- T E so that f(T e_k) = Q[k][k] at the end.
  std::vector<std::vector<Rat>> T(n, std::vector<Rat>(n, Rat(0)));
  for (int i = 0; i < n; ++i) T[i][i] = 1;
  std::vector<char> done(n, 0);
  for (;;) {
    int piv = -1;
    for (int i = 0; i < n; ++i)
      if (!done[i] && sgn(Q[i][i]) != 0) {
        piv = i;
        break;
      }
    if (piv < 0) {
      int hi = -1, hj = -1;
      for (int i = 0; i < n && hi < 0; ++i) {
        if (done[i]) continue;
        for (int j = i + 1; j < n; ++j)
          if (!done[j] && sgn(Q[i][j]) != 0) {
            hi = i;
            hj = j;
            break;
          }
      }
      if (hi < 0) break;  // remaining block is identically zero
      // Hyperbolic pair: x_hi = y_hi + y_hj, x_hj = y_hi - y_hj puts
      // +/- 2*Q[hi][hj] on the diagonal.
      for (int r = 0; r < n; ++r) {
        Rat ci = Q[r][hi], cj = Q[r][hj];
        Q[r][hi] = ci + cj;
        Q[r][hj] = ci - cj;
      }
      for (int s = 0; s < n; ++s) {
        Rat ri = Q[hi][s], rj = Q[hj][s];
        Q[hi][s] = ri + rj;
        Q[hj][s] = ri - rj;
      }
      for (int r = 0; r < n; ++r) {
        Rat ti = T[r][hi], tj = T[r][hj];
        T[r][hi] = ti + tj;
        T[r][hj] = ti - tj;
      }
      continue;
    }
    for (int j = 0; j < n; ++j) {
      if (j == piv || done[j] || sgn(Q[piv][j]) == 0) continue;
      Rat coef = -Q[piv][j] / Q[piv][piv];
      for (int r = 0; r < n; ++r) Q[r][j] += coef * Q[r][piv];
      for (int s = 0; s < n; ++s) Q[j][s] += coef * Q[piv][s];
      for (int r = 0; r < n; ++r) T[r][j] += coef * T[r][piv];
    }
    done[piv] = 1;
  }
  auto column = [&](int k) {
    std::vector<Rat> p(n);
    for (int r = 0; r < n; ++r) p[r] = T[r][k];
    return p;
  };
  int pos = -1, neg = -1, zero = -1;
  for (int k = 0; k < n; ++k) {
    const int s = sgn(Q[k][k]);
    if (s == 0 && zero < 0) zero = k;
    if (s > 0 && pos < 0) pos = k;
    if (s < 0 && neg < 0) neg = k;
  }
  if (zero >= 0) return soluble_verdict(c, RealVerdict::Method::exact_zero, column(zero));
  if (pos >= 0 && neg >= 0) {
    if (auto v = bisect_bracket(c, column(pos), column(neg), RealVerdict::Method::sign_change))
      return *v;
    return {};
  }
  RealVerdict v;
  v.kind = RealVerdict::Kind::insoluble;
  v.method = RealVerdict::Method::definiteness;
  return v;
}

// ---- exact binary decision via Sturm chains ----

using Poly = std::vector<Rat>;  // coefficients in ascending degree order

void trim(Poly& p) {
  while (!p.empty() && sgn(p.back()) == 0) p.pop_back();
}

Poly derivative(const Poly& p) {
  Poly d;
  for (std::size_t i = 1; i < p.size(); ++i) d.push_back(p[i] * static_cast<long>(i));
  trim(d);
  return d;
}

std::pair<Poly, Poly> poly_divmod(Poly num, const Poly& den) {
  trim(num);
  Poly q(num.size() >= den.size() ? num.size() - den.size() + 1 : 0, Rat(0));
  while (num.size() >= den.size()) {
    Rat c = num.back() / den.back();
    const std::size_t off = num.size() - den.size();
    q[off] = c;
    for (std::size_t i = 0; i + 1 < den.size(); ++i) num[off + i] -= c * den[i];
    num.pop_back();
    trim(num);
  }
  trim(q);
  return {std::move(q), std::move(num)};
}

Poly poly_gcd(Poly a, Poly b) {
  trim(a);
  trim(b);
  while (!b.empty()) {
    Poly r = poly_divmod(a, b).second;
    a = std::move(b);
    b = std::move(r);
  }
  if (!a.empty()) {
    Rat lead = a.back();
    for (Rat& cc : a) cc /= lead;
  }
  return a;
}

Poly squarefree_part(const Poly& p) {
  Poly d = derivative(p);
  if (d.empty()) return p;
  Poly g = poly_gcd(p, d);
  if (g.size() <= 1) return p;
  return poly_divmod(p, g).first;
}

Rat eval_poly(const Poly& p, const Rat& t) {
  Rat acc(0);
  for (std::size_t i = p.size(); i-- > 0;) acc = acc * t + p[i];
  return acc;
}

std::vector<Poly> sturm_chain(Poly p) {
  std::vector<Poly> chain;
  trim(p);
  if (p.empty()) return chain;
  chain.push_back(p);
  Poly d = derivative(p);
  if (d.empty()) return chain;
  chain.push_back(std::move(d));
  for (;;) {
    Poly r = poly_divmod(chain[chain.size() - 2], chain.back()).second;
    if (r.empty()) break;
    for (Rat& cc : r) cc = -cc;
    chain.push_back(std::move(r));
  }
  return chain;
}

int count_flips(const std::vector<int>& signs) {
  int flips = 0, prev = 0;
  for (int s : signs) {
    if (s == 0) continue;
    if (prev != 0 && s != prev) ++flips;
    prev = s;
  }
  return flips;
}

int variations_at(const std::vector<Poly>& chain, const Rat& t) {
  std::vector<int> signs;
  signs.reserve(chain.size());
  for (const Poly& p : chain) signs.push_back(sgn(eval_poly(p, t)));
  return count_flips(signs);
}

int variations_at_inf(const std::vector<Poly>& chain, int dir) {
  std::vector<int> signs;
  signs.reserve(chain.size());
  for (const Poly& p : chain) {
    int s = sgn(p.back());
    if (dir < 0 && (p.size() - 1) % 2 == 1) s = -s;
    signs.push_back(s);
  }
  return count_flips(signs);
}

RealVerdict solve_binary(const Ctx& c) {
  const int d = c.b.d;
  if (sgn(c.aq[0]) == 0)
    return soluble_verdict(c, RealVerdict::Method::exact_zero, {Rat(1), Rat(0)});
  if (sgn(c.aq[static_cast<std::size_t>(d)]) == 0)
    return soluble_verdict(c, RealVerdict::Method::exact_zero, {Rat(0), Rat(1)});
  Poly g(static_cast<std::size_t>(d) + 1);
  for (int m = 0; m <= d; ++m) g[static_cast<std::size_t>(m)] = c.aq[static_cast<std::size_t>(d - m)];
  Poly sf = squarefree_part(g);
  auto chain = sturm_chain(sf);
  if (variations_at_inf(chain, -1) - variations_at_inf(chain, +1) == 0) {
    RealVerdict v;
    v.kind = RealVerdict::Kind::insoluble;
    v.method = RealVerdict::Method::binary_root_count;
    return v;
  }
  Rat bound(1);
  for (std::size_t i = 0; i + 1 < sf.size(); ++i) {
    Rat m = abs(sf[i] / sf.back());
    if (m > bound) bound = m;
  }
  Rat lo = -(bound + 1), hi = bound + 1;  // strict Cauchy bound, sf nonzero at both ends
  int vlo = variations_at(chain, lo), vhi = variations_at(chain, hi);
  for (int guard = 0; guard < 4096 && vlo - vhi > 1; ++guard) {
    Rat mid = (lo + hi) / 2;
    if (sgn(eval_poly(sf, mid)) == 0)
      return soluble_verdict(c, RealVerdict::Method::exact_zero, {mid, Rat(1)});
    const int vm = variations_at(chain, mid);
    if (vlo - vm >= 1) {
      hi = mid;
      vhi = vm;
    } else {
      lo = mid;
      vlo = vm;
    }
  }
  // One simple root of the squarefree part in (lo, hi) forces a strict sign
  // change of f(t, 1) between the endpoints.
  if (auto v = bisect_bracket(c, {lo, Rat(1)}, {hi, Rat(1)}, RealVerdict::Method::sign_change))
    return *v;
  return {};
}

}  // namespace

RealVerdict real_solubility(const VeroneseBasis& basis, std::span<const Int> a,
                            const RealOptions& opt) {
  if (a.size() != basis.size())
    throw std::invalid_argument("real_solubility: coefficient count != basis size");
  if (basis.n < 2) throw std::invalid_argument("real_solubility: need at least two variables");
  bool all_zero = true;
  for (const Int& v : a)
    if (mpz_sgn(v.get_mpz_t()) != 0) {
      all_zero = false;
      break;
    }
  if (all_zero) throw std::invalid_argument("real_solubility: zero form");
  Ctx c{basis, {}, {}, 0.0, 0.0};
  c.aq.reserve(a.size());
  c.ad.reserve(a.size());
  for (const Int& v : a) {
    c.aq.emplace_back(v);
    const double dv = v.get_d();
    c.ad.push_back(dv);
    c.linf = std::max(c.linf, std::abs(dv));
  }
  c.target = 0.1 * opt.tol * c.linf;
  if (basis.d % 2 == 1) return solve_odd(c);
  std::optional<std::vector<Rat>> best_pos, best_neg;
  if (auto v = exact_probes(c, best_pos, best_neg)) return *v;
  if (best_pos && best_neg) {
    if (auto v = bisect_bracket(c, std::move(*best_pos), std::move(*best_neg),
                                RealVerdict::Method::sign_change))
      return *v;
  }
  if (basis.d == 2) return solve_quadratic(c);
  if (basis.n == 2) return solve_binary(c);
  if (auto v = sampled_bracket(c, opt)) return *v;
  return {};
}

RealVerdict t_infty_membership(const VeroneseBasis& basis, std::span<const Int> a,
                               const RealOptions& opt) {
  return real_solubility(basis, a, opt);
}

int count_distinct_real_roots(const std::vector<Rat>& poly) {
  Poly p = poly;
  trim(p);
  if (p.empty()) throw std::invalid_argument("count_distinct_real_roots: zero polynomial");
  if (p.size() == 1) return 0;
  auto chain = sturm_chain(squarefree_part(p));
  return variations_at_inf(chain, -1) - variations_at_inf(chain, +1);
}

}  // namespace solcensus
