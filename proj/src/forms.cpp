#include "solcensus/forms.hpp"

namespace solcensus {

namespace {

void check_nd(int n, int d, const char* what) {
  if (n < 1 || d < 1) throw std::invalid_argument(std::string(what) + ": need n >= 1 and d >= 1");
}

void emit_descending(int remaining, int slot, std::vector<int>& cur,
                     std::vector<std::vector<int>>& out) {
  const int n = static_cast<int>(cur.size());
  if (slot == n - 1) {
    cur[slot] = remaining;
    out.push_back(cur);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[slot] = e;
    emit_descending(remaining - e, slot + 1, cur, out);
  }
}

}  // namespace

std::size_t veronese_dimension(int n, int d) {
  check_nd(n, d, "veronese_dimension");
  Int N = binomial(n + d - 1, d);
  if (!N.fits_ulong_p()) throw std::overflow_error("veronese_dimension: N out of range");
  return static_cast<std::size_t>(N.get_ui());
}

VeroneseBasis veronese_basis(int n, int d) {
  check_nd(n, d, "veronese_basis");
  VeroneseBasis b;
  b.n = n;
  b.d = d;
  b.exponents.reserve(veronese_dimension(n, d));
  std::vector<int> cur(static_cast<std::size_t>(n), 0);
  emit_descending(d, 0, cur, b.exponents);
  return b;
}

ContentSplit content_and_primitive(std::span<const Int> a) {
  ContentSplit r;
  r.content = vector_content(a);
  if (r.content == 0) return r;  // zero vector: no primitive part
  std::vector<Int> prim;
  prim.reserve(a.size());
  for (const Int& v : a) prim.push_back(v / r.content);
  r.primitive = std::move(prim);
  return r;
}

}  // namespace solcensus
