#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "solcensus/numeric.hpp"

namespace solcensus {

// Homogeneous integer form P in N variables of degree k >= 2, the equation
// carving the thin coefficient set {a : P(a) = 0}.
struct ThinFormP {
  int N = 0;
  int k = 0;
  std::vector<std::pair<std::vector<int>, Int>> terms;  // descending lex exponents
  bool diagonal = false;       // every term touches a single variable
  bool solvable_last = false;  // quadratic, or monic in the last variable
};

// Validates homogeneity, merges duplicate exponent rows, rejects the zero
// form and degree < 2, and computes the strategy flags.
ThinFormP make_thin_form(int N, std::vector<std::pair<std::vector<int>, Int>> terms);

// One term per line: "coefficient e1 e2 ... eN"; '#' starts a comment.
ThinFormP parse_thin_form(std::string_view text);

Int evaluate_thin(const ThinFormP& P, std::span<const Int> a);

// Per-coordinate closed rational intervals inside [-1,1] with nonempty
// interior; scaled by A at enumeration time.
struct BoxSpec {
  std::vector<std::pair<Rat, Rat>> intervals;
  static BoxSpec full(int N);
};

struct CongruenceSpec {
  Int modulus = 1;
  std::vector<Int> residue;  // componentwise in [0, modulus)
  static CongruenceSpec none(int N);
};

enum class ThinStrategy { full_scan, solve_last };

struct ThinOptions {
  ThinStrategy strategy = ThinStrategy::full_scan;
  bool primitive_only = false;
  int jobs = 1;
};

// Streams, in increasing lexicographic order, every lattice vector of the
// scaled box that satisfies P(a) = 0 exactly and the congruence; with
// primitive_only set only content-1 vectors (never the zero vector) appear.
// full_scan walks the whole lattice box; solve_last walks the first N-1
// coordinates and finds the integer roots in the last one exactly.
void enumerate_thin(const ThinFormP& P, const Int& A, const BoxSpec& box,
                    const CongruenceSpec& cong, const ThinOptions& opt,
                    const std::function<void(std::span<const Int>)>& emit);

std::vector<std::vector<Int>> collect_thin(const ThinFormP& P, const Int& A, const BoxSpec& box,
                                           const CongruenceSpec& cong, const ThinOptions& opt);

Int count_thin(const ThinFormP& P, const Int& A, const BoxSpec& box, const CongruenceSpec& cong,
               const ThinOptions& opt);
Int count_thin(const ThinFormP& P, const Int& A, const ThinOptions& opt);  // full box, no congruence

// Inclusion-exclusion over scales: raw_by_scale maps e = 1..A to the count of
// all lattice solutions in the box shrunk by e. With zero_included (the
// default) the raw counts contain the zero vector at every scale, and its
// accumulated Mertens contribution is removed so the result counts content-1
// vectors only; pass false when the raw counts already exclude it.
Int moebius_primitive_count(const std::map<long, Int>& raw_by_scale, bool zero_included = true);

struct GrowthRow {
  Int A;
  Int count;
  std::optional<double> exponent;  // empirical log-ratio vs the previous row
};

// Counts at each A (full box, no congruence) plus the empirical growth
// exponent log(count_i/count_{i-1}) / log(A_i/A_{i-1}); undefined on the
// first row or whenever a count is zero.
std::vector<GrowthRow> growth_diagnostic(const ThinFormP& P, std::span<const Int> A_values,
                                         const ThinOptions& opt = {});

struct CongruenceRatio {
  Int count;
  double normalized_ratio;  // count / (A/Q)^(N-k)
};

// Counts {a in [-A,A]^N : P(a)=0, a == c (mod Q)} with componentwise
// 1 <= c <= Q, requiring C*Q <= A.
CongruenceRatio congruence_bound_check(const ThinFormP& P, const Int& A, const Int& Q,
                                       std::span<const Int> c, const ThinOptions& opt = {},
                                       long C = 1);

struct ThinSample {
  std::vector<std::vector<Int>> points;
  bool complete = true;
  std::uint64_t attempts = 0;
  std::string law = "fiber-uniform";  // prefixes uniform, not variety-uniform
};

// Draws prefixes of the first N-1 coordinates uniformly from [-A,A]^(N-1)
// and keeps the exact integer roots in the last coordinate; stops after m
// points or when the attempt budget runs out (complete = false then).
ThinSample sample_thin(const ThinFormP& P, const Int& A, std::size_t m, std::uint64_t seed);

}  // namespace solcensus
