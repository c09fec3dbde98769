#include "solcensus/cli.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "solcensus/census.hpp"
#include "solcensus/combinatorics.hpp"
#include "solcensus/densities.hpp"
#include "solcensus/forms.hpp"
#include "solcensus/io.hpp"
#include "solcensus/numeric.hpp"
#include "solcensus/padic.hpp"
#include "solcensus/real_solver.hpp"
#include "solcensus/thin_set.hpp"

namespace solcensus {

namespace {

using nlohmann::json;

// --help is not an error: carries the help text up to run_cli.
struct HelpShown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

long parse_long_value(const std::string& s, const char* what) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (...) {
    throw std::invalid_argument(std::string(what) + ": not an integer: \"" + s + "\"");
  }
  if (pos != s.size()) {
    throw std::invalid_argument(std::string(what) + ": trailing characters in \"" + s + "\"");
  }
  return v;
}

std::uint64_t parse_u64_value(const std::string& s, const char* what) {
  if (!s.empty() && s[0] == '-') {
    throw std::invalid_argument(std::string(what) + ": must be non-negative, got \"" + s + "\"");
  }
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (...) {
    throw std::invalid_argument(std::string(what) + ": not an integer: \"" + s + "\"");
  }
  if (pos != s.size()) {
    throw std::invalid_argument(std::string(what) + ": trailing characters in \"" + s + "\"");
  }
  return v;
}

double parse_double_value(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    throw std::invalid_argument(std::string(what) + ": not a number: \"" + s + "\"");
  }
  if (pos != s.size()) {
    throw std::invalid_argument(std::string(what) + ": trailing characters in \"" + s + "\"");
  }
  return v;
}

bool parse_bool_value(const std::string& s, const char* what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument(std::string(what) + ": expected true or false, got \"" + s + "\"");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<long> parse_long_list(const std::string& s, const char* what) {
  std::vector<long> out;
  for (const auto& tok : split_list(s)) out.push_back(parse_long_value(tok, what));
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) out.push_back(parse_double_value(tok, what));
  return out;
}

std::vector<Int> parse_int_vector(const std::string& s, const char* what) {
  std::vector<Int> out;
  for (const auto& tok : split_list(s)) {
    try {
      out.emplace_back(tok);
    } catch (...) {
      throw std::invalid_argument(std::string(what) + ": not an integer: \"" + tok + "\"");
    }
  }
  return out;
}

// "3/4", "-2", or a decimal like "0.25", converted exactly.
Rat parse_rat_value(const std::string& s, const char* what) {
  std::string t = s;
  if (std::size_t dot = t.find('.'); dot != std::string::npos) {
    std::string digits = t.substr(0, dot) + t.substr(dot + 1);
    std::size_t frac = t.size() - dot - 1;
    if (digits.empty() || digits == "-" || digits == "+") {
      throw std::invalid_argument(std::string(what) + ": not a number: \"" + s + "\"");
    }
    try {
      Rat q(Int(digits), Int(1));
      Int den;
      mpz_ui_pow_ui(den.get_mpz_t(), 10, frac);
      q /= Rat(den);
      q.canonicalize();
      return q;
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument(std::string(what) + ": not a number: \"" + s + "\"");
    }
  }
  try {
    Rat q(t);
    if (q.get_den() == 0) {
      throw std::invalid_argument(std::string(what) + ": zero denominator in \"" + s + "\"");
    }
    q.canonicalize();
    return q;
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(std::string(what) + ": not a rational: \"" + s + "\"");
  }
}

bool is_prime_long(long p) {
  if (p < 2) return false;
  for (long q = 2; q * q <= p; ++q) {
    if (p % q == 0) return false;
  }
  return true;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_seconds(double s) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", s);
  return buf;
}

std::string iso_timestamp() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json json_int(const Int& v) {
  if (v.fits_slong_p()) return static_cast<std::int64_t>(v.get_si());
  return v.get_str();
}

json json_int_vector(std::span<const Int> v) {
  json arr = json::array();
  for (const Int& x : v) arr.push_back(json_int(x));
  return arr;
}

std::string rat_str(const Rat& q) { return q.get_str(); }

// ---- configuration fields ----------------------------------------------

struct FieldSpec {
  const char* key;   // config-file key; nullptr = flag-only
  const char* flag;  // command-line flag; nullptr = key-only
  const char* help;
  void (*set)(RunConfig&, const std::string&);
};

const FieldSpec kFields[] = {
    {"subcommand", nullptr, nullptr,
     +[](RunConfig& c, const std::string& v) { c.subcommand = v; }},
    {"n", "--n", "fiber variable count n",
     +[](RunConfig& c, const std::string& v) { c.n = static_cast<int>(parse_long_value(v, "n")); }},
    {"d", "--d", "fiber degree d",
     +[](RunConfig& c, const std::string& v) { c.d = static_cast<int>(parse_long_value(v, "d")); }},
    {"n_max", "--n-max", "verify-lemmas: largest n (sweep starts at 3)",
     +[](RunConfig& c, const std::string& v) {
       c.n_max = static_cast<int>(parse_long_value(v, "n_max"));
     }},
    {"d_max", "--d-max", "verify-lemmas: largest d (sweep starts at 3)",
     +[](RunConfig& c, const std::string& v) {
       c.d_max = static_cast<int>(parse_long_value(v, "d_max"));
     }},
    {"P_file", "--P", "thin-set form file, one term per line: coefficient e1 ... eN",
     +[](RunConfig& c, const std::string& v) { c.P_file = v; }},
    {"coeffs", "--coeffs", "fiber coefficient vector, comma separated",
     +[](RunConfig& c, const std::string& v) { c.coeffs = v; }},
    {"b", "--b", "probe-positivity center, comma separated",
     +[](RunConfig& c, const std::string& v) { c.b = v; }},
    {"prime", "--prime", "solubility: the prime p",
     +[](RunConfig& c, const std::string& v) { c.prime = parse_long_value(v, "prime"); }},
    {"A", "--A", "coefficient box height(s), comma separated",
     +[](RunConfig& c, const std::string& v) { c.A_schedule = parse_long_list(v, "A"); }},
    {"B", "--B", "thin-count: congruence modulus (0 disables)",
     +[](RunConfig& c, const std::string& v) { c.B = parse_long_value(v, "B"); }},
    {"residues", "--residues", "thin-count: congruence residues, comma separated",
     +[](RunConfig& c, const std::string& v) { c.residues = v; }},
    {"r", "--r", "finite-place refinement level",
     +[](RunConfig& c, const std::string& v) { c.r = static_cast<int>(parse_long_value(v, "r")); }},
    {"r_schedule", "--r-schedule",
     "census reference levels: r_small,p_small,r_mid,p_mid,r_tail (default 3,5,2,13,1)",
     +[](RunConfig& c, const std::string& v) { c.r_schedule = parse_long_list(v, "r_schedule"); }},
    {"p_max", "--p-max", "prime horizon: places p <= p_max are checked",
     +[](RunConfig& c, const std::string& v) { c.p_max = parse_long_value(v, "p_max"); }},
    {"eta", "--eta", "real-density slab half-widths, strictly decreasing",
     +[](RunConfig& c, const std::string& v) { c.eta_schedule = parse_double_list(v, "eta"); }},
    {"samples", "--samples", "Monte Carlo samples per eta",
     +[](RunConfig& c, const std::string& v) { c.samples = parse_u64_value(v, "samples"); }},
    {"sample_m", "--sample-m", "census sampled mode: number of draws",
     +[](RunConfig& c, const std::string& v) { c.sample_m = parse_u64_value(v, "sample_m"); }},
    {"mode", "--mode", "census mode: exhaustive or sampled",
     +[](RunConfig& c, const std::string& v) { c.mode = v; }},
    {"primitive", nullptr, nullptr,
     +[](RunConfig& c, const std::string& v) { c.primitive = parse_bool_value(v, "primitive"); }},
    {"strategy", "--strategy", "thin-count strategy: auto, full-scan or solve-last",
     +[](RunConfig& c, const std::string& v) { c.strategy = v; }},
    {"H", "--H", "probe-positivity: zero search radius",
     +[](RunConfig& c, const std::string& v) { c.H = parse_long_value(v, "H"); }},
    {"conditions", "--conditions",
     "d-quantity condition product, e.g. \"p3:1,1,1,1@1;real:0..1,0..1,0..1,0..1\"",
     +[](RunConfig& c, const std::string& v) { c.conditions = v; }},
    {"noise", "--noise", "census convergence noise tolerance on midpoint deltas",
     +[](RunConfig& c, const std::string& v) { c.noise = parse_double_value(v, "noise"); }},
    {"convergence", nullptr, nullptr,
     +[](RunConfig& c, const std::string& v) {
       c.convergence = parse_bool_value(v, "convergence");
     }},
    {"seed", "--seed", "random seed (required by stochastic subcommands)",
     +[](RunConfig& c, const std::string& v) {
       c.seed = parse_u64_value(v, "seed");
       c.has_seed = true;
     }},
    {"jobs", "--jobs", "worker threads (default: hardware concurrency)",
     +[](RunConfig& c, const std::string& v) {
       c.jobs = static_cast<int>(parse_long_value(v, "jobs"));
     }},
    {"cache_dir", "--cache-dir", "census verdict cache directory (default: $SOLCENSUS_CACHE_DIR)",
     +[](RunConfig& c, const std::string& v) { c.cache_dir = v; }},
    {"out", "--out", "CSV output file (default: stdout)",
     +[](RunConfig& c, const std::string& v) { c.out_csv = v; }},
    {"log", "--log", "JSON-lines output file (default: stdout for record subcommands)",
     +[](RunConfig& c, const std::string& v) { c.out_jsonl = v; }},
    {"budget_max_level", "--budget-max-level", "p-adic lifting depth",
     +[](RunConfig& c, const std::string& v) {
       c.budget_max_level = parse_long_value(v, "budget_max_level");
     }},
    {"budget_frontier_cap", "--budget-frontier-cap", "p-adic solutions stored per level",
     +[](RunConfig& c, const std::string& v) {
       c.budget_frontier_cap = parse_u64_value(v, "budget_frontier_cap");
     }},
    {"budget_work_cap", "--budget-work-cap", "p-adic candidate evaluations in total",
     +[](RunConfig& c, const std::string& v) {
       c.budget_work_cap = parse_u64_value(v, "budget_work_cap");
     }},
    {"budget_real_points", "--budget-real-points", "real solver random probe count",
     +[](RunConfig& c, const std::string& v) {
       c.budget_real_points = parse_u64_value(v, "budget_real_points");
     }},
    {"budget_smooth", "--budget-smooth", "smooth-reduction point scan cap",
     +[](RunConfig& c, const std::string& v) {
       c.budget_smooth = parse_u64_value(v, "budget_smooth");
     }},
    {"budget_witness_span", "--budget-witness-span", "tail witness search width past p_max",
     +[](RunConfig& c, const std::string& v) {
       c.budget_witness_span = parse_long_value(v, "budget_witness_span");
     }},
};

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const FieldSpec& f : kFields) {
    if (f.key != nullptr && key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("unknown config key: " + key);
}

const char* kSubcommands[] = {"verify-lemmas", "solubility",   "real",       "thin-count",
                              "densities",     "census",       "d-quantity", "probe-positivity"};

bool is_stochastic(const std::string& sub) {
  return sub == "densities" || sub == "census" || sub == "probe-positivity";
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

void validate_config(RunConfig& cfg) {
  bool known = false;
  for (const char* s : kSubcommands) known = known || cfg.subcommand == s;
  require(!cfg.subcommand.empty(),
          "missing subcommand; expected one of: verify-lemmas, solubility, real, thin-count, "
          "densities, census, d-quantity, probe-positivity");
  require(known, "unknown subcommand: " + cfg.subcommand);
  if (cfg.jobs == 0) {
    unsigned hc = std::thread::hardware_concurrency();
    cfg.jobs = hc == 0 ? 1 : static_cast<int>(hc);
  }
  require(cfg.jobs >= 1, "jobs must be positive");
  require(cfg.noise >= 0, "noise must be non-negative");
  require(cfg.budget_max_level >= 1, "budget_max_level must be positive");
  require(cfg.budget_frontier_cap >= 1, "budget_frontier_cap must be positive");
  require(cfg.budget_work_cap >= 1, "budget_work_cap must be positive");
  require(cfg.budget_witness_span >= 0, "budget_witness_span must be non-negative");
  if (is_stochastic(cfg.subcommand)) {
    require(cfg.has_seed, cfg.subcommand + " draws random samples; --seed is required");
  }

  const std::string& sub = cfg.subcommand;
  auto need_shape = [&] {
    require(cfg.n >= 1, "missing or invalid --n");
    require(cfg.d >= 1, "missing or invalid --d");
  };
  auto need_P = [&] { require(!cfg.P_file.empty(), "missing --P <file>"); };
  auto need_A = [&] {
    require(!cfg.A_schedule.empty(), "missing --A");
    for (long A : cfg.A_schedule) require(A >= 1, "A values must be positive");
  };
  if (sub == "verify-lemmas") {
    require(cfg.n_max >= 3, "verify-lemmas needs --n-max >= 3");
    require(cfg.d_max >= 3, "verify-lemmas needs --d-max >= 3");
  } else if (sub == "solubility") {
    need_shape();
    require(!cfg.coeffs.empty(), "missing --coeffs");
    require(is_prime_long(cfg.prime), "--prime must be a prime >= 2");
  } else if (sub == "real") {
    need_shape();
    require(!cfg.coeffs.empty(), "missing --coeffs");
  } else if (sub == "thin-count") {
    need_P();
    need_A();
    require(cfg.B >= 0, "B must be non-negative");
    if (cfg.B > 0) require(!cfg.residues.empty(), "congruence modulus B needs --residues");
  } else if (sub == "densities") {
    need_shape();
    need_P();
    require(cfg.p_max >= 0, "p_max must be non-negative");
    require(cfg.r >= 1, "r must be positive");
    require(cfg.samples >= 1, "samples must be positive");
  } else if (sub == "census") {
    need_shape();
    need_P();
    need_A();
    require(cfg.p_max >= 0, "p_max must be non-negative");
    require(cfg.mode == "exhaustive" || cfg.mode == "sampled",
            "mode must be exhaustive or sampled");
    if (cfg.mode == "sampled") require(cfg.sample_m >= 1, "sampled mode needs --sample-m >= 1");
    if (!cfg.r_schedule.empty()) {
      require(cfg.r_schedule.size() == 5,
              "r_schedule needs 5 values: r_small,p_small,r_mid,p_mid,r_tail");
      for (long v : cfg.r_schedule) require(v >= 1, "r_schedule values must be positive");
    }
  } else if (sub == "d-quantity") {
    need_shape();
    need_P();
    need_A();
  } else if (sub == "probe-positivity") {
    need_shape();
    need_P();
    require(!cfg.b.empty(), "missing --b");
    require(cfg.H >= 1, "probe-positivity needs --H >= 1");
    require(cfg.p_max >= 0, "p_max must be non-negative");
  }
}

// ---- shared runtime pieces ----------------------------------------------

CensusBudgets make_budgets(const RunConfig& cfg) {
  CensusBudgets b;
  b.zp.max_level = cfg.budget_max_level;
  b.zp.frontier_cap = cfg.budget_frontier_cap;
  b.zp.work_cap = cfg.budget_work_cap;
  b.real.random_points = cfg.budget_real_points;
  b.smooth_budget = cfg.budget_smooth;
  b.witness_span = cfg.budget_witness_span;
  b.sample_m = cfg.sample_m;
  b.jobs = cfg.jobs;
  b.cache_dir = cfg.cache_dir;
  return b;
}

ThinFormP load_thin_form(const RunConfig& cfg) {
  return parse_thin_form(read_text_file(cfg.P_file));
}

VeroneseBasis make_basis_for(const RunConfig& cfg, const ThinFormP& P) {
  VeroneseBasis basis = veronese_basis(cfg.n, cfg.d);
  std::size_t N = veronese_dimension(cfg.n, cfg.d);
  if (N != static_cast<std::size_t>(P.N)) {
    throw std::invalid_argument("the thin form has N = " + std::to_string(P.N) +
                                " coordinates but (n, d) = (" + std::to_string(cfg.n) + ", " +
                                std::to_string(cfg.d) + ") needs N = " + std::to_string(N));
  }
  return basis;
}

std::vector<Int> parse_fiber_coeffs(const RunConfig& cfg, const std::string& text,
                                    const char* what) {
  std::vector<Int> a = parse_int_vector(text, what);
  std::size_t N = veronese_dimension(cfg.n, cfg.d);
  if (a.size() != N) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(N) +
                                " entries for (n, d) = (" + std::to_string(cfg.n) + ", " +
                                std::to_string(cfg.d) + "), got " + std::to_string(a.size()));
  }
  return a;
}

ThinStrategy resolve_strategy(const std::string& s, const ThinFormP& P) {
  if (s == "auto") return P.solvable_last ? ThinStrategy::solve_last : ThinStrategy::full_scan;
  if (s == "full-scan") return ThinStrategy::full_scan;
  if (s == "solve-last") {
    if (!P.solvable_last) {
      throw std::invalid_argument(
          "strategy solve-last needs a quadratic or monic-in-last-variable form");
    }
    return ThinStrategy::solve_last;
  }
  throw std::invalid_argument("unknown strategy: " + s + " (expected auto, full-scan, solve-last)");
}

// CSV files open with a timestamp comment; stdout stays pure so pipelines
// and byte-comparisons see data only.
void emit_csv(const RunConfig& cfg, const std::string& body) {
  if (cfg.out_csv.empty()) {
    std::fputs(body.c_str(), stdout);
  } else {
    atomic_write_file(cfg.out_csv, "# generated " + iso_timestamp() + "\n" + body);
  }
}

void emit_records(const RunConfig& cfg, const std::string& lines) {
  if (cfg.out_jsonl.empty()) {
    std::fputs(lines.c_str(), stdout);
  } else {
    atomic_write_file(cfg.out_jsonl, lines);
  }
}

// ---- subcommands ---------------------------------------------------------

int run_verify_lemmas(const RunConfig& cfg) {
  std::string csv = "n,d,N,threshold,admissible_k,lemma24,max_partition,max_value\n";
  for (int n = 3; n <= cfg.n_max; ++n) {
    for (int d = 3; d <= cfg.d_max; ++d) {
      RegimeReport rep = regime_report(n, d);
      Lemma24Result lem = lemma24_holds(n, d);
      CndMax mx = c_nd_max(n, d);
      std::string ks;
      for (long k : rep.admissible_k) {
        if (!ks.empty()) ks += ';';
        ks += std::to_string(k);
      }
      std::string parts;
      for (auto [d1, d2] : mx.argmax) {
        if (!parts.empty()) parts += ';';
        parts += std::to_string(d1) + "+" + std::to_string(d2);
      }
      csv += std::to_string(n) + "," + std::to_string(d) + "," + std::to_string(rep.N) + "," +
             std::to_string(rep.threshold) + "," + ks + "," + (lem.holds ? "1" : "0") + "," +
             parts + "," + rat_str(mx.value) + "\n";
    }
  }
  emit_csv(cfg, csv);
  return 0;
}

int run_solubility(const RunConfig& cfg) {
  VeroneseBasis basis = veronese_basis(cfg.n, cfg.d);
  std::vector<Int> a = parse_fiber_coeffs(cfg, cfg.coeffs, "coeffs");
  CensusBudgets budgets = make_budgets(cfg);
  SolubilityVerdict v = zp_solubility(basis, a, cfg.prime, budgets.zp);

  json rec;
  rec["subcommand"] = "solubility";
  rec["n"] = cfg.n;
  rec["d"] = cfg.d;
  rec["p"] = cfg.prime;
  rec["a"] = json_int_vector(a);
  rec["kind"] = v.kind == SolubilityVerdict::Kind::soluble     ? "soluble"
                : v.kind == SolubilityVerdict::Kind::insoluble ? "insoluble"
                                                               : "unknown";
  if (v.hensel) {
    rec["hensel"] = {{"point", json_int_vector(v.hensel->point)},
                     {"level", v.hensel->level},
                     {"alpha", v.hensel->alpha},
                     {"pivot", v.hensel->pivot},
                     {"content_valuation", v.hensel->content_valuation},
                     {"stability_radius", rat_str(stability_radius(*v.hensel))}};
  }
  if (v.exact_zero) {
    rec["exact_zero"] = {{"point", json_int_vector(v.exact_zero->point)},
                         {"content_valuation", v.exact_zero->content_valuation}};
  }
  if (v.exhaustion) {
    rec["exhaustion"] = {{"exhaustion_level", v.exhaustion->exhaustion_level},
                         {"first_empty_level", v.exhaustion->first_empty_level},
                         {"content_valuation", v.exhaustion->content_valuation}};
  }
  if (v.unknown) {
    const char* why = v.unknown->reason == UnknownOutcome::Reason::depth_exceeded ? "depth_exceeded"
                      : v.unknown->reason == UnknownOutcome::Reason::frontier_cap ? "frontier_cap"
                                                                                  : "work_cap";
    rec["unknown"] = {{"reason", why},
                      {"level_reached", v.unknown->level_reached},
                      {"frontier_size", v.unknown->frontier_size},
                      {"content_valuation", v.unknown->content_valuation}};
  }
  emit_records(cfg, rec.dump() + "\n");
  return 0;
}

int run_real(const RunConfig& cfg) {
  VeroneseBasis basis = veronese_basis(cfg.n, cfg.d);
  std::vector<Int> a = parse_fiber_coeffs(cfg, cfg.coeffs, "coeffs");
  RealOptions opt;
  opt.random_points = make_budgets(cfg).real.random_points;
  RealVerdict v = real_solubility(basis, a, opt);

  const char* method = "none";
  switch (v.method) {
    case RealVerdict::Method::none: method = "none"; break;
    case RealVerdict::Method::odd_degree: method = "odd_degree"; break;
    case RealVerdict::Method::exact_zero: method = "exact_zero"; break;
    case RealVerdict::Method::sign_change: method = "sign_change"; break;
    case RealVerdict::Method::definiteness: method = "definiteness"; break;
    case RealVerdict::Method::binary_root_count: method = "binary_root_count"; break;
  }
  json rec;
  rec["subcommand"] = "real";
  rec["n"] = cfg.n;
  rec["d"] = cfg.d;
  rec["a"] = json_int_vector(a);
  rec["kind"] = v.kind == RealVerdict::Kind::soluble     ? "soluble"
                : v.kind == RealVerdict::Kind::insoluble ? "insoluble"
                                                         : "unknown";
  rec["method"] = method;
  if (v.witness) {
    rec["witness"] = {{"point", v.witness->point}, {"residual", v.witness->residual}};
  }
  emit_records(cfg, rec.dump() + "\n");
  return 0;
}

int run_thin_count(const RunConfig& cfg) {
  ThinFormP P = load_thin_form(cfg);
  CongruenceSpec cong = CongruenceSpec::none(P.N);
  std::string rhash;
  if (cfg.B > 0) {
    std::vector<Int> res = parse_int_vector(cfg.residues, "residues");
    if (res.size() != static_cast<std::size_t>(P.N)) {
      throw std::invalid_argument("residues: expected " + std::to_string(P.N) + " entries, got " +
                                  std::to_string(res.size()));
    }
    cong.modulus = cfg.B;
    cong.residue.resize(res.size());
    std::string canon = std::to_string(cfg.B) + "|";
    for (std::size_t i = 0; i < res.size(); ++i) {
      mpz_fdiv_r(cong.residue[i].get_mpz_t(), res[i].get_mpz_t(), cong.modulus.get_mpz_t());
      if (i) canon += ',';
      canon += cong.residue[i].get_str();
    }
    rhash = hex64(fnv1a64(canon));
  }
  ThinOptions opt;
  opt.strategy = resolve_strategy(cfg.strategy, P);
  opt.primitive_only = cfg.primitive;
  opt.jobs = cfg.jobs;

  std::string csv = "A,B,r_hash,count,seconds\n";
  for (long A : cfg.A_schedule) {
    auto t0 = std::chrono::steady_clock::now();
    Int count = count_thin(P, Int(A), BoxSpec::full(P.N), cong, opt);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    csv += std::to_string(A) + "," + std::to_string(cfg.B) + "," + rhash + "," + count.get_str() +
           "," + fmt_seconds(secs) + "\n";
  }
  emit_csv(cfg, csv);
  return 0;
}

int run_densities(const RunConfig& cfg) {
  ThinFormP P = load_thin_form(cfg);
  make_basis_for(cfg, P);  // shape consistency check only

  std::string csv = "place,method,lower,upper,level_or_eta,samples,stderr\n";
  SigmaInftyOptions so;
  if (!cfg.eta_schedule.empty()) so.eta_schedule = cfg.eta_schedule;
  so.samples = cfg.samples;
  so.seed = cfg.seed;
  so.jobs = cfg.jobs;
  DensityInterval di = sigma_infty(P, BoxSpec::full(P.N), so);
  const char* method = di.method == DensityMethod::exact_count         ? "exact_count"
                       : di.method == DensityMethod::certified_interval ? "certified_interval"
                                                                        : "monte_carlo";
  csv += std::string("0,") + method + "," + fmt_double(Rat(di.lower).get_d()) + "," +
         fmt_double(Rat(di.upper).get_d()) + "," + fmt_double(di.eta) + "," +
         std::to_string(di.samples) + "," + fmt_double(di.stderr_value) + "\n";

  SigmaPOptions spo;
  spo.jobs = cfg.jobs;
  for (long p : primes_up_to(cfg.p_max)) {
    Rat s = sigma_p_level(P, p, cfg.r, PadicCondition::all(), spo);
    std::string sv = fmt_double(s.get_d());
    csv += std::to_string(p) + ",exact_count," + sv + "," + sv + "," + std::to_string(cfg.r) +
           ",0,0\n";
  }
  emit_csv(cfg, csv);
  return 0;
}

std::string census_csv_row(long A, const CensusReport& rep, double midpoint, double delta,
                           bool first) {
  std::string row = std::to_string(A) + "," + (rep.defined ? "1" : "0") + "," +
                    rep.total.get_str() + "," + rep.soluble.get_str() + "," +
                    rep.insoluble.get_str() + "," + rep.unknown.get_str() + ",";
  if (rep.defined) {
    row += fmt_double(Rat(rep.rho_lower).get_d());
    row += ",";
    row += fmt_double(Rat(rep.rho_upper).get_d());
    row += ",";
    row += fmt_double(midpoint);
    row += ",";
    if (!first && delta >= 0) row += fmt_double(delta);
  } else {
    row += ",,,";
  }
  row += "," + std::to_string(rep.rational_zero) + "," + std::to_string(rep.tail_covered) + "," +
         std::to_string(rep.tail_witness) + "," + std::to_string(rep.cache_hits) + "\n";
  return row;
}

json census_point_record(long A, const PointVerdict& v, std::span<const Int> a) {
  json rec;
  rec["record"] = "verdict";
  rec["A"] = A;
  rec["a"] = json_int_vector(a);
  rec["code"] = std::string(1, v.code);
  if (v.place >= 0) {
    rec["place"] = v.place;
  } else {
    rec["place"] = nullptr;
  }
  rec["route"] = std::string(1, static_cast<char>(v.route));
  return rec;
}

json census_summary_record(const CensusReport& rep) {
  json stats = json::array();
  for (const PlaceStats& ps : rep.place_stats) {
    stats.push_back({{"p", ps.p}, {"insoluble", ps.insoluble}, {"unknown", ps.unknown}});
  }
  json rec;
  rec["record"] = "summary";
  rec["A"] = rep.A;
  rec["mode"] = rep.mode == CensusMode::exhaustive ? "exhaustive" : "sampled";
  rec["defined"] = rep.defined;
  rec["total"] = json_int(rep.total);
  rec["soluble"] = json_int(rep.soluble);
  rec["insoluble"] = json_int(rep.insoluble);
  rec["unknown"] = json_int(rep.unknown);
  if (rep.defined) {
    rec["rho_lower"] = rat_str(rep.rho_lower);
    rec["rho_upper"] = rat_str(rep.rho_upper);
  }
  rec["rational_zero"] = rep.rational_zero;
  rec["tail_covered"] = rep.tail_covered;
  rec["tail_witness"] = rep.tail_witness;
  rec["cache_hits"] = rep.cache_hits;
  rec["place_stats"] = stats;
  return rec;
}

int run_census(const RunConfig& cfg) {
  ThinFormP P = load_thin_form(cfg);
  VeroneseBasis basis = make_basis_for(cfg, P);
  CensusBudgets budgets = make_budgets(cfg);
  CensusMode mode = cfg.mode == "sampled" ? CensusMode::sampled : CensusMode::exhaustive;

  bool increasing = cfg.A_schedule.size() >= 3;
  for (std::size_t i = 1; i < cfg.A_schedule.size(); ++i) {
    increasing = increasing && cfg.A_schedule[i - 1] < cfg.A_schedule[i];
  }
  bool do_convergence = cfg.convergence && mode == CensusMode::exhaustive && increasing;

  std::vector<CensusReport> reports;
  std::vector<double> midpoints, deltas;
  std::string verdict, reason;
  double cp_lower_inflated = 0.0, cp_upper = 1.0;
  if (do_convergence) {
    ConvergenceOptions co;
    co.budgets = budgets;
    co.seed = cfg.seed;
    co.noise_tolerance = cfg.noise;
    co.cp.zp = budgets.zp;
    co.cp.sigma_p.jobs = cfg.jobs;
    if (!cfg.r_schedule.empty()) {
      co.cp.r_schedule = {static_cast<int>(cfg.r_schedule[0]), cfg.r_schedule[1],
                          static_cast<int>(cfg.r_schedule[2]), cfg.r_schedule[3],
                          static_cast<int>(cfg.r_schedule[4])};
    }
    co.cp.sigma_infty.samples = cfg.samples;
    co.cp.sigma_infty.seed = cfg.seed;
    co.cp.sigma_infty.jobs = cfg.jobs;
    if (!cfg.eta_schedule.empty()) co.cp.sigma_infty.eta_schedule = cfg.eta_schedule;
    ConvergenceReport conv = convergence_report(P, basis, cfg.A_schedule, cfg.p_max, co);
    for (const ConvergenceRow& row : conv.rows) {
      reports.push_back(row.report);
      midpoints.push_back(row.midpoint);
      deltas.push_back(row.delta);
    }
    verdict = conv.verdict;
    reason = conv.reason;
    cp_lower_inflated = conv.cp_lower_inflated;
    cp_upper = conv.cp_upper;
  } else {
    for (long A : cfg.A_schedule) {
      reports.push_back(rho_estimate(P, basis, A, cfg.p_max, budgets, cfg.seed, mode));
      const CensusReport& rep = reports.back();
      double mid =
          rep.defined ? Rat(Rat(rep.rho_lower + rep.rho_upper) / 2).get_d() : 0.0;
      midpoints.push_back(mid);
      deltas.push_back(midpoints.size() == 1 ? -1.0
                                             : std::abs(mid - midpoints[midpoints.size() - 2]));
    }
  }

  std::string csv =
      "A,defined,total,soluble,insoluble,unknown,rho_lower,rho_upper,midpoint,delta,"
      "rational_zero,tail_covered,tail_witness,cache_hits\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    csv += census_csv_row(reports[i].A, reports[i], midpoints[i], deltas[i], i == 0);
  }
  if (do_convergence) {
    csv += "# convergence " + verdict + ": " + reason + "\n";
    csv += "# cp_lower_inflated=" + fmt_double(cp_lower_inflated) +
           " cp_upper=" + fmt_double(cp_upper) + "\n";
  }
  emit_csv(cfg, csv);

  if (!cfg.out_jsonl.empty()) {
    std::string lines;
    ThinOptions topt;
    topt.strategy = P.solvable_last ? ThinStrategy::solve_last : ThinStrategy::full_scan;
    topt.primitive_only = true;
    topt.jobs = cfg.jobs;
    for (const CensusReport& rep : reports) {
      std::vector<std::vector<Int>> points;
      if (mode == CensusMode::exhaustive) {
        points = collect_thin(P, Int(rep.A), BoxSpec::full(P.N), CongruenceSpec::none(P.N), topt);
      } else {
        points = sample_thin(P, Int(rep.A), budgets.sample_m, cfg.seed).points;
      }
      for (const auto& a : points) {
        PointVerdict v = classify_point(P, basis, a, cfg.p_max, budgets);
        lines += census_point_record(rep.A, v, a).dump() + "\n";
      }
      lines += census_summary_record(rep).dump() + "\n";
    }
    atomic_write_file(cfg.out_jsonl, lines);
  }
  return verdict == "FAIL" ? 2 : 0;
}

LocalConditionProduct parse_conditions(const std::string& text, int N) {
  LocalConditionProduct U;
  if (text.empty()) return U;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(';', pos);
    std::string factor =
        text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    pos = end == std::string::npos ? text.size() + 1 : end + 1;
    if (factor.empty()) continue;
    std::size_t colon = factor.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("condition factor needs place:spec, got \"" + factor + "\"");
    }
    std::string place = factor.substr(0, colon);
    std::string spec = factor.substr(colon + 1);
    if (place == "real") {
      if (spec == "T") {
        U.real_t_marker = true;
        continue;
      }
      BoxSpec box;
      for (const std::string& iv : split_list(spec)) {
        std::size_t dots = iv.find("..");
        if (dots == std::string::npos) {
          throw std::invalid_argument("real interval needs lo..hi, got \"" + iv + "\"");
        }
        Rat lo = parse_rat_value(iv.substr(0, dots), "real box");
        Rat hi = parse_rat_value(iv.substr(dots + 2), "real box");
        box.intervals.emplace_back(lo, hi);
      }
      if (box.intervals.size() != static_cast<std::size_t>(N)) {
        throw std::invalid_argument("real box: expected " + std::to_string(N) +
                                    " intervals, got " + std::to_string(box.intervals.size()));
      }
      U.real_box = std::move(box);
    } else if (!place.empty() && place[0] == 'p') {
      long p = parse_long_value(place.substr(1), "condition place");
      LocalConditionProduct::FinitePlace fp;
      fp.p = p;
      if (spec == "T") {
        fp.t_marker = true;
      } else {
        std::size_t at = spec.find('@');
        if (at == std::string::npos) {
          throw std::invalid_argument("finite condition needs center@level or T, got \"" + spec +
                                      "\"");
        }
        fp.center = parse_int_vector(spec.substr(0, at), "condition center");
        fp.level = static_cast<int>(parse_long_value(spec.substr(at + 1), "condition level"));
        if (fp.center.size() != static_cast<std::size_t>(N)) {
          throw std::invalid_argument("condition center: expected " + std::to_string(N) +
                                      " entries, got " + std::to_string(fp.center.size()));
        }
      }
      U.finite.push_back(std::move(fp));
    } else {
      throw std::invalid_argument("unknown condition place: \"" + place +
                                  "\" (expected real or p<prime>)");
    }
  }
  return U;
}

int run_d_quantity(const RunConfig& cfg) {
  ThinFormP P = load_thin_form(cfg);
  VeroneseBasis basis = make_basis_for(cfg, P);
  LocalConditionProduct U = parse_conditions(cfg.conditions, P.N);
  CensusBudgets budgets = make_budgets(cfg);

  std::string csv = "A,defined,numerator,denominator,value,unknown_members\n";
  for (long A : cfg.A_schedule) {
    DQuantity dq = d_quantity(P, basis, U, A, budgets);
    csv += std::to_string(A) + "," + (dq.defined ? "1" : "0") + "," + dq.numerator.get_str() +
           "," + dq.denominator.get_str() + "," +
           (dq.defined ? fmt_double(Rat(dq.value).get_d()) : "") + "," +
           std::to_string(dq.unknown_members) + "\n";
  }
  emit_csv(cfg, csv);
  return 0;
}

int run_probe_positivity(const RunConfig& cfg) {
  ThinFormP P = load_thin_form(cfg);
  VeroneseBasis basis = make_basis_for(cfg, P);
  std::vector<Int> b = parse_fiber_coeffs(cfg, cfg.b, "b");
  CensusBudgets budgets = make_budgets(cfg);
  ProbeResult res = positivity_probe(P, basis, b, cfg.H, cfg.p_max, budgets, cfg.seed);

  json rec;
  rec["subcommand"] = "probe-positivity";
  rec["n"] = cfg.n;
  rec["d"] = cfg.d;
  rec["b"] = json_int_vector(b);
  rec["H"] = cfg.H;
  rec["p_max"] = cfg.p_max;
  rec["seed"] = cfg.seed;
  if (res.certificate) {
    const PositivityCertificate& cert = *res.certificate;
    json balls = json::array();
    for (const PrimeBall& ball : cert.prime_balls) {
      balls.push_back({{"p", ball.p},
                       {"alpha", ball.alpha},
                       {"eta", Rat(ball.eta).get_d()},
                       {"eta_exact", rat_str(ball.eta)},
                       {"validated", ball.validated}});
    }
    rec["certificate"] = {{"y", json_int_vector(cert.y)},
                          {"pivot", cert.pivot},
                          {"eta_infty", Rat(cert.eta_infty).get_d()},
                          {"eta_infty_exact", rat_str(cert.eta_infty)},
                          {"C", Rat(cert.C).get_d()},
                          {"C_exact", rat_str(cert.C)},
                          {"real_validated", cert.real_validated},
                          {"prime_balls", balls}};
    rec["failure"] = nullptr;
  } else {
    rec["certificate"] = nullptr;
    rec["failure"] = res.failure_reason;
  }
  emit_records(cfg, rec.dump() + "\n");
  return 0;
}

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig cfg;
  if (const char* env = std::getenv("SOLCENSUS_CACHE_DIR")) cfg.cache_dir = env;

  // The defaults file loads before CLI11 runs, so flags always win.
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw std::invalid_argument("--config needs a file path");
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (!config_path.empty()) {
    for (const auto& [key, value] : parse_kv_config(read_text_file(config_path))) {
      apply_key(cfg, key, value);
    }
  }

  CLI::App app{"local solubility census over thin coefficient sets"};
  app.name("solcensus");
  std::string config_dummy;
  app.add_option("--config", config_dummy, "key=value defaults file (flags override)");
  app.add_option("subcommand", cfg.subcommand,
                 "verify-lemmas | solubility | real | thin-count | densities | census | "
                 "d-quantity | probe-positivity");
  for (const FieldSpec& f : kFields) {
    if (f.flag == nullptr) continue;
    auto setter = f.set;
    app.add_option_function<std::string>(
        f.flag, [&cfg, setter](const std::string& v) { setter(cfg, v); }, f.help);
  }
  app.add_flag_callback(
      "--primitive", [&cfg] { cfg.primitive = true; }, "thin-count: primitive vectors only");
  app.add_flag_callback(
      "--convergence", [&cfg] { cfg.convergence = true; },
      "census: emit a stabilization verdict (needs >= 3 increasing A values)");
  app.add_flag_callback(
      "--no-convergence", [&cfg] { cfg.convergence = false; },
      "census: per-A interval rows only");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpShown(app.help());
  } catch (const CLI::ParseError& e) {
    throw std::invalid_argument(e.what());
  }

  validate_config(cfg);
  return cfg;
}

int run(const RunConfig& cfg) {
  if (cfg.subcommand == "verify-lemmas") return run_verify_lemmas(cfg);
  if (cfg.subcommand == "solubility") return run_solubility(cfg);
  if (cfg.subcommand == "real") return run_real(cfg);
  if (cfg.subcommand == "thin-count") return run_thin_count(cfg);
  if (cfg.subcommand == "densities") return run_densities(cfg);
  if (cfg.subcommand == "census") return run_census(cfg);
  if (cfg.subcommand == "d-quantity") return run_d_quantity(cfg);
  if (cfg.subcommand == "probe-positivity") return run_probe_positivity(cfg);
  throw std::invalid_argument("unknown subcommand: " + cfg.subcommand);
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    RunConfig cfg = parse_config(args);
    return run(cfg);
  } catch (const HelpShown& h) {
    std::fputs(h.what(), stdout);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\nsee: solcensus --help\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace solcensus
