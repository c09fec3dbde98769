#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace solcensus {

// One flat configuration shared by every subcommand; each subcommand
// validates the fields it actually consumes. Values come from an optional
// key=value file (--config) overridden by explicit command-line flags.
struct RunConfig {
  std::string subcommand;

  int n = 0, d = 0;          // fiber shape
  int n_max = 0, d_max = 0;  // verify-lemmas sweep bounds
  std::string P_file;        // thin-set form, one term per line
  std::string coeffs;        // fiber coefficient vector, comma separated
  std::string b;             // probe-positivity center, comma separated
  long prime = 0;            // solubility place
  std::vector<long> A_schedule;
  long B = 0;                 // thin-count congruence modulus, 0 disables
  std::string residues;       // thin-count congruence residues
  int r = 1;                  // finite-place refinement level
  std::vector<long> r_schedule;  // census reference levels: r_small, p_small, r_mid, p_mid, r_tail
  long p_max = 0;             // prime horizon
  std::vector<double> eta_schedule;  // empty keeps the solver default
  std::uint64_t samples = 1000000;
  std::uint64_t sample_m = 0;  // census sampled-mode draw count
  std::string mode = "exhaustive";
  bool primitive = false;
  std::string strategy = "auto";  // auto | full-scan | solve-last
  long H = 0;                     // probe-positivity search radius
  std::string conditions;         // d-quantity local condition product
  double noise = 0.01;            // convergence noise tolerance
  bool convergence = true;        // census: verdict when the schedule allows

  bool has_seed = false;
  std::uint64_t seed = 0;
  int jobs = 0;  // 0 resolves to the hardware concurrency

  std::string cache_dir;  // default from SOLCENSUS_CACHE_DIR
  std::string out_csv;    // empty prints CSV to stdout
  std::string out_jsonl;  // empty prints records to stdout (record subcommands)

  // solver budgets, shared across subcommands
  long budget_max_level = 26;
  std::uint64_t budget_frontier_cap = 1000000;
  std::uint64_t budget_work_cap = 50000000;
  std::uint64_t budget_real_points = 1000;
  std::uint64_t budget_smooth = 20000000;
  long budget_witness_span = 4000;
};

// args excludes the program name. --config <file> loads key=value defaults
// first (unknown keys rejected), then flags override. Throws
// std::invalid_argument on unknown keys, malformed values, a missing or
// unknown subcommand, or a stochastic subcommand without a seed.
RunConfig parse_config(const std::vector<std::string>& args);

// Dispatches one parsed configuration. Output files are written atomically
// (temporary file, then rename). Returns 0 on success and 2 when a census
// convergence verdict is FAIL; errors are reported by throwing.
int run(const RunConfig& config);

// parse + validate + run with error reporting: prints usage or error
// messages to stderr and returns the process exit code (0 success, 2 failed
// verdict, 1 any error).
int run_cli(int argc, char** argv);

}  // namespace solcensus
