#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ewmb/simlab.hpp"

namespace ewmb {

// Resolved configuration for one subcommand run. Populated from CLI flags
// and an optional config file (flags win).
struct RunConfig {
  // paths
  std::string data_path;     // score: raw CSV
  std::string scores_path;   // solve: scores CSV
  std::string moments_path;  // critval: moment-table CSV
  std::string out_path;      // primary output ("-" = stdout)
  std::string curves_path;   // solve: optional curves CSV
  std::string emit_moments_path;  // solve: optional moment-table CSV
  std::string iters_csv_path;     // simulate: optional per-iteration CSV

  // scoring
  std::string score_mode = "aipw";  // score subcommand default
  double kappa = kDefaultKappa;
  double kappa_clip = kDefaultKappaClip;
  std::string propensity_spec;  // "0.5" or "label=0.5,label=0.3"

  // policy grid
  std::string grid_spec;  // "0:50:500;0,25,100" groups split by ';'
  bool allow_large_grid = false;

  // rule parameters
  std::string rule = "sample-analog";
  std::vector<std::string> rules;  // simulate: several rules
  double k = 0.0;
  double alpha = 0.05;
  double lambda_bar = 1.0 / 60000.0;
  std::uint64_t seed = 1;
  std::uint64_t draws = 10000;
  double sigma_floor = 1e-12;
  bool use_alpha_schedule = false;

  // simulate
  std::string dgp = "prop1";
  std::uint64_t n = 0;
  std::uint64_t iters = 0;
  double t_low = 0.4;
  double t_high = 0.6;
  double q = 0.5;
  double dgp_propensity = 0.5;
  std::string groups_file;  // custom mixture rows
  std::string sim_mode = "ipw";
  double eps_w_rel = 1e-9;
  std::optional<double> eps_w_abs;
};

// "lo:step:hi" (inclusive) or explicit "a,b,c" per group, groups joined
// with ';'.
std::vector<std::vector<double>> parse_grid_spec(const std::string& spec);

// Uniform "0.5" or per-cell "label=0.5,label=0.3" propensities resolved
// against the ingested cell labels.
std::map<int, double> parse_propensity_spec(
    const std::string& spec, const std::vector<std::string>& v_labels);

std::vector<MixtureGroup> read_groups_csv(const std::string& path);

int cmd_score(const RunConfig& cfg);
int cmd_solve(const RunConfig& cfg);
int cmd_critval(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);

// Full CLI: subcommands score/solve/critval/simulate, config-file support,
// exit codes 0 ok / 2 config / 3 data / 4 numeric-degeneracy.
int run_cli(int argc, const char* const* argv);

}  // namespace ewmb
