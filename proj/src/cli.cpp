#include "ewmb/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ewmb/critical_value.hpp"
#include "ewmb/csv.hpp"
#include "ewmb/errors.hpp"
#include "ewmb/moments.hpp"
#include "ewmb/report.hpp"
#include "ewmb/rules.hpp"

namespace ewmb {

namespace {

std::string trim_ws(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(trim_ws(s.substr(start)));
      return out;
    }
    out.push_back(trim_ws(s.substr(start, pos - start)));
    start = pos + 1;
  }
}

double parse_cfg_double(const std::string& tok, const std::string& what) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v))
    throw ConfigError(what + ": cannot parse '" + tok + "'");
  return v;
}

// "-" or empty means stdout.
void emit_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::fwrite(content.data(), 1, content.size(), stdout);
    std::fflush(stdout);
    return;
  }
  write_text_file(path, content);
}

JsonWriter& kv_opt(JsonWriter& w, const std::string& key,
                   const std::optional<double>& v) {
  w.key(key);
  return v ? w.value(*v) : w.null_value();
}

JsonWriter& kv_opt_count(JsonWriter& w, const std::string& key,
                         const std::optional<std::size_t>& v) {
  w.key(key);
  return v ? w.value(static_cast<std::uint64_t>(*v)) : w.null_value();
}

// Empty string reports as null (unset path / unset spec).
JsonWriter& kv_opt_str(JsonWriter& w, const std::string& key,
                       const std::string& v) {
  w.key(key);
  return v.empty() ? w.null_value() : w.value(v);
}

void write_thresholds(JsonWriter& w, const std::string& key,
                      const ThresholdPolicy& policy) {
  w.key(key).begin_array();
  for (const double t : policy.thresholds) w.value(t);
  w.end_array();
}

void write_scoring_config(JsonWriter& w, const RunConfig& cfg) {
  w.kv("mode", cfg.score_mode);
  w.kv("kappa", cfg.kappa);
  w.kv("kappa_clip", cfg.kappa_clip);
  kv_opt_str(w, "propensity", cfg.propensity_spec);
}

std::vector<ScoredRecord> score_records(const RunConfig& cfg,
                                        const RawDataset& ds) {
  if (cfg.score_mode == "ipw") {
    if (cfg.propensity_spec.empty())
      throw ConfigError("--mode ipw requires --propensity");
    return ipw_scores(ds.records,
                      parse_propensity_spec(cfg.propensity_spec, ds.v_labels),
                      cfg.kappa, cfg.kappa_clip);
  }
  if (cfg.score_mode == "aipw") {
    if (!cfg.propensity_spec.empty())
      throw ConfigError("--propensity is only valid with --mode ipw");
    return aipw_scores(ds.records, cfg.kappa, cfg.kappa_clip);
  }
  throw ConfigError("unknown score mode '" + cfg.score_mode + "'");
}

// Grid tokens are short decimal literals in practice. Building points as
// lo + i*step drifts off the typed values (12*0.05 is one ulp above 0.6),
// which matters when a point sits on a cost kink. When every token parses
// as a scaled integer the points are rebuilt exactly.
struct ScaledDecimal {
  long long mantissa;  // value = mantissa / 10^exponent
  int exponent;
};

std::optional<ScaledDecimal> parse_scaled_decimal(const std::string& tok) {
  const char* p = tok.data();
  const char* const end = p + tok.size();
  if (p == end) return std::nullopt;
  bool neg = false;
  if (*p == '+' || *p == '-') {
    neg = (*p == '-');
    ++p;
  }
  long long m = 0;
  int digits = 0, frac = 0;
  bool seen_dot = false;
  for (; p != end; ++p) {
    if (*p == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
      continue;
    }
    if (*p < '0' || *p > '9') return std::nullopt;
    if (++digits > 18) return std::nullopt;
    m = m * 10 + (*p - '0');
    if (seen_dot) ++frac;
  }
  if (digits == 0) return std::nullopt;
  return ScaledDecimal{neg ? -m : m, frac};
}

std::optional<long long> rescale_mantissa(const ScaledDecimal& d,
                                          int exponent) {
  long long m = d.mantissa;
  for (int e = d.exponent; e < exponent; ++e) {
    if (m > 922337203685477580LL || m < -922337203685477580LL)
      return std::nullopt;
    m *= 10;
  }
  return m;
}

}  // namespace

std::vector<std::vector<double>> parse_grid_spec(const std::string& spec) {
  if (trim_ws(spec).empty()) throw ConfigError("grid spec: empty");
  std::vector<std::vector<double>> cutoffs;
  for (const std::string& gs : split_on(spec, ';')) {
    if (gs.empty())
      throw ConfigError("grid spec: empty group in '" + spec + "'");
    std::vector<double> axis;
    if (gs.find(':') != std::string::npos) {
      const std::vector<std::string> parts = split_on(gs, ':');
      if (parts.size() != 3)
        throw ConfigError("grid spec: '" + gs + "' is not lo:step:hi");
      const double lo = parse_cfg_double(parts[0], "grid spec lo");
      const double step = parse_cfg_double(parts[1], "grid spec step");
      const double hi = parse_cfg_double(parts[2], "grid spec hi");
      if (!(step > 0.0))
        throw ConfigError("grid spec: step must be > 0 in '" + gs + "'");
      if (hi < lo)
        throw ConfigError("grid spec: hi < lo in '" + gs + "'");
      const double steps = std::floor((hi - lo) / step + 1e-9);
      if (steps > 1e7)
        throw ConfigError("grid spec: too many points in '" + gs + "'");
      std::size_t count = static_cast<std::size_t>(steps) + 1;

      bool exact = false;
      bool snap_last_to_hi = false;
      long long lo_m = 0, step_m = 0, hi_m = 0;
      int ex = 0;
      const auto dlo = parse_scaled_decimal(parts[0]);
      const auto dstep = parse_scaled_decimal(parts[1]);
      const auto dhi = parse_scaled_decimal(parts[2]);
      if (dlo && dstep && dhi) {
        ex = std::max({dlo->exponent, dstep->exponent, dhi->exponent});
        const auto a = rescale_mantissa(*dlo, ex);
        const auto b = rescale_mantissa(*dstep, ex);
        const auto c = rescale_mantissa(*dhi, ex);
        // Correctly rounded points need exact operands: |mantissa| <= 2^53
        // and a power-of-ten divisor no larger than 10^22.
        if (a && b && c && *b > 0 && *c >= *a && ex <= 22 &&
            std::llabs(*a) <= (1LL << 53) && std::llabs(*c) <= (1LL << 53)) {
          long long exact_steps = (*c - *a) / *b;
          const long long rem = (*c - *a) % *b;
          // Same hi-inclusion tolerance as the floating-point path.
          if (rem > 0 &&
              static_cast<double>(rem) <= 1e-9 * static_cast<double>(*b)) {
            ++exact_steps;
            snap_last_to_hi = true;
          }
          if (exact_steps <= 10000000LL) {
            exact = true;
            lo_m = *a;
            step_m = *b;
            hi_m = *c;
            count = static_cast<std::size_t>(exact_steps) + 1;
          }
        }
      }

      axis.reserve(count);
      if (exact) {
        double den = 1.0;  // 10^ex, exact for ex <= 22
        for (int e = 0; e < ex; ++e) den *= 10.0;
        for (std::size_t i = 0; i < count; ++i) {
          const long long num = (snap_last_to_hi && i + 1 == count)
                                    ? hi_m
                                    : lo_m + static_cast<long long>(i) * step_m;
          axis.push_back(static_cast<double>(num) / den);
        }
      } else {
        for (std::size_t i = 0; i < count; ++i) {
          double v = lo + static_cast<double>(i) * step;
          if (i + 1 == count && std::abs(v - hi) <= 1e-9 * step) v = hi;
          axis.push_back(v);
        }
      }
    } else {
      for (const std::string& tok : split_on(gs, ','))
        axis.push_back(parse_cfg_double(tok, "grid spec value"));
    }
    cutoffs.push_back(std::move(axis));
  }
  return cutoffs;
}

std::map<int, double> parse_propensity_spec(
    const std::string& spec, const std::vector<std::string>& v_labels) {
  if (trim_ws(spec).empty()) throw ConfigError("propensity: empty spec");
  if (v_labels.empty()) throw ConfigError("propensity: no cells to assign");
  std::map<int, double> out;
  if (spec.find('=') == std::string::npos) {
    const double p = parse_cfg_double(trim_ws(spec), "propensity");
    for (std::size_t i = 0; i < v_labels.size(); ++i)
      out[static_cast<int>(i)] = p;
    return out;
  }
  std::map<std::string, int> by_label;
  for (std::size_t i = 0; i < v_labels.size(); ++i)
    by_label.emplace(v_labels[i], static_cast<int>(i));
  for (const std::string& tok : split_on(spec, ',')) {
    const std::size_t pos = tok.find('=');
    if (pos == std::string::npos)
      throw ConfigError("propensity: entry '" + tok + "' is not label=value");
    const std::string label = trim_ws(tok.substr(0, pos));
    const double p =
        parse_cfg_double(trim_ws(tok.substr(pos + 1)), "propensity value");
    const auto it = by_label.find(label);
    if (it == by_label.end())
      throw ConfigError("propensity: unknown cell label '" + label + "'");
    if (!out.emplace(it->second, p).second)
      throw ConfigError("propensity: duplicate entry for '" + label + "'");
  }
  for (std::size_t i = 0; i < v_labels.size(); ++i)
    if (!out.count(static_cast<int>(i)))
      throw ConfigError("propensity: no value for cell '" + v_labels[i] + "'");
  return out;
}

int cmd_score(const RunConfig& cfg) {
  if (cfg.out_path.empty() || cfg.out_path == "-")
    throw ConfigError("score: --out must be a file path");
  const RawDataset ds = read_raw_csv(cfg.data_path);
  const std::vector<ScoredRecord> scores = score_records(cfg, ds);
  write_scores_csv(cfg.out_path, scores);

  double sum_g = 0.0, sum_r = 0.0;
  for (const ScoredRecord& s : scores) {
    sum_g += s.gamma_star;
    sum_r += s.r_star;
  }
  const double n = static_cast<double>(scores.size());

  JsonWriter w;
  w.begin_object();
  w.kv("command", "score");
  w.key("config").begin_object();
  w.kv("data", cfg.data_path);
  w.kv("out", cfg.out_path);
  write_scoring_config(w, cfg);
  w.end_object();
  w.kv("n", static_cast<std::uint64_t>(scores.size()));
  w.kv("num_cells", static_cast<std::uint64_t>(ds.v_labels.size()));
  w.key("cell_labels").begin_array();
  for (const std::string& label : ds.v_labels) w.value(label);
  w.end_array();
  w.kv("mean_gamma_star", sum_g / n);
  w.kv("mean_r_star", sum_r / n);
  w.end_object();
  emit_output("-", w.str());
  return 0;
}

int cmd_solve(const RunConfig& cfg) {
  if (cfg.scores_path.empty() == cfg.data_path.empty())
    throw ConfigError("solve: provide exactly one of --scores or --data");
  std::vector<ScoredRecord> scores;
  if (!cfg.scores_path.empty()) {
    scores = read_scores_csv(cfg.scores_path);
  } else {
    scores = score_records(cfg, read_raw_csv(cfg.data_path));
  }
  if (cfg.grid_spec.empty()) throw ConfigError("solve: --grid is required");
  const PolicyGrid grid =
      enumerate_grid({parse_grid_spec(cfg.grid_spec), cfg.allow_large_grid});

  const bool mistake_control = cfg.rule == "mistake-control";
  const bool need_cov = mistake_control || !cfg.emit_moments_path.empty();
  const MomentTable table = moment_table(
      scores, grid, need_cov ? CovMode::full : CovMode::diagonal_only);

  std::optional<double> alpha_effective;
  RuleOutcome out;
  if (cfg.rule == "sample-analog") {
    out = sample_analog_rule(table, cfg.k);
  } else if (mistake_control) {
    alpha_effective = cfg.use_alpha_schedule
                          ? alpha_schedule(table.n, cfg.alpha)
                          : cfg.alpha;
    CritValOptions opts;
    opts.n_draws = static_cast<std::size_t>(cfg.draws);
    opts.seed = cfg.seed;
    opts.sigma_floor = cfg.sigma_floor;
    out = mistake_control_rule(table, cfg.k, *alpha_effective, opts);
  } else if (cfg.rule == "tradeoff") {
    out = tradeoff_rule(table, TradeoffConfig{cfg.lambda_bar, cfg.k});
  } else {
    throw ConfigError("unknown rule '" + cfg.rule + "'");
  }

  if (!cfg.curves_path.empty()) write_curves_csv(cfg.curves_path, table);
  if (!cfg.emit_moments_path.empty())
    write_moment_table_csv(cfg.emit_moments_path, table);

  JsonWriter w;
  w.begin_object();
  w.kv("command", "solve");
  w.key("config").begin_object();
  kv_opt_str(w, "scores", cfg.scores_path);
  kv_opt_str(w, "data", cfg.data_path);
  write_scoring_config(w, cfg);
  w.kv("grid", cfg.grid_spec);
  w.kv("allow_large_grid", cfg.allow_large_grid);
  w.kv("rule", cfg.rule);
  w.kv("k", cfg.k);
  w.kv("alpha_base", cfg.alpha);
  w.kv("alpha_schedule", cfg.use_alpha_schedule);
  w.kv("lambda_bar", cfg.lambda_bar);
  w.kv("draws", cfg.draws);
  w.kv("seed", cfg.seed);
  w.kv("sigma_floor", cfg.sigma_floor);
  kv_opt_str(w, "out", cfg.out_path);
  kv_opt_str(w, "curves", cfg.curves_path);
  kv_opt_str(w, "emit_moments", cfg.emit_moments_path);
  w.end_object();
  w.kv("n", static_cast<std::uint64_t>(table.n));
  w.kv("num_groups", static_cast<std::uint64_t>(grid.num_groups()));
  w.kv("num_policies", static_cast<std::uint64_t>(grid.size()));
  kv_opt(w, "alpha_effective", alpha_effective);
  w.key("critval");
  if (out.c_alpha_used) {
    w.begin_object();
    w.kv("c_alpha", *out.c_alpha_used);
    kv_opt(w, "epsilon", out.critval_epsilon);
    kv_opt_count(w, "n_excluded", out.critval_excluded);
    w.end_object();
  } else {
    w.null_value();
  }
  w.key("result").begin_object();
  w.kv("fell_back_to_null", out.fell_back_to_null);
  write_thresholds(w, "thresholds", out.policy);
  w.kv("objective", out.objective);
  w.kv("w_hat", out.w_hat);
  w.kv("b_hat", out.b_hat);
  w.kv("feasible_set_size",
       static_cast<std::uint64_t>(out.feasible_set_size));
  kv_opt(w, "lambda_bar_used", out.lambda_bar_used);
  w.end_object();
  w.end_object();
  emit_output(cfg.out_path, w.str());
  return 0;
}

int cmd_critval(const RunConfig& cfg) {
  const MomentTable table = read_moment_table_csv(cfg.moments_path);
  if (!table.has_cov())
    throw DataError(cfg.moments_path + ": moment table lacks cov_ columns");
  if (cfg.draws < 1000)
    throw ConfigError("critval: fewer than 1000 draws is below the "
                      "production floor");
  const double alpha_effective = cfg.use_alpha_schedule
                                     ? alpha_schedule(table.n, cfg.alpha)
                                     : cfg.alpha;
  CritValRequest req;
  req.cov_b = table.cov_b;
  req.alpha = alpha_effective;
  req.n_draws = static_cast<std::size_t>(cfg.draws);
  req.seed = cfg.seed;
  req.sigma_floor = cfg.sigma_floor;
  const CritValResult res = critical_value(req);

  JsonWriter w;
  w.begin_object();
  w.kv("command", "critval");
  w.key("config").begin_object();
  w.kv("moments", cfg.moments_path);
  w.kv("alpha_base", cfg.alpha);
  w.kv("alpha_schedule", cfg.use_alpha_schedule);
  w.kv("draws", cfg.draws);
  w.kv("seed", cfg.seed);
  w.kv("sigma_floor", cfg.sigma_floor);
  kv_opt_str(w, "out", cfg.out_path);
  w.end_object();
  w.kv("n", static_cast<std::uint64_t>(table.n));
  w.kv("num_policies", static_cast<std::uint64_t>(table.grid.size()));
  w.kv("alpha_effective", alpha_effective);
  w.kv("c_alpha", res.c_alpha);
  w.kv("epsilon", res.epsilon);
  w.kv("n_excluded", static_cast<std::uint64_t>(res.n_excluded));
  w.kv("n_survivors", static_cast<std::uint64_t>(res.n_survivors));
  w.end_object();
  emit_output(cfg.out_path, w.str());
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  DgpSpec dgp;
  if (cfg.dgp == "prop1") {
    dgp = prop1_dgp(cfg.t_low, cfg.t_high, cfg.q, cfg.dgp_propensity);
  } else if (cfg.dgp == "calibrated-mixture") {
    dgp = calibrated_mixture();
    dgp.propensity = cfg.dgp_propensity;
  } else if (cfg.dgp == "custom") {
    if (cfg.groups_file.empty())
      throw ConfigError("simulate: --dgp custom requires --groups-file");
    dgp.kind = DgpSpec::Kind::custom_table;
    dgp.groups = read_groups_csv(cfg.groups_file);
    dgp.propensity = cfg.dgp_propensity;
  } else {
    throw ConfigError("unknown dgp '" + cfg.dgp + "'");
  }
  if (cfg.grid_spec.empty()) throw ConfigError("simulate: --grid is required");
  const PolicyGrid grid =
      enumerate_grid({parse_grid_spec(cfg.grid_spec), cfg.allow_large_grid});

  std::vector<std::string> names = cfg.rules;
  if (names.empty())
    names = {"sample-analog", "mistake-control", "tradeoff"};
  std::vector<RuleSpec> specs;
  for (const std::string& name : names) {
    RuleSpec spec;
    spec.name = name;
    if (name == "sample-analog") {
      spec.kind = RuleSpec::Kind::sample_analog;
    } else if (name == "mistake-control") {
      spec.kind = RuleSpec::Kind::mistake_control;
      spec.alpha = cfg.use_alpha_schedule
                       ? alpha_schedule(static_cast<std::size_t>(cfg.n),
                                        cfg.alpha)
                       : cfg.alpha;
      spec.critval_draws = static_cast<std::size_t>(cfg.draws);
      spec.sigma_floor = cfg.sigma_floor;
    } else if (name == "tradeoff") {
      spec.kind = RuleSpec::Kind::tradeoff;
      spec.lambda_bar = cfg.lambda_bar;
    } else {
      throw ConfigError("unknown rule '" + name + "'");
    }
    specs.push_back(std::move(spec));
  }

  McConfig mc;
  mc.n = static_cast<std::size_t>(cfg.n);
  mc.iters = static_cast<std::size_t>(cfg.iters);
  mc.master_seed = cfg.seed;
  mc.k = cfg.k;
  mc.eps_w_rel = cfg.eps_w_rel;
  mc.eps_w_abs = cfg.eps_w_abs;
  mc.mode = cfg.sim_mode == "aipw" ? ScoreMode::aipw : ScoreMode::ipw;
  mc.keep_iteration_rows = !cfg.iters_csv_path.empty();
  const MonteCarloReport rep = run_monte_carlo(dgp, grid, specs, mc);

  if (!cfg.iters_csv_path.empty()) {
    std::string text = "iter,rule";
    for (std::size_t j = 0; j < grid.num_groups(); ++j)
      text += ",thr_" + std::to_string(j);
    text += ",w_pop,b_pop,feasible,fell_back\n";
    for (const IterationRow& row : rep.rows) {
      text += std::to_string(row.iter);
      text += ',';
      text += specs[row.rule].name;
      for (const double t : row.policy.thresholds) {
        text += ',';
        text += format_double(t);
      }
      text += ',';
      text += format_double(row.w_pop);
      text += ',';
      text += format_double(row.b_pop);
      text += row.feasible ? ",1" : ",0";
      text += row.fell_back ? ",1\n" : ",0\n";
    }
    write_text_file(cfg.iters_csv_path, text);
  }

  JsonWriter w;
  w.begin_object();
  w.kv("command", "simulate");
  w.key("config").begin_object();
  w.kv("dgp", cfg.dgp);
  w.kv("n", cfg.n);
  w.kv("iters", cfg.iters);
  w.kv("master_seed", cfg.seed);
  w.kv("k", cfg.k);
  w.kv("grid", cfg.grid_spec);
  w.kv("allow_large_grid", cfg.allow_large_grid);
  w.key("rules").begin_array();
  for (const std::string& name : names) w.value(name);
  w.end_array();
  w.kv("alpha_base", cfg.alpha);
  w.kv("alpha_schedule", cfg.use_alpha_schedule);
  w.kv("draws", cfg.draws);
  w.kv("lambda_bar", cfg.lambda_bar);
  w.kv("sigma_floor", cfg.sigma_floor);
  w.kv("score_mode", cfg.sim_mode);
  w.kv("t_low", cfg.t_low);
  w.kv("t_high", cfg.t_high);
  w.kv("q", cfg.q);
  w.kv("propensity", cfg.dgp_propensity);
  kv_opt_str(w, "groups_file", cfg.groups_file);
  w.kv("eps_w_rel", cfg.eps_w_rel);
  kv_opt(w, "eps_w_abs", cfg.eps_w_abs);
  kv_opt_str(w, "out", cfg.out_path);
  kv_opt_str(w, "iters_csv", cfg.iters_csv_path);
  w.end_object();
  w.kv("num_groups", static_cast<std::uint64_t>(grid.num_groups()));
  w.kv("num_policies", static_cast<std::uint64_t>(grid.size()));
  w.kv("eps_w_used", rep.eps_w_used);
  w.key("oracle").begin_object();
  write_thresholds(w, "thresholds", rep.g_star);
  w.kv("w", rep.w_star);
  w.kv("b", rep.b_star);
  w.end_object();
  w.key("rules").begin_array();
  for (const RuleMetrics& m : rep.rules) {
    w.begin_object();
    w.kv("name", m.name);
    w.kv("prob_infeasible", m.prob_infeasible);
    w.kv("prob_infeasible_weak", m.prob_infeasible_weak);
    w.kv("prob_suboptimal", m.prob_suboptimal);
    w.kv("avg_welfare_loss", m.avg_welfare_loss);
    w.kv("welfare_loss_absolute", m.welfare_loss_absolute);
    w.kv("avg_cost", m.avg_cost);
    w.kv("null_fallback_share", m.null_fallback_share);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  emit_output(cfg.out_path, w.str());
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  RunConfig cfg;
  CLI::App app{"Budget-constrained eligibility-threshold selection from "
               "randomized experiments"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Config file (INI/TOML, one section per subcommand); "
                 "command-line flags override config values");

  const auto add_scoring = [&cfg](CLI::App* cmd) {
    cmd->add_option("--mode", cfg.score_mode, "score construction: ipw|aipw")
        ->check(CLI::IsMember({"ipw", "aipw"}))
        ->capture_default_str();
    cmd->add_option("--kappa", cfg.kappa,
                    "status-quo spend per enrollee (excess-cost offset)")
        ->capture_default_str();
    cmd->add_option("--kappa-clip", cfg.kappa_clip,
                    "propensity clip bound in (0, 0.5)")
        ->capture_default_str();
    cmd->add_option("--propensity", cfg.propensity_spec,
                    "known propensities (ipw mode): '0.5' or "
                    "'label=0.5,label=0.4'");
  };
  const auto add_grid = [&cfg](CLI::App* cmd) {
    cmd->add_option("--grid", cfg.grid_spec,
                    "per-group cutoffs 'lo:step:hi' or 'a,b,c', groups "
                    "joined by ';'")
        ->required();
    cmd->add_flag("--allow-large-grid", cfg.allow_large_grid,
                  "lift the 5000-policy guardrail");
  };

  CLI::App* sc = app.add_subcommand(
      "score", "Convert raw records into per-unit benefit and excess-cost "
               "scores");
  sc->configurable();  // lets config files fill a [score] section
  sc->add_option("--data", cfg.data_path, "raw records CSV")->required();
  sc->add_option("--out", cfg.out_path, "scores CSV output path")->required();
  add_scoring(sc);

  CLI::App* sv = app.add_subcommand(
      "solve", "Select a threshold policy from scores on a cutoff grid");
  sv->configurable();
  sv->add_option("--scores", cfg.scores_path, "scores CSV (from `score`)");
  sv->add_option("--data", cfg.data_path,
                 "raw records CSV (scored in-process)");
  add_scoring(sv);
  add_grid(sv);
  sv->add_option("--rule", cfg.rule, "selection rule")
      ->check(CLI::IsMember({"sample-analog", "mistake-control", "tradeoff"}))
      ->capture_default_str();
  sv->add_option("--k", cfg.k, "per-capita budget cap")->capture_default_str();
  sv->add_option("--alpha", cfg.alpha, "mistake-control test level")
      ->capture_default_str();
  sv->add_flag("--alpha-schedule", cfg.use_alpha_schedule,
               "shrink alpha to min(alpha, 1/log n)");
  sv->add_option("--lambda-bar", cfg.lambda_bar,
                 "trade-off penalty per currency unit of overrun")
      ->capture_default_str();
  sv->add_option("--draws", cfg.draws, "critical-value simulation draws")
      ->capture_default_str();
  sv->add_option("--seed", cfg.seed, "critical-value RNG seed")
      ->capture_default_str();
  sv->add_option("--sigma-floor", cfg.sigma_floor,
                 "relative floor excluding near-degenerate policies")
      ->capture_default_str();
  sv->add_option("--out", cfg.out_path, "report JSON path ('-' = stdout)");
  sv->add_option("--curves", cfg.curves_path, "per-policy curves CSV path");
  sv->add_option("--emit-moments", cfg.emit_moments_path,
                 "moment-table CSV path (input for `critval`)");

  CLI::App* cv = app.add_subcommand(
      "critval", "Simulate the mistake-control critical value from a "
                 "moment table");
  cv->configurable();
  cv->add_option("--moments", cfg.moments_path,
                 "moment-table CSV (from `solve --emit-moments`)")
      ->required();
  cv->add_option("--alpha", cfg.alpha, "test level")->capture_default_str();
  cv->add_flag("--alpha-schedule", cfg.use_alpha_schedule,
               "shrink alpha to min(alpha, 1/log n)");
  cv->add_option("--draws", cfg.draws, "simulation draws (>= 1000)")
      ->capture_default_str();
  cv->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
  cv->add_option("--sigma-floor", cfg.sigma_floor,
                 "relative floor excluding near-degenerate policies")
      ->capture_default_str();
  cv->add_option("--out", cfg.out_path, "report JSON path ('-' = stdout)");

  CLI::App* sim = app.add_subcommand(
      "simulate", "Monte Carlo study of the selection rules on a synthetic "
                  "population");
  sim->configurable();
  sim->add_option("--dgp", cfg.dgp, "population: prop1|calibrated-mixture|"
                                    "custom")
      ->check(CLI::IsMember({"prop1", "calibrated-mixture", "custom"}))
      ->capture_default_str();
  sim->add_option("--n", cfg.n, "sample size per iteration")->required();
  sim->add_option("--iters", cfg.iters, "Monte Carlo iterations")->required();
  sim->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  sim->add_option("--k", cfg.k, "per-capita budget cap")
      ->capture_default_str();
  add_grid(sim);
  sim->add_option("--rules", cfg.rules,
                  "comma-separated subset of sample-analog,mistake-control,"
                  "tradeoff (default: all three)")
      ->delimiter(',')
      ->check(CLI::IsMember({"sample-analog", "mistake-control", "tradeoff"}));
  sim->add_option("--alpha", cfg.alpha, "mistake-control test level")
      ->capture_default_str();
  sim->add_flag("--alpha-schedule", cfg.use_alpha_schedule,
                "shrink alpha to min(alpha, 1/log n)");
  sim->add_option("--draws", cfg.draws,
                  "critical-value draws per iteration (>= 1000)")
      ->capture_default_str();
  sim->add_option("--lambda-bar", cfg.lambda_bar,
                  "trade-off penalty per currency unit of overrun")
      ->capture_default_str();
  sim->add_option("--sigma-floor", cfg.sigma_floor,
                  "relative floor excluding near-degenerate policies")
      ->capture_default_str();
  sim->add_option("--mode", cfg.sim_mode, "per-iteration scoring: ipw|aipw")
      ->check(CLI::IsMember({"ipw", "aipw"}))
      ->capture_default_str();
  sim->add_option("--t-low", cfg.t_low, "prop1: zero-cost segment start")
      ->capture_default_str();
  sim->add_option("--t-high", cfg.t_high, "prop1: zero-cost segment end")
      ->capture_default_str();
  sim->add_option("--q", cfg.q, "prop1: cost probability off the segment")
      ->capture_default_str();
  sim->add_option("--propensity", cfg.dgp_propensity,
                  "treatment probability of the synthetic experiment")
      ->capture_default_str();
  sim->add_option("--groups-file", cfg.groups_file,
                  "mixture rows CSV (--dgp custom)");
  sim->add_option("--eps-w-rel", cfg.eps_w_rel,
                  "suboptimality tolerance relative to the oracle welfare")
      ->capture_default_str();
  sim->add_option("--eps-w-abs", cfg.eps_w_abs,
                  "absolute suboptimality tolerance (overrides --eps-w-rel)");
  sim->add_option("--out", cfg.out_path, "report JSON path ('-' = stdout)");
  sim->add_option("--iters-csv", cfg.iters_csv_path,
                  "per-iteration selections CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  try {
    if (sc->parsed()) return cmd_score(cfg);
    if (sv->parsed()) return cmd_solve(cfg);
    if (cv->parsed()) return cmd_critval(cfg);
    if (sim->parsed()) return cmd_simulate(cfg);
    std::fprintf(stderr, "config error: no subcommand\n");
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  }
}

}  // namespace ewmb
