#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ewmb/moments.hpp"
#include "ewmb/scoring.hpp"

namespace ewmb {

// Raw-data CSV: header row with columns y, c, m, d, income, group in any
// order plus zero or more v_* confounder columns. Unknown columns, missing
// fields, and invariant violations are hard errors naming the file row.
// v-cell ids are interned from the '|'-joined v_* strings in order of first
// appearance.
struct RawDataset {
  std::vector<RawRecord> records;
  std::vector<std::string> v_labels;   // cell id -> joined label
  std::vector<std::string> v_columns;  // confounder column names
};

RawDataset read_raw_csv(const std::string& path);

// Scores CSV: gamma_star, r_star, income, group. Doubles are written with
// 17 significant digits so a read-back reproduces them bit-for-bit.
void write_scores_csv(const std::string& path,
                      const std::vector<ScoredRecord>& scores);
std::vector<ScoredRecord> read_scores_csv(const std::string& path);

// Per-policy curves CSV: thr_0..thr_{J-1}, w_hat, b_hat, sigma_b.
void write_curves_csv(const std::string& path, const MomentTable& table);

// Moment-table CSV: "# n=<n>" line, then per-policy rows
// thr_*, w_hat, b_hat, sigma_b, cov_0..cov_{m-1}. Round-trips exactly.
void write_moment_table_csv(const std::string& path, const MomentTable& table);
MomentTable read_moment_table_csv(const std::string& path);

// Locale-independent double formatting/parsing shared by all emitters.
std::string format_double(double v);
double parse_double(const std::string& field, std::size_t row,
                    const std::string& what);

}  // namespace ewmb
