#include "ewmb/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ewmb/cli.hpp"
#include "ewmb/errors.hpp"
#include "ewmb/report.hpp"

namespace ewmb {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, std::size_t row,
                    const std::string& what) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DataError("line " + std::to_string(row) + ": cannot parse " + what +
                    " ('" + field + "')");
  return v;
}

namespace {

long parse_int(const std::string& field, std::size_t row,
               const std::string& what) {
  long v = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DataError("line " + std::to_string(row) + ": cannot parse " + what +
                    " ('" + field + "')");
  return v;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t pos = text.find('\n', start);
    if (pos == std::string::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// Column-name -> position lookup with duplicate detection.
class Header {
 public:
  Header(const std::string& path, const std::vector<std::string>& names)
      : path_(path), names_(names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i].empty())
        throw DataError(path + " line 1: empty column name");
      if (!index_.emplace(names[i], i).second)
        throw DataError(path + " line 1: duplicate column '" + names[i] + "'");
    }
  }

  std::size_t require(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end())
      throw DataError(path_ + " line 1: missing column '" + name + "'");
    return it->second;
  }

  std::optional<std::size_t> find(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::string path_;
  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
};

const std::vector<std::string>& check_width(const std::string& path,
                                            std::size_t line_no,
                                            const std::vector<std::string>& f,
                                            std::size_t want) {
  if (f.size() != want)
    throw DataError(path + " line " + std::to_string(line_no) + ": expected " +
                    std::to_string(want) + " fields, got " +
                    std::to_string(f.size()));
  return f;
}

bool blank(const std::string& line) { return trim(line).empty(); }

}  // namespace

RawDataset read_raw_csv(const std::string& path) {
  const std::vector<std::string> lines = split_lines(read_text_file(path));
  if (lines.empty() || blank(lines[0]))
    throw DataError(path + ": missing header row");
  const Header header(path, split_fields(lines[0]));

  std::vector<std::size_t> v_cols;
  RawDataset out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& name = header.names()[i];
    if (name == "y" || name == "c" || name == "m" || name == "d" ||
        name == "income" || name == "group")
      continue;
    if (name.rfind("v_", 0) == 0) {
      v_cols.push_back(i);
      out.v_columns.push_back(name);
      continue;
    }
    throw DataError(path + " line 1: unknown column '" + name + "'");
  }
  const std::size_t iy = header.require("y");
  const std::size_t ic = header.require("c");
  const std::size_t im = header.require("m");
  const std::size_t id = header.require("d");
  const std::size_t iinc = header.require("income");
  const std::size_t igrp = header.require("group");

  std::map<std::string, int> cell_ids;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (blank(lines[li])) continue;
    const std::size_t line_no = li + 1;
    const std::vector<std::string> f =
        check_width(path, line_no, split_fields(lines[li]), header.size());

    RawRecord r;
    r.y = parse_double(f[iy], line_no, "y");
    r.c = parse_double(f[ic], line_no, "c");
    r.m = static_cast<int>(parse_int(f[im], line_no, "m"));
    r.d = static_cast<int>(parse_int(f[id], line_no, "d"));
    r.x.income = parse_double(f[iinc], line_no, "income");
    const long grp = parse_int(f[igrp], line_no, "group");
    if (grp < 0)
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": group must be >= 0 (got " + std::to_string(grp) + ")");
    r.x.group = static_cast<int>(grp);

    std::string label;
    for (std::size_t j = 0; j < v_cols.size(); ++j) {
      if (j > 0) label += '|';
      label += f[v_cols[j]];
    }
    const auto [it, inserted] =
        cell_ids.emplace(label, static_cast<int>(out.v_labels.size()));
    if (inserted) out.v_labels.push_back(label);
    r.v = it->second;
    out.records.push_back(r);
  }
  if (out.records.empty()) throw DataError(path + ": no data rows");
  return out;
}

void write_scores_csv(const std::string& path,
                      const std::vector<ScoredRecord>& scores) {
  std::string text = "gamma_star,r_star,income,group\n";
  for (const ScoredRecord& s : scores) {
    text += format_double(s.gamma_star);
    text += ',';
    text += format_double(s.r_star);
    text += ',';
    text += format_double(s.x.income);
    text += ',';
    text += std::to_string(s.x.group);
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<ScoredRecord> read_scores_csv(const std::string& path) {
  const std::vector<std::string> lines = split_lines(read_text_file(path));
  if (lines.empty() || blank(lines[0]))
    throw DataError(path + ": missing header row");
  const Header header(path, split_fields(lines[0]));
  if (header.size() != 4)
    throw DataError(path + " line 1: expected exactly gamma_star, r_star, "
                           "income, group");
  const std::size_t ig = header.require("gamma_star");
  const std::size_t ir = header.require("r_star");
  const std::size_t iinc = header.require("income");
  const std::size_t igrp = header.require("group");

  std::vector<ScoredRecord> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (blank(lines[li])) continue;
    const std::size_t line_no = li + 1;
    const std::vector<std::string> f =
        check_width(path, line_no, split_fields(lines[li]), header.size());
    ScoredRecord s;
    s.gamma_star = parse_double(f[ig], line_no, "gamma_star");
    s.r_star = parse_double(f[ir], line_no, "r_star");
    s.x.income = parse_double(f[iinc], line_no, "income");
    const long grp = parse_int(f[igrp], line_no, "group");
    if (grp < 0)
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": group must be >= 0 (got " + std::to_string(grp) + ")");
    s.x.group = static_cast<int>(grp);
    out.push_back(s);
  }
  if (out.empty()) throw DataError(path + ": no data rows");
  return out;
}

namespace {

std::string policy_row_prefix(const ThresholdPolicy& p) {
  std::string row;
  for (const double t : p.thresholds) {
    row += format_double(t);
    row += ',';
  }
  return row;
}

std::string threshold_header(std::size_t num_groups) {
  std::string h;
  for (std::size_t j = 0; j < num_groups; ++j)
    h += "thr_" + std::to_string(j) + ",";
  return h;
}

}  // namespace

void write_curves_csv(const std::string& path, const MomentTable& table) {
  std::string text =
      threshold_header(table.grid.num_groups()) + "w_hat,b_hat,sigma_b\n";
  for (std::size_t i = 0; i < table.grid.size(); ++i) {
    text += policy_row_prefix(table.grid.policies[i]);
    text += format_double(table.w_hat[i]);
    text += ',';
    text += format_double(table.b_hat[i]);
    text += ',';
    text += format_double(table.sigma_b[i]);
    text += '\n';
  }
  write_text_file(path, text);
}

void write_moment_table_csv(const std::string& path,
                            const MomentTable& table) {
  std::string text = "# n=" + std::to_string(table.n) + "\n";
  text += threshold_header(table.grid.num_groups()) + "w_hat,b_hat,sigma_b";
  if (table.has_cov())
    for (std::size_t j = 0; j < table.grid.size(); ++j)
      text += ",cov_" + std::to_string(j);
  text += '\n';
  for (std::size_t i = 0; i < table.grid.size(); ++i) {
    text += policy_row_prefix(table.grid.policies[i]);
    text += format_double(table.w_hat[i]);
    text += ',';
    text += format_double(table.b_hat[i]);
    text += ',';
    text += format_double(table.sigma_b[i]);
    if (table.has_cov())
      for (std::size_t j = 0; j < table.grid.size(); ++j) {
        text += ',';
        text += format_double(table.cov_b.at(i, j));
      }
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<MixtureGroup> read_groups_csv(const std::string& path) {
  const std::vector<std::string> lines = split_lines(read_text_file(path));
  if (lines.empty() || blank(lines[0]))
    throw DataError(path + ": missing header row");
  const Header header(path, split_fields(lines[0]));
  const std::size_t iw = header.require("weight");
  const std::size_t ibm = header.require("benefit_mean");
  const std::size_t ibs = header.require("benefit_sd");
  const std::size_t icm = header.require("cost_mean");
  const std::size_t ics = header.require("cost_sd");
  const std::optional<std::size_t> ilo = header.find("income_lo");
  const std::optional<std::size_t> ihi = header.find("income_hi");

  std::vector<MixtureGroup> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (blank(lines[li])) continue;
    const std::size_t line_no = li + 1;
    const std::vector<std::string> f =
        check_width(path, line_no, split_fields(lines[li]), header.size());
    MixtureGroup g;
    g.weight = parse_double(f[iw], line_no, "weight");
    g.benefit_mean = parse_double(f[ibm], line_no, "benefit_mean");
    g.benefit_sd = parse_double(f[ibs], line_no, "benefit_sd");
    g.cost_mean = parse_double(f[icm], line_no, "cost_mean");
    g.cost_sd = parse_double(f[ics], line_no, "cost_sd");
    if (ilo) g.income_lo = parse_double(f[*ilo], line_no, "income_lo");
    if (ihi) g.income_hi = parse_double(f[*ihi], line_no, "income_hi");
    out.push_back(g);
  }
  if (out.empty()) throw DataError(path + ": no data rows");
  return out;
}

MomentTable read_moment_table_csv(const std::string& path) {
  const std::vector<std::string> lines = split_lines(read_text_file(path));
  if (lines.size() < 2 || trim(lines[0]).rfind("# n=", 0) != 0)
    throw DataError(path + ": expected '# n=<n>' on line 1");
  const long n = parse_int(trim(lines[0]).substr(4), 1, "n");
  if (n <= 0) throw DataError(path + " line 1: n must be >= 1");

  const Header header(path, split_fields(lines[1]));
  std::size_t num_groups = 0;
  while (header.find("thr_" + std::to_string(num_groups))) ++num_groups;
  if (num_groups == 0)
    throw DataError(path + " line 2: missing thr_0 column");
  std::vector<std::size_t> thr_cols(num_groups);
  for (std::size_t j = 0; j < num_groups; ++j)
    thr_cols[j] = *header.find("thr_" + std::to_string(j));
  const std::size_t iw = header.require("w_hat");
  const std::size_t ib = header.require("b_hat");
  const std::size_t is = header.require("sigma_b");
  std::size_t num_cov = 0;
  while (header.find("cov_" + std::to_string(num_cov))) ++num_cov;
  if (header.size() != num_groups + 3 + num_cov)
    throw DataError(path + " line 2: unrecognized columns present");

  std::vector<ThresholdPolicy> policies;
  std::vector<double> w, b, s;
  std::vector<double> cov_flat;
  for (std::size_t li = 2; li < lines.size(); ++li) {
    if (blank(lines[li])) continue;
    const std::size_t line_no = li + 1;
    const std::vector<std::string> f =
        check_width(path, line_no, split_fields(lines[li]), header.size());
    ThresholdPolicy p;
    p.thresholds.resize(num_groups);
    for (std::size_t j = 0; j < num_groups; ++j)
      p.thresholds[j] = parse_double(f[thr_cols[j]], line_no,
                                     "thr_" + std::to_string(j));
    policies.push_back(std::move(p));
    w.push_back(parse_double(f[iw], line_no, "w_hat"));
    b.push_back(parse_double(f[ib], line_no, "b_hat"));
    s.push_back(parse_double(f[is], line_no, "sigma_b"));
    for (std::size_t j = 0; j < num_cov; ++j)
      cov_flat.push_back(parse_double(f[*header.find("cov_" +
                                                     std::to_string(j))],
                                      line_no, "cov_" + std::to_string(j)));
  }
  if (policies.empty()) throw DataError(path + ": no policy rows");
  if (num_cov != 0 && num_cov != policies.size())
    throw DataError(path + ": found " + std::to_string(num_cov) +
                    " cov columns for " + std::to_string(policies.size()) +
                    " policies");

  MomentTable table;
  table.grid = PolicyGrid::from_policies(std::move(policies));
  table.n = static_cast<std::size_t>(n);
  table.w_hat = std::move(w);
  table.b_hat = std::move(b);
  table.sigma_b = std::move(s);
  if (num_cov != 0) {
    table.cov_b.dim = table.grid.size();
    table.cov_b.a = std::move(cov_flat);
  }
  return table;
}

}  // namespace ewmb
