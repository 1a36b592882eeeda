#include "doctest.h"

#include <cstdio>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ewmb/cli.hpp"
#include "ewmb/csv.hpp"
#include "ewmb/errors.hpp"
#include "ewmb/moments.hpp"
#include "ewmb/report.hpp"
#include "ewmb/rng.hpp"

using namespace ewmb;

namespace {

// Scratch file that removes itself; unique per test via the tag.
struct TempFile {
  std::string path;
  explicit TempFile(const std::string& tag)
      : path("ewmb_test_" + tag + ".csv") {}
  ~TempFile() { std::remove(path.c_str()); }
};

std::vector<ScoredRecord> fixture_scores() {
  std::vector<ScoredRecord> out;
  for (std::uint64_t i = 0; i < 64; ++i) {
    ScoredRecord s;
    s.gamma_star = rng::normal(5, i, 0) * 1e3;
    s.r_star = rng::normal(5, i, 1) * 1e-3;
    s.x.income = 500.0 * rng::u01(5, i, 2);
    s.x.group = rng::u01(5, i, 3) < 0.5 ? 0 : 1;
    out.push_back(s);
  }
  // extremes must survive the trip too
  out[0].gamma_star = 1e300;
  out[1].r_star = -1e-300;
  out[2].x.income = 0.1;
  return out;
}

MomentTable fixture_table(CovMode mode) {
  const PolicyGrid grid =
      enumerate_grid({{{0.0, 150.0, 300.0}, {0.0, 250.0, 500.0}}, false});
  return moment_table(fixture_scores(), grid, mode);
}

}  // namespace

TEST_CASE("doubles print with full precision and parse back bit for bit") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(-0.5) == "-0.5");
  // 17 significant digits spell out the nearest representable value
  CHECK(format_double(1e300) == "1.0000000000000001e+300");
  CHECK(parse_double(format_double(1e300), 1, "x") == 1e300);
  for (std::uint64_t i = 0; i < 500; ++i) {
    const double x = rng::normal(8, i, 0) *
                     std::pow(10.0, 40.0 * (rng::u01(8, i, 1) - 0.5));
    CHECK(parse_double(format_double(x), 1, "x") == x);
  }
  CHECK(parse_double("1.25", 7, "k") == 1.25);
  CHECK_THROWS_WITH_AS(parse_double("", 7, "k"), doctest::Contains("line 7"),
                       DataError);
  CHECK_THROWS_WITH_AS(parse_double("1.5x", 9, "rate"),
                       doctest::Contains("rate"), DataError);
  CHECK_THROWS_AS(parse_double("abc", 2, "k"), DataError);
}

TEST_CASE("json reports are byte deterministic") {
  JsonWriter w;
  w.begin_object()
      .kv("alpha", 0.1)
      .kv("label", "base \"run\"")
      .kv("ok", true)
      .key("missing")
      .null_value()
      .key("nested")
      .begin_object()
      .kv("n", std::uint64_t{12})
      .end_object()
      .key("grid")
      .begin_array()
      .value(1.0)
      .value(2.5)
      .end_array()
      .key("empty")
      .begin_object()
      .end_object()
      .end_object();
  const std::string expected =
      "{\n"
      "  \"alpha\": 0.10000000000000001,\n"
      "  \"label\": \"base \\\"run\\\"\",\n"
      "  \"ok\": true,\n"
      "  \"missing\": null,\n"
      "  \"nested\": {\n"
      "    \"n\": 12\n"
      "  },\n"
      "  \"grid\": [\n"
      "    1,\n"
      "    2.5\n"
      "  ],\n"
      "  \"empty\": {}\n"
      "}\n";
  CHECK(w.str() == expected);
}

TEST_CASE("json strings escape control characters") {
  JsonWriter w;
  w.begin_object().kv("s", std::string("a\nb\tc\\d\x01")).end_object();
  CHECK(w.str() ==
        "{\n  \"s\": \"a\\nb\\tc\\\\d\\u0001\"\n}\n");
}

TEST_CASE("json writer refuses malformed structure and non-finite numbers") {
  {
    JsonWriter w;
    w.begin_object();
    CHECK_THROWS_AS(w.value(1.0), ConfigError);  // value without a key
  }
  {
    JsonWriter w;
    CHECK_THROWS_AS(w.key("k"), ConfigError);  // key outside an object
  }
  {
    JsonWriter w;
    w.begin_object().key("x");
    CHECK_THROWS_AS(w.value(std::numeric_limits<double>::infinity()),
                    NumericError);
  }
  {
    JsonWriter w;
    w.begin_object().key("x");
    CHECK_THROWS_AS(w.value(std::numeric_limits<double>::quiet_NaN()),
                    NumericError);
  }
}

TEST_CASE("text files round trip and missing paths fail loudly") {
  TempFile f("text");
  write_text_file(f.path, "line1\nline2\n");
  CHECK(read_text_file(f.path) == "line1\nline2\n");
  CHECK_THROWS_AS(read_text_file("no_such_file_anywhere.txt"), DataError);
}

TEST_CASE("score files round trip bit for bit") {
  const auto scores = fixture_scores();
  TempFile f("scores");
  write_scores_csv(f.path, scores);

  const std::string text = read_text_file(f.path);
  CHECK(text.rfind("gamma_star,r_star,income,group\n", 0) == 0);

  const auto back = read_scores_csv(f.path);
  REQUIRE(back.size() == scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CHECK(back[i].gamma_star == scores[i].gamma_star);
    CHECK(back[i].r_star == scores[i].r_star);
    CHECK(back[i].x.income == scores[i].x.income);
    CHECK(back[i].x.group == scores[i].x.group);
  }
  // a second write of the read-back is byte identical
  TempFile g("scores2");
  write_scores_csv(g.path, back);
  CHECK(read_text_file(g.path) == text);
}

TEST_CASE("score reader names the offending line") {
  TempFile f("badscores");
  write_text_file(f.path, "gamma_star,r_star,income,group\n1,2,3,0\n1,2\n");
  CHECK_THROWS_WITH_AS(read_scores_csv(f.path), doctest::Contains("line 3"),
                       DataError);
  write_text_file(f.path, "gamma_star,r_star,income\n1,2,3\n");
  CHECK_THROWS_AS(read_scores_csv(f.path), DataError);
  write_text_file(f.path, "gamma_star,r_star,income,group\n1,oops,3,0\n");
  CHECK_THROWS_WITH_AS(read_scores_csv(f.path), doctest::Contains("r_star"),
                       DataError);
  write_text_file(f.path, "gamma_star,r_star,income,group\n");
  CHECK_THROWS_WITH_AS(read_scores_csv(f.path),
                       doctest::Contains("no data rows"), DataError);
}

TEST_CASE("moment tables round trip exactly, with and without covariance") {
  for (const CovMode mode : {CovMode::full, CovMode::diagonal_only}) {
    const auto table = fixture_table(mode);
    TempFile f(mode == CovMode::full ? "mt_full" : "mt_diag");
    write_moment_table_csv(f.path, table);
    const auto back = read_moment_table_csv(f.path);

    CHECK(back.n == table.n);
    REQUIRE(back.grid.size() == table.grid.size());
    for (std::size_t i = 0; i < table.grid.size(); ++i) {
      CHECK(back.grid.policies[i].thresholds ==
            table.grid.policies[i].thresholds);
      CHECK(back.w_hat[i] == table.w_hat[i]);
      CHECK(back.b_hat[i] == table.b_hat[i]);
      CHECK(back.sigma_b[i] == table.sigma_b[i]);
    }
    CHECK(back.has_cov() == table.has_cov());
    if (table.has_cov()) CHECK(back.cov_b.a == table.cov_b.a);

    TempFile g(mode == CovMode::full ? "mt_full2" : "mt_diag2");
    write_moment_table_csv(g.path, back);
    CHECK(read_text_file(g.path) == read_text_file(f.path));
  }
}

TEST_CASE("moment table reader rejects malformed layouts") {
  TempFile f("badmt");
  write_text_file(f.path, "thr_0,w_hat,b_hat,sigma_b\n0,0,0,0\n");
  CHECK_THROWS_WITH_AS(read_moment_table_csv(f.path),
                       doctest::Contains("# n="), DataError);
  write_text_file(f.path, "# n=0\nthr_0,w_hat,b_hat,sigma_b\n0,0,0,0\n");
  CHECK_THROWS_AS(read_moment_table_csv(f.path), DataError);
  write_text_file(f.path, "# n=5\nw_hat,b_hat,sigma_b\n0,0,0\n");
  CHECK_THROWS_WITH_AS(read_moment_table_csv(f.path),
                       doctest::Contains("thr_0"), DataError);
  write_text_file(f.path,
                  "# n=5\nthr_0,w_hat,b_hat,sigma_b,junk\n0,0,0,0,0\n");
  CHECK_THROWS_WITH_AS(read_moment_table_csv(f.path),
                       doctest::Contains("unrecognized"), DataError);
  // one cov column for two policy rows: all-or-none
  write_text_file(f.path,
                  "# n=5\nthr_0,w_hat,b_hat,sigma_b,cov_0\n"
                  "0,0,0,0,1\n100,1,1,1,1\n");
  CHECK_THROWS_WITH_AS(read_moment_table_csv(f.path),
                       doctest::Contains("cov"), DataError);
  write_text_file(f.path, "# n=5\nthr_0,w_hat,b_hat,sigma_b\n");
  CHECK_THROWS_WITH_AS(read_moment_table_csv(f.path),
                       doctest::Contains("no policy rows"), DataError);
}

TEST_CASE("curve files list one policy per row") {
  auto table = fixture_table(CovMode::diagonal_only);
  TempFile f("curves");
  write_curves_csv(f.path, table);
  const std::string text = read_text_file(f.path);
  CHECK(text.rfind("thr_0,thr_1,w_hat,b_hat,sigma_b\n", 0) == 0);
  std::size_t rows = 0;
  for (const char ch : text)
    if (ch == '\n') ++rows;
  CHECK(rows == table.grid.size() + 1);
  const std::string first_row = "0,0," + format_double(table.w_hat[0]) + "," +
                                format_double(table.b_hat[0]) + "," +
                                format_double(table.sigma_b[0]) + "\n";
  CHECK(text.find(first_row) != std::string::npos);
}

TEST_CASE("raw data ingestion interns confounder cells in first-seen order") {
  TempFile f("raw");
  write_text_file(f.path,
                  "y,c,m,d,income,group,v_site,v_wave\n"
                  "1.5,7000,1,1,120,0,north,1\n"
                  "0.0,0,0,0,80,1,south,1\n"
                  "\n"
                  "2.0,5500,1,1,250,1,north,1\n"
                  "-0.5,0,0,0,40,0,north,2\n");
  const auto data = read_raw_csv(f.path);
  REQUIRE(data.records.size() == 4);
  CHECK(data.v_columns == std::vector<std::string>{"v_site", "v_wave"});
  CHECK(data.v_labels ==
        std::vector<std::string>{"north|1", "south|1", "north|2"});
  CHECK(data.records[0].v == 0);
  CHECK(data.records[1].v == 1);
  CHECK(data.records[2].v == 0);
  CHECK(data.records[3].v == 2);
  CHECK(data.records[0].y == 1.5);
  CHECK(data.records[0].c == 7000.0);
  CHECK(data.records[0].m == 1);
  CHECK(data.records[2].x.income == 250.0);
  CHECK(data.records[2].x.group == 1);
}

TEST_CASE("raw data without confounders lands in a single cell") {
  TempFile f("rawplain");
  write_text_file(f.path,
                  "y,c,m,d,income,group\n"
                  "1,0,0,0,10,0\n"
                  "2,100,1,1,20,0\n");
  const auto data = read_raw_csv(f.path);
  CHECK(data.v_columns.empty());
  CHECK(data.v_labels == std::vector<std::string>{""});
  CHECK(data.records[0].v == 0);
  CHECK(data.records[1].v == 0);
}

TEST_CASE("raw data errors carry the file and line") {
  TempFile f("rawerr");
  write_text_file(f.path, "y,c,m,d,income,bogus\n1,0,0,0,10,0\n");
  CHECK_THROWS_WITH_AS(read_raw_csv(f.path), doctest::Contains("bogus"),
                       DataError);
  write_text_file(f.path, "y,c,m,d,income\n1,0,0,0,10\n");
  CHECK_THROWS_WITH_AS(read_raw_csv(f.path), doctest::Contains("group"),
                       DataError);
  write_text_file(f.path, "y,c,m,d,income,group\n1,0,0,0,10,-2\n");
  CHECK_THROWS_WITH_AS(read_raw_csv(f.path), doctest::Contains("line 2"),
                       DataError);
  write_text_file(f.path, "y,c,m,d,income,group\n1,0,0,zero,10,0\n");
  CHECK_THROWS_WITH_AS(read_raw_csv(f.path), doctest::Contains("'zero'"),
                       DataError);
  write_text_file(f.path, "y,c,m,d,income,group,y\n1,0,0,0,10,0,1\n");
  CHECK_THROWS_WITH_AS(read_raw_csv(f.path), doctest::Contains("duplicate"),
                       DataError);
  write_text_file(f.path, "y,c,m,d,income,group\n");
  CHECK_THROWS_WITH_AS(read_raw_csv(f.path), doctest::Contains("no data rows"),
                       DataError);
  write_text_file(f.path, "");
  CHECK_THROWS_WITH_AS(read_raw_csv(f.path), doctest::Contains("header"),
                       DataError);
}

TEST_CASE("mixture group files read with optional income bounds") {
  TempFile f("groups");
  write_text_file(f.path,
                  "weight,benefit_mean,benefit_sd,cost_mean,cost_sd\n"
                  "0.6,0.05,0.5,600,2000\n"
                  "0.4,0.10,0.5,300,2000\n");
  const auto groups = read_groups_csv(f.path);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].weight == 0.6);
  CHECK(groups[0].benefit_mean == 0.05);
  CHECK(groups[1].cost_mean == 300.0);
  CHECK(groups[0].income_lo == 0.0);    // defaults apply
  CHECK(groups[0].income_hi == 500.0);

  TempFile g("groups2");
  write_text_file(g.path,
                  "weight,benefit_mean,benefit_sd,cost_mean,cost_sd,"
                  "income_lo,income_hi\n"
                  "1.0,0.05,0.5,600,2000,100,900\n");
  const auto custom = read_groups_csv(g.path);
  CHECK(custom[0].income_lo == 100.0);
  CHECK(custom[0].income_hi == 900.0);

  TempFile h("groups3");
  write_text_file(h.path, "weight,benefit_mean,cost_mean,cost_sd\n1,0,0,0\n");
  CHECK_THROWS_WITH_AS(read_groups_csv(h.path),
                       doctest::Contains("benefit_sd"), DataError);
}
