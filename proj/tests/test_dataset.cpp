#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "subpop/dataset.hpp"
#include "subpop/errors.hpp"
#include "subpop/rng.hpp"

using namespace subpop;

namespace {

std::string temp_path(const std::string& name) {
  return "tmp_dataset_" + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("load_csv reads the canonical layout") {
  const std::string path = temp_path("basic.csv");
  write_file(path,
             "r,y,a,x1,x2\n"
             "1,0,1,0.2,0.3\n"
             "0,,1,0.1,0.4\n");
  const Dataset ds = load_csv(path);
  CHECK(ds.q() == 2);
  CHECK(ds.size() == 2);
  CHECK(ds[0].r == 1);
  REQUIRE(ds[0].y.has_value());
  CHECK(*ds[0].y == 0);
  CHECK(ds[0].a == 1);
  CHECK(ds[0].features[0] == doctest::Approx(0.2));
  CHECK(ds[1].r == 0);
  CHECK_FALSE(ds[1].y.has_value());
  std::remove(path.c_str());
}

TEST_CASE("load_csv rejects malformed input") {
  const std::string path = temp_path("bad.csv");

  SUBCASE("empty file") {
    write_file(path, "");
    CHECK_THROWS_AS(load_csv(path), ParseError);
  }
  SUBCASE("header only") {
    write_file(path, "r,y,a,x1\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);
  }
  SUBCASE("wrong header") {
    write_file(path, "a,b,c,d\n1,0,0,0.5\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);
  }
  SUBCASE("source row without label") {
    write_file(path, "r,y,a,x1\n1,,0,0.5\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);
  }
  SUBCASE("target row with label") {
    write_file(path, "r,y,a,x1\n0,1,0,0.5\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);
  }
  SUBCASE("non-binary y") {
    write_file(path, "r,y,a,x1\n1,2,0,0.5\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);
  }
  SUBCASE("bad feature") {
    write_file(path, "r,y,a,x1\n1,0,0,zebra\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);
  }
  SUBCASE("ragged rows") {
    write_file(path, "r,y,a,x1,x2\n1,0,0,0.5,0.5\n1,0,0,0.5\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_csv("does_not_exist.csv"), ParseError);
  }
  std::remove(path.c_str());
}

TEST_CASE("load_csv enforces the missing-cell design") {
  const std::string path = temp_path("excluded.csv");
  write_file(path,
             "r,y,a,x1,x2\n"
             "1,1,1,0.5,0.5\n"
             "0,,0,0.1,0.1\n");
  CHECK_THROWS_AS(load_csv(path), ValidationError);

  LoadOptions opts;
  opts.allow_forbidden_cell = true;
  const Dataset ds = load_csv(path, opts);
  CHECK(ds.size() == 2);
  std::remove(path.c_str());
}

TEST_CASE("validate reports cells, violations and warnings") {
  std::vector<Sample> rows;
  rows.push_back({{0.0}, 1, 1, 0});   // source y=1 a=0
  rows.push_back({{0.0}, 1, 0, 1});   // source y=0 a=1
  rows.push_back({{0.0}, 1, 0, 0});   // source y=0 a=0
  rows.push_back({{0.0}, 1, 1, 1});   // excluded cell
  rows.push_back({{0.0}, 0, std::nullopt, 1});
  rows.push_back({{0.0}, 0, std::nullopt, 0});
  const Dataset ds(rows, 1);

  const ValidationReport rep = validate(ds);
  CHECK_FALSE(rep.ok);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0] == 3);
  CHECK(rep.counts.n111 == 1);
  CHECK(rep.warnings.empty());

  const ValidationReport allowed = validate(ds, true);
  CHECK(allowed.ok);
  CHECK(allowed.violations.empty());

  CHECK_THROWS_AS(validate_or_throw(ds), ValidationError);
  CHECK_NOTHROW(validate_or_throw(ds, true));

  // Dropping a required cell produces a warning, not a failure.
  std::vector<Sample> sparse(rows.begin(), rows.begin() + 3);
  sparse.push_back({{0.0}, 0, std::nullopt, 0});
  const ValidationReport w = validate(Dataset(sparse, 1));
  CHECK(w.ok);
  REQUIRE(w.warnings.size() == 1);
  CHECK(w.warnings[0].find("target a=1") != std::string::npos);
}

TEST_CASE("cell_counts tallies every cell") {
  std::vector<Sample> rows;
  for (int i = 0; i < 3; ++i) rows.push_back({{0.0}, 1, 1, 0});
  for (int i = 0; i < 2; ++i) rows.push_back({{0.0}, 1, 0, 1});
  for (int i = 0; i < 5; ++i) rows.push_back({{0.0}, 1, 0, 0});
  for (int i = 0; i < 4; ++i) rows.push_back({{0.0}, 0, std::nullopt, 1});
  for (int i = 0; i < 6; ++i) rows.push_back({{0.0}, 0, std::nullopt, 0});
  const Dataset ds(rows, 1);
  const CellCounts c = cell_counts(ds);
  CHECK(c.n110 == 3);
  CHECK(c.n101 == 2);
  CHECK(c.n100 == 5);
  CHECK(c.n111 == 0);
  CHECK(c.n1 == 10);
  CHECK(c.n0a1 == 4);
  CHECK(c.n0a0 == 6);
  CHECK(c.n0 == 10);
  CHECK(c.n == 20);

  // Counting is order-free: reverse the rows.
  std::vector<Sample> rev(rows.rbegin(), rows.rend());
  const CellCounts c2 = cell_counts(Dataset(rev, 1));
  CHECK(c2.n110 == c.n110);
  CHECK(c2.n101 == c.n101);
  CHECK(c2.n100 == c.n100);
  CHECK(c2.n0a1 == c.n0a1);
}

TEST_CASE("subset filters rows and keeps q") {
  std::vector<Sample> rows;
  rows.push_back({{1.0, 2.0}, 1, 0, 0});
  rows.push_back({{3.0, 4.0}, 0, std::nullopt, 1});
  rows.push_back({{5.0, 6.0}, 1, 1, 0});
  const Dataset ds(rows, 2);

  const Dataset src = source_rows(ds);
  CHECK(src.size() == 2);
  CHECK(src[1].features[0] == 5.0);

  const Dataset tgt = target_rows(ds);
  CHECK(tgt.size() == 1);
  CHECK(tgt.q() == 2);

  const Dataset none = subset(
      ds, [](int, const std::optional<int>&, int) { return false; });
  CHECK(none.empty());
  CHECK(none.q() == 2);

  // A predicate and its complement partition the rows.
  auto pred = [](int r, const std::optional<int>&, int a) {
    return r == 1 && a == 0;
  };
  const Dataset in = subset(ds, pred);
  const Dataset out = subset(ds, [&](int r, const std::optional<int>& y,
                                     int a) { return !pred(r, y, a); });
  CHECK(in.size() + out.size() == ds.size());
}

TEST_CASE("dataset construction validates rows") {
  CHECK_THROWS_AS(Dataset({{{1.0}, 1, std::nullopt, 0}}, 1), ValidationError);
  CHECK_THROWS_AS(Dataset({{{1.0}, 0, 1, 0}}, 1), ValidationError);
  CHECK_THROWS_AS(Dataset({{{1.0, 2.0}, 1, 0, 0}}, 1), ValidationError);
  CHECK_THROWS_AS(Dataset({{{1.0}, 2, 0, 0}}, 1), ValidationError);
  CHECK_THROWS_AS(Dataset({{{1.0}, 1, 0, 5}}, 1), ValidationError);
}

TEST_CASE("csv round trip is bit-exact") {
  RandomStream rs(1234);
  std::vector<Sample> rows;
  for (int i = 0; i < 60; ++i) {
    Sample s;
    // Exercise awkward magnitudes, not just unit-scale values.
    s.features = {rs.normal() * 1e-8, rs.normal() * 1e8, 0.1 + rs.normal(),
                  rs.normal()};
    s.r = i % 2;
    s.a = (i / 2) % 2;
    // Labels only on source rows, and never in the excluded (1,1) cell.
    if (s.r == 1) s.y = s.a == 1 ? 0 : (i / 4) % 2;
    rows.push_back(std::move(s));
  }
  const Dataset ds(rows, 4);

  const std::string path = temp_path("roundtrip.csv");
  write_csv(ds, path);
  const Dataset back = load_csv(path);
  REQUIRE(back.size() == ds.size());
  REQUIRE(back.q() == ds.q());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back[i].r == ds[i].r);
    CHECK(back[i].a == ds[i].a);
    CHECK(back[i].y == ds[i].y);
    for (int j = 0; j < ds.q(); ++j) {
      CHECK(back[i].features[j] == ds[i].features[j]);  // exact
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("format_double survives a parse round trip") {
  RandomStream rs(99);
  for (int i = 0; i < 200; ++i) {
    const double v = (rs.uniform() - 0.5) * std::pow(10.0, i % 30 - 15);
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("labels_y demands labeled rows") {
  const Dataset ds({{{1.0}, 0, std::nullopt, 0}}, 1);
  CHECK_THROWS_AS(labels_y(ds), ValidationError);
}
