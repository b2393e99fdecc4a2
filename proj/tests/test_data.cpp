#include <doctest.h>

#include "medpath/data.hpp"
#include "medpath/error.hpp"
#include "medpath/rng.hpp"

using namespace medpath;

namespace {

const Schema kSchema{{"c0"}, "a", {"c11", "c12", "c13"}, "m", "y"};

Dataset two_rows() {
  Matrix c0(2, 1);
  c0 << 2, 3;
  Vector a(2);
  a << 1, 0;
  Matrix c1 = Matrix::Zero(2, 1);
  Vector m(2), y(2);
  m << 0.5, -1;
  y << 1, 2;
  return Dataset(c0, a, c1, m, y, {"c0"}, {"c1"});
}

}  // namespace

TEST_SUITE("data_model") {

TEST_CASE("load three-row CSV") {
  const std::string text =
      "c0,a,c11,c12,c13,m,y\n"
      "0.5,1,1,2,3,0.1,1.5\n"
      "1.5,0,1,2,3,0.2,2.5\n"
      "0.1,1,-1,2e-1,3,0.3,3.5\n";
  const Dataset d = parse_csv(text, kSchema, {});
  CHECK(d.n() == 3);
  CHECK(d.p0() == 1);
  CHECK(d.p1() == 3);
  CHECK(d.a()[0] == 1.0);
  CHECK(d.a()[1] == 0.0);
  CHECK(d.c1()(2, 1) == doctest::Approx(0.2));
  CHECK(d.y()[2] == 3.5);
}

TEST_CASE("missing schema column names the column") {
  const std::string text = "c0,a,c11,c12,c13,y\n0,1,1,1,1,1\n0,0,1,1,1,1\n";
  try {
    parse_csv(text, kSchema, {});
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("'m'") != std::string::npos);
    CHECK(e.code() == "E_SCHEMA");
  }
}

TEST_CASE("treatment value outside the coding") {
  const std::string text =
      "c0,a,c11,c12,c13,m,y\n0,1,1,1,1,1,1\n0,2,1,1,1,1,1\n0,0,1,1,1,1,1\n";
  CHECK_THROWS_AS(parse_csv(text, kSchema, {}), CodingError);
}

TEST_CASE("source labels are recoded with a' to 0") {
  const std::string text =
      "c0,a,c11,c12,c13,m,y\n0,5,1,1,1,1,1\n0,4,1,1,1,1,1\n";
  const Dataset d = parse_csv(text, kSchema, {.a = 4, .a_prime = 5});
  CHECK(d.a()[0] == 0.0);
  CHECK(d.a()[1] == 1.0);
}

TEST_CASE("ingestion errors") {
  const std::string header = "c0,a,c11,c12,c13,m,y\n";
  CHECK_THROWS_AS(parse_csv(header + "0,1,1,1,1,,1\n0,0,1,1,1,1,1\n", kSchema, {}),
                  IngestionError);
  CHECK_THROWS_AS(parse_csv(header + "0,1,1,NA,1,1,1\n0,0,1,1,1,1,1\n", kSchema, {}),
                  IngestionError);
  try {
    parse_csv(header + "0,1,1,1,1,1,1\n0,0,x1,1,1,1,1\n", kSchema, {});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("c11") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv(header + "0,1,1,1,1,1,1\n", kSchema, {}), CodingError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", kSchema, {}), IngestionError);
}

TEST_CASE("dataset invariants") {
  Matrix c0 = Matrix::Zero(2, 1);
  Matrix c1 = Matrix::Zero(2, 1);
  Vector v = Vector::Zero(2);
  Vector bad_a(2);
  bad_a << 0, 2;
  CHECK_THROWS_AS(Dataset(c0, bad_a, c1, v, v, {"c0"}, {"c1"}), CodingError);
  CHECK_THROWS_AS(Dataset(c0, v, Matrix::Zero(3, 1), v, v, {"c0"}, {"c1"}),
                  ShapeError);
  CHECK_THROWS(Dataset(c0, v, c1, v, v, {"x"}, {"x"}));
  CHECK_THROWS(Dataset(c0, v, c1, v, v, {"A"}, {"c1"}));
}

TEST_CASE("formula grammar") {
  const Formula f = parse_formula("1 + c0 + A + c11 + c12 + c13 + M + A:M");
  CHECK(f.size() == 8);
  CHECK(f.has_intercept());
  CHECK(f.to_string() == "1 + c0 + A + c11 + c12 + c13 + M + A:M");
  CHECK(parse_formula("M:A").terms().front() == parse_formula("A:M").terms().front());
  CHECK(parse_formula("x:x").terms().front() == Term::power("x", 2));
  CHECK(parse_formula("c0^2").terms().front().label() == "c0^2");
  CHECK_THROWS_AS(parse_formula("1 + c0 + c0"), FormulaError);
  CHECK_THROWS_AS(parse_formula("1 + "), FormulaError);
  CHECK_THROWS_AS(parse_formula("c0^0"), FormulaError);
  CHECK(parse_formula("1 + A + A:c0 + c0").without_terms_referencing("A") ==
        parse_formula("1 + c0"));
  const std::vector<std::string> vars{"M", "c11"};
  CHECK(parse_formula("1 + M + c11 + c0:M").affine_in(vars));
  CHECK_FALSE(parse_formula("1 + c11:M").affine_in(vars));
  CHECK_FALSE(parse_formula("1 + M^2").affine_in(vars));
}

TEST_CASE("build_design examples") {
  const Dataset d = two_rows();
  const DesignMatrix ones = build_design(
      Dataset(Matrix::Zero(4, 1), (Vector(4) << 0, 1, 0, 1).finished(),
              Matrix::Zero(4, 1), Vector::Zero(4), Vector::Zero(4), {"c0"}, {"c1"}),
      parse_formula("1"));
  CHECK(ones.values == Matrix::Ones(4, 1));

  const Formula f = parse_formula("1 + c0 + A + A:c0");
  Matrix expect(2, 4);
  expect << 1, 2, 1, 2, 1, 3, 0, 0;
  CHECK(build_design(d, f).values == expect);
  CHECK(build_design(d, f).term_labels ==
        std::vector<std::string>{"1", "c0", "A", "A:c0"});

  Matrix forced(2, 4);
  forced << 1, 2, 0, 0, 1, 3, 0, 0;
  CHECK(build_design(d, f, {.a = 0.0}).values == forced);

  const std::vector<double> m_over{7.0, 8.0};
  const DesignMatrix dm = build_design(d, parse_formula("M + A:M"), {.m = m_over});
  CHECK(dm.values(0, 0) == 7.0);
  CHECK(dm.values(0, 1) == 7.0);
  CHECK(dm.values(1, 1) == 0.0);

  CHECK_THROWS_AS(build_design(d, parse_formula("1 + zz")), FormulaError);
}

TEST_CASE("property: design rows permute with data rows") {
  Rng rng(11);
  const Index n = 40;
  Matrix c0(n, 1), c1(n, 2);
  Vector a(n), m(n), y(n);
  for (Index i = 0; i < n; ++i) {
    c0(i, 0) = rng.normal();
    c1(i, 0) = rng.normal();
    c1(i, 1) = rng.normal();
    a[i] = i % 2;
    m[i] = rng.normal();
    y[i] = rng.normal();
  }
  const Dataset d(c0, a, c1, m, y, {"c0"}, {"x1", "x2"});
  const Formula f = parse_formula("1 + c0 + c0^2 + A:x1 + x1:x2:M + A");
  const DesignMatrix full = build_design(d, f);
  std::vector<Index> perm(n);
  for (Index i = 0; i < n; ++i) perm[i] = (i * 7 + 3) % n;
  const DesignMatrix permuted = build_design(d.rows(perm), f);
  for (Index i = 0; i < n; ++i) {
    CHECK(permuted.values.row(i) == full.values.row(perm[i]));
  }
  // overriding A with its observed value changes nothing
  Vector ones_a = Vector::Ones(n);
  const Dataset treated(c0, ones_a, c1, m, y, {"c0"}, {"x1", "x2"});
  CHECK(build_design(treated, f, {.a = 1.0}).values == build_design(treated, f).values);
}

}  // TEST_SUITE
