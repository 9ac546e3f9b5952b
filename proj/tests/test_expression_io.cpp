#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "nnpde/errors.hpp"
#include "nnpde/expression.hpp"
#include "nnpde/io.hpp"

using namespace nnpde;

TEST_CASE("expression evaluation") {
  CHECK(Expression::parse("1 + 2 * 3")(0, 0, 0) == 7.0);
  CHECK(Expression::parse("2^3^2")(0, 0, 0) == 512.0);
  CHECK(Expression::parse("-2^2")(0, 0, 0) == -4.0);
  CHECK(Expression::parse("(1 - x) / 4")(0, 0.5, 0) == 0.125);
  CHECK(Expression::parse("sin(pi * x) * y")(0, 0.5, 3.0) == doctest::Approx(3.0));
  CHECK(Expression::parse("exp(t) + log(y) - sqrt(u)")(1.0, 0, 1.0, 4.0) == doctest::Approx(std::numbers::e - 2));
  CHECK(Expression::parse("tanh(u) + cos(0)")(0, 0, 0, 0) == 1.0);
  CHECK(Expression::parse("1e-2*x")(0, 3, 0) == doctest::Approx(0.03));
  CHECK(Expression::constant(2.5)(1, 2, 3, 4) == 2.5);
}

TEST_CASE("symbolic derivative in u") {
  const Expression ac = Expression::parse("u^3 - u");
  const Expression d = ac.derivative_u(), dd = d.derivative_u();
  for (double u : {-1.5, 0.0, 0.3, 2.0}) {
    CHECK(d(0, 0, 0, u) == doctest::Approx(3 * u * u - 1));
    CHECK(dd(0, 0, 0, u) == doctest::Approx(6 * u));
  }
  const Expression e = Expression::parse("x * sin(2*u) + exp(-u) / (1 + u^2) - t");
  for (double u : {-0.7, 0.1, 1.3}) {
    const double h = 1e-6;
    const double fd = (e(0.2, 0.4, 0, u + h) - e(0.2, 0.4, 0, u - h)) / (2 * h);
    CHECK(e.derivative_u()(0.2, 0.4, 0, u) == doctest::Approx(fd).epsilon(1e-8));
  }
  CHECK(Expression::parse("x*t").derivative_u()(1, 2, 3, 4) == 0.0);
}

TEST_CASE("variable dependence") {
  const Expression e = Expression::parse("x + 0*t + sin(u)");
  CHECK(e.depends_on('x'));
  CHECK(e.depends_on('u'));
  CHECK_FALSE(e.depends_on('y'));
  CHECK_FALSE(Expression::parse("3 + pi").depends_on('t'));
  CHECK(Expression::parse("  x ").source() == "  x ");
}

TEST_CASE("expression errors") {
  for (const char* bad : {"", "1 +", "sin x", "(x", "x)", "foo(1)", "z", "2 ** 3", "1 2"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(Expression::parse(bad), ConfigError);
  }
}

TEST_CASE("train log round trip") {
  std::stringstream ss;
  write_train_header(ss);
  write_train_record(ss, {0, 0.125, 1.0 / 3.0, 7.5, 1e-3, false, 1.0 / 3.0});
  write_train_record(ss, {1, 0.0625, 0.2, 4.0, 9.5e-4, true, 0.2});
  CHECK(ss.str().rfind("epoch,j,rmse_rel,grad_norm,rate,clipped,best_rmse\n", 0) == 0);
  const auto back = read_train_log(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].rmse_rel == 1.0 / 3.0);
  CHECK(back[1].clipped);
  CHECK(back[1].rate == 9.5e-4);
}

TEST_CASE("csv table access") {
  std::istringstream in("a,b\n1,2\n3,4.5\n");
  const CsvTable t = read_csv(in);
  CHECK(t.column_index("b") == 1);
  CHECK(t.column("b") == std::vector<double>{2, 4.5});
  CHECK_THROWS_AS(t.column("c"), DataError);
  std::istringstream ragged("a,b\n1\n");
  CHECK_THROWS_AS(read_csv(ragged), DataError);
}

TEST_CASE("svg output") {
  std::ostringstream os;
  write_svg(os, {{"first", {0, 1, 2}, {1, 10, 100}}, {"second", {0, 2}, {5, 5}}},
            {"RMSE", "epoch", "rmse", true});
  const std::string s = os.str();
  CHECK(s.find("<svg") != std::string::npos);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(s.find("RMSE") != std::string::npos);
  CHECK(s.find("first") != std::string::npos);
  std::size_t lines = 0;
  for (std::size_t p = s.find("<polyline"); p != std::string::npos; p = s.find("<polyline", p + 1)) ++lines;
  CHECK(lines == 2);
}

TEST_CASE("parameter JSON round trip is exact") {
  const NetParams p = init_params(6, 0.7, {-1.0, 1.0, 77}, Activation::Sigmoid);
  const NetParams q = params_from_json(nlohmann::json::parse(params_to_json(p).dump()));
  CHECK(q.n == 6);
  CHECK(q.beta == 0.7);
  CHECK(q.activation == Activation::Sigmoid);
  CHECK(q.to_flat() == p.to_flat());
  const auto dir = std::filesystem::temp_directory_path() / "nnpde_io_test";
  std::filesystem::create_directories(dir);
  save_params(dir / "p.json", p);
  CHECK(load_params(dir / "p.json").to_flat() == p.to_flat());
  nlohmann::json broken = params_to_json(p);
  broken["c"].erase(0);
  CHECK_THROWS(params_from_json(broken));
  std::filesystem::remove_all(dir);
}
