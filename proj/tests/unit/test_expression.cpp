#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bellman2d/errors.hpp"
#include "bellman2d/expression.hpp"

using namespace bellman2d;

TEST_CASE("expression evaluation") {
    CHECK(Expression::parse("x*y")(2.0, 3.0) == 6.0);
    CHECK(Expression::parse("2^3^2")(0, 0) == 512.0);
    CHECK(Expression::parse("-x^2")(3.0, 0) == -9.0);
    CHECK(Expression::parse("(1 + x) / (y - 1)")(1.0, 3.0) == 1.0);
    CHECK(Expression::parse("sin(pi/2) + cos(0) + exp(0) + log(1) + sqrt(4) + abs(-1) + tan(0)")(0, 0) ==
          doctest::Approx(6.0));
    CHECK(Expression::parse("1.5e-1 * y")(0, 2.0) == doctest::Approx(0.3));
    CHECK(Expression::parse(" y^3 - 3*x^2*y ").source() == " y^3 - 3*x^2*y ");
}

TEST_CASE("malformed expressions") {
    for (const char* bad : {"", "x +", "(x", "foo(x)", "x y", "1..2", "sin x", "z"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(Expression::parse(bad), ValidationError);
    }
}
