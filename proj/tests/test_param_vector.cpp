#include <doctest.h>

#include <cmath>
#include <limits>

#include "fedsim/errors.hpp"
#include "fedsim/param_vector.hpp"

using namespace fedsim;

TEST_SUITE("param_vector") {
  TEST_CASE("arithmetic") {
    ParamVector a{1, 2, 3}, b{4, 5, 6};
    CHECK((a + b) == ParamVector{5, 7, 9});
    CHECK((b - a) == ParamVector{3, 3, 3});
    CHECK((2.0 * a) == ParamVector{2, 4, 6});
    CHECK(dot(a, b) == 32.0);
    CHECK(a.norm2() == 14.0);
    a.axpy(-1.0, b);
    CHECK(a == ParamVector{-3, -3, -3});
    CHECK(distance(ParamVector{0, 0}, ParamVector{3, 4}) == 5.0);
  }

  TEST_CASE("non-finite entries are rejected") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(ParamVector({1.0, std::nan("")}), DivergenceError);
    ParamVector big{1e308};
    CHECK_THROWS_AS(big *= 10.0, DivergenceError);
    ParamVector a{1.0};
    CHECK_THROWS_AS(a.axpy(inf, ParamVector{1.0}), DivergenceError);
    CHECK_THROWS_AS(ParamVector(2, inf), DivergenceError);
  }

  TEST_CASE("size mismatch") {
    ParamVector a{1, 2}, b{1, 2, 3};
    CHECK_THROWS(a += b);
  }
}
