#include <doctest.h>

#include <cmath>

#include "ni/errors.hpp"
#include "ni/schedule.hpp"

using namespace ni;
using doctest::Approx;

TEST_SUITE("schedule") {
  TEST_CASE("vp linear tables") {
    auto s = Schedule::vp_linear(1e-4, 0.02, 1000);
    CHECK(s.alpha_bar(0) == Approx(0.9999).epsilon(1e-15));
    CHECK(s.alpha_bar(999) < 1e-4);
    // extended-precision cumulative product
    CHECK(s.alpha_bar(999) == Approx(4.0358297653756833e-5).epsilon(1e-12));
    CHECK(s.alpha_bar(500) == Approx(0.0777966583650239).epsilon(1e-12));
    for (int t = 1; t < 1000; ++t) CHECK_MESSAGE(s.alpha_bar(t) < s.alpha_bar(t - 1), t);
    CHECK(s.alpha_bar(-1) == 1.0);
    CHECK(Schedule::vp_linear(0.5, 0.5, 1).alpha_bar(0) == Approx(0.5));
  }

  TEST_CASE("bad parameters") {
    CHECK_THROWS_AS(Schedule::vp_linear(0, 0.02, 1000), ParameterError);
    CHECK_THROWS_AS(Schedule::vp_linear(0.03, 0.02, 1000), ParameterError);
    CHECK_THROWS_AS(Schedule::vp_linear(1e-4, 1.0, 1000), ParameterError);
    CHECK_THROWS_AS(Schedule::vp_linear(1e-4, 0.02, 0), ParameterError);
    CHECK_THROWS_AS(Schedule::parse("cosine"), ParameterError);
  }

  TEST_CASE("mixing coefficients") {
    auto f = Schedule::flow();
    CHECK(f.coeffs(0.5) == std::pair{0.5, 0.5});
    CHECK(f.coeffs(0.0) == std::pair{1.0, 0.0});
    CHECK_THROWS_AS(f.coeffs(1.5), DomainError);
    CHECK_THROWS_AS(Schedule::vp_linear(1e-4, 0.02, 1000).coeffs(1000), DomainError);

    // vp with alpha_bar = 0.64: find it on the continuous schedule
    auto c = Schedule::vp_continuous();
    double lo = c.t_min(), hi = 1;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (c.alpha_bar(mid) > 0.64 ? lo : hi) = mid;
    }
    auto [c0, c1] = c.coeffs(lo);
    CHECK(c0 == Approx(0.8).epsilon(1e-12));
    CHECK(c1 == Approx(0.6).epsilon(1e-12));
  }

  TEST_CASE("continuous schedule") {
    auto c = Schedule::vp_continuous();
    CHECK(c.alpha_bar(0.5) == Approx(0.079063812453160656).epsilon(1e-13));
    CHECK(c.lambda(0.5) == Approx(-1.2275677344107873).epsilon(1e-13));
    CHECK(c.t_from_lambda(c.lambda(0.37)) == Approx(0.37).epsilon(1e-12));
    CHECK(c.str() == "vp-continuous:0.1:20:0.001");
    CHECK(Schedule::parse(c.str()).alpha_bar(0.3) == c.alpha_bar(0.3));
  }

  TEST_CASE("lambda inverse on the discrete schedule") {
    auto s = Schedule::vp_linear(1e-4, 0.02, 1000);
    for (double t : {0.0, 3.5, 250.0, 640.25, 998.0}) CHECK(s.t_from_lambda(s.lambda(t)) == Approx(t).epsilon(1e-9));
  }

  TEST_CASE("trailing grid") {
    auto s = Schedule::vp_linear(1e-4, 0.02, 1000);
    auto g = make_grid(s, 18, GridRule::Trailing);
    REQUIRE(g.size() == 18);
    CHECK(g.times[0] == 999);
    CHECK(g.times[1] == 940);
    CHECK(g.times[2] == 881);
    CHECK(g.times[16] == 59);
    CHECK(g.times[17] == 0);
    CHECK(g.terminal == -1);

    auto f = make_grid(Schedule::flow(), 18, GridRule::Trailing);
    CHECK(f.times[1] == Approx(17.0 / 18));
    CHECK(std::round(f.times[1] * 1000) / 1000 == 0.944);
    CHECK(f.terminal == 0);

    CHECK(make_grid(s, 1, GridRule::Trailing).times == std::vector<double>{999});
    CHECK(make_grid(Schedule::flow(), 1, GridRule::Trailing).times == std::vector<double>{1});
    CHECK_THROWS_AS(make_grid(s, 1001, GridRule::Trailing), ParameterError);
    CHECK_THROWS_AS(make_grid(s, 0, GridRule::Trailing), ParameterError);
  }

  TEST_CASE("quadratic grid") {
    auto c = Schedule::vp_continuous();
    auto g = make_grid(c, 5, GridRule::Quadratic);
    REQUIRE(g.size() == 5);
    CHECK(g.times[0] == 1.0);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g.times[i] < g.times[i - 1]);
    // spacing shrinks toward the data end
    CHECK(g.times[0] - g.times[1] > g.times[3] - g.times[4]);
    CHECK(g.terminal == Approx(c.t_min()));
  }

  TEST_CASE("explicit grid") {
    auto f = Schedule::flow();
    auto g = make_explicit_grid(f, {1.0, 0.5, 0.2}, 0.0);
    CHECK(g.rule == GridRule::Explicit);
    CHECK(g.next(2) == 0.0);
    CHECK_THROWS_AS(make_explicit_grid(f, {1.0, 0.5, 0.7}, 0.0), ValidationError);
    CHECK_THROWS_AS(make_explicit_grid(f, {1.5, 0.5}, 0.0), ValidationError);
    CHECK(parse_grid_rule("linspace-trailing") == GridRule::Trailing);
    CHECK_THROWS_AS(parse_grid_rule("cosine"), ParameterError);
  }

  TEST_CASE("grids are deterministic") {
    auto s = Schedule::vp_continuous();
    CHECK(make_grid(s, 37, GridRule::Quadratic).times == make_grid(s, 37, GridRule::Quadratic).times);
  }
}
