#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ni/coeffmatrix.hpp"
#include "ni/errors.hpp"
#include "ni/oracles.hpp"
#include "ni/samplers.hpp"

using namespace ni;
using doctest::Approx;

TEST_SUITE("samplers") {
  TEST_CASE("ddpm step coefficients") {
    auto s = Schedule::vp_continuous();
    double t = testing::time_at(s, 0.5), tp = testing::time_at(s, 0.75);
    auto c = ddpm_step_coeffs(s, t, tp);
    CHECK(c.d == Approx(0.408248290463863).epsilon(1e-9));
    CHECK(c.e == Approx(0.577350269189626).epsilon(1e-9));
    CHECK(c.g == Approx(0.408248290463863).epsilon(1e-9));
    CHECK(c.d * std::sqrt(0.5) + c.e == Approx(std::sqrt(0.75)).epsilon(1e-9));

    auto z = ddpm_step_coeffs(s, 0.5, 0.5 - 1e-12);
    CHECK(z.d == Approx(1.0).epsilon(1e-9));
    CHECK(z.e == Approx(0.0).epsilon(1e-9));
    CHECK(z.g == Approx(0.0).epsilon(1e-5));

    auto lin = Schedule::vp_linear(1e-4, 0.02, 1000);
    CHECK_THROWS_AS(ddpm_step_coeffs(lin, -1, -1.5), DomainError);
    CHECK_THROWS_AS(ddpm_step_coeffs(Schedule::flow(), 0.5, 0.2), ParameterError);
  }

  TEST_CASE("ddim step coefficients") {
    auto lin = Schedule::vp_linear(1e-4, 0.02, 1000);
    auto c = ddim_step_coeffs(lin, 999, 940);
    CHECK(c.d == Approx(0.99995598657380344).epsilon(1e-12));
    CHECK(c.e == Approx(0.0049779363718519057).epsilon(1e-10));
    CHECK(std::round(c.e * 1000) / 1000 == 0.005);
    auto same = ddim_step_coeffs(lin, 500, 500);
    CHECK(same.d == 1.0);
    CHECK(same.e == Approx(0.0).scale(1.0));
    CHECK(same.g == 0.0);
    CHECK_THROWS_AS(ddim_step_coeffs(lin, -1, -1), SingularError);
  }

  TEST_CASE("flow euler step coefficients") {
    auto c = flow_euler_step_coeffs(1.0, 17.0 / 18);
    CHECK(c.e == Approx(1.0 / 18));
    auto c2 = flow_euler_step_coeffs(17.0 / 18, 16.0 / 18);
    CHECK(c2.e == Approx(1.0 / 17));
    CHECK(c2.d * c.e == Approx(16.0 / (17 * 18)));
    CHECK(std::round(c2.d * c.e * 1000) / 1000 == 0.052);
    CHECK(std::round(c2.e * 1000) / 1000 == 0.059);
    auto same = flow_euler_step_coeffs(0.4, 0.4);
    CHECK(same.d == 1.0);
    CHECK(same.e == 0.0);
    CHECK_THROWS_AS(flow_euler_step_coeffs(0.0, 0.0), SingularError);
  }

  TEST_CASE("euler steps with zero size leave the state unchanged") {
    auto s = Schedule::vp_continuous();
    Element x = Vec{0.3, -1.2}, y = Vec{1.0, 2.0}, eps = Vec{0.7, 0.1};
    CHECK(std::get<Vec>(ode_euler_step(s, 0.4, 0.4, x, y)) == std::get<Vec>(x));
    auto sde = std::get<Vec>(sde_euler_step(s, 0.4, 0.4, x, y, &eps));
    CHECK(sde[0] == Approx(0.3));
    CHECK(sde[1] == Approx(-1.2));
    CHECK_THROWS_AS(ode_euler_step(Schedule::flow(), 0.5, 0.4, x, y), ParameterError);
  }

  TEST_CASE("prediction conversions") {
    auto s = Schedule::vp_continuous();
    Element x = Vec{0.4, -0.9}, x0 = Vec{1.5, 0.25};
    Element eps = eps_from_x0(s, 0.3, x, x0);
    auto back = std::get<Vec>(x0_from_eps(s, 0.3, x, eps));
    CHECK(back[0] == Approx(1.5));
    CHECK(back[1] == Approx(0.25));

    auto [c0, c1] = s.coeffs(0.3);
    Element xc = Vec{c0 * 2.0}, zero = Vec{0.0};
    CHECK(std::get<Vec>(x0_from_eps(s, 0.3, xc, zero))[0] == Approx(2.0));

    Element fx = Vec{0.6}, fx0 = Vec{0.2};
    CHECK(std::get<Vec>(velocity_from_x0(0.5, fx, fx0))[0] == Approx(0.8));
    CHECK_THROWS_AS(velocity_from_x0(0.0, fx, fx0), SingularError);
    (void)c1;
  }

  TEST_CASE("sampler vocabulary") {
    for (const auto& n : sampler_names()) CHECK(parse_sampler(n).name() == n);
    CHECK(parse_sampler("euler").kind == Kind::FlowEuler);
    CHECK(parse_sampler("deis-0").order == 0);
    CHECK_THROWS_AS(parse_sampler("deis-4"), ParameterError);
    CHECK_THROWS_AS(parse_sampler("dpm-solver-4s"), ParameterError);
    CHECK_THROWS_AS(parse_sampler("heun"), ParameterError);
    CHECK_FALSE(supports(parse_sampler("flow-euler"), Schedule::vp_continuous()));
    CHECK_FALSE(supports(parse_sampler("ddpm"), Schedule::flow()));
    CHECK(supports(parse_sampler("ddim"), Schedule::flow()));
  }

  TEST_CASE("grid_for sets the final group") {
    auto s = Schedule::vp_continuous();
    auto spec = parse_sampler("dpm-solver-3s");
    auto g = grid_for(spec, s, 20, GridRule::Trailing);
    CHECK(g.size() == 7);
    CHECK(spec.opt.final_order == 2);
    auto m = trace_sampler(spec, s, g);
    CHECK(m.size() == 20);
  }

  TEST_CASE("first-order reductions agree with ddim") {
    auto s = Schedule::vp_continuous();
    auto ddim = parse_sampler("ddim");
    auto ref = trace_sampler(ddim, s, make_grid(s, 12, GridRule::Trailing));
    SamplerSpec dpm1{Kind::DpmSolver, 1, {}}, pp1{Kind::DpmSolverPP, 1, {}};
    auto deis0 = parse_sampler("deis-0");
    for (auto spec : {dpm1, pp1, deis0}) {
      auto m = trace_sampler(spec, s, make_grid(s, 12, GridRule::Trailing));
      auto cmp = compare(m, ref, 0);
      CHECK_MESSAGE(cmp.max_signal_err < 1e-9, spec.name());
    }
  }

  TEST_CASE("deis weights integrate the kernel") {
    auto s = Schedule::vp_continuous();
    // single node: weight equals the ddim signal coefficient relation
    auto w = deis_weights(s, 0.6, 0.5, {0.6});
    REQUIRE(w.size() == 1);
    auto c = ddim_step_coeffs(s, 0.6, 0.5);
    // eps weight of the exponential integrator equals c1(t) - c0(t)/c0(s) c1(s)
    double expect = s.c1(0.5) - s.c0(0.5) / s.c0(0.6) * s.c1(0.6);
    CHECK(w[0] == Approx(expect).epsilon(1e-9));
    (void)c;
    // Lagrange weights sum to the single-node weight
    auto w3 = deis_weights(s, 0.6, 0.5, {0.9, 0.75, 0.6});
    CHECK(w3[0] + w3[1] + w3[2] == Approx(expect).epsilon(1e-9));
    CHECK_THROWS_AS(deis_weights(s, 0.5, 0.6, {0.5}), ParameterError);
  }

  TEST_CASE("single-step traces") {
    auto lin = Schedule::vp_linear(1e-4, 0.02, 1000);
    for (const char* n : {"ddim", "ddpm", "dpm-solver-2s", "dpmpp-3s", "deis-2", "flow-euler"}) {
      auto spec = parse_sampler(n);
      Schedule s = spec.kind == Kind::FlowEuler ? Schedule::flow() : lin;
      auto m = trace_sampler(spec, s, grid_for(spec, s, 1, GridRule::Trailing));
      REQUIRE(m.size() == 1);
      CHECK_MESSAGE(m.signal[0][0] == Approx(1.0), n);
    }
  }

  TEST_CASE("native runs are deterministic") {
    auto s = Schedule::vp_continuous();
    auto g = random_mixture(3, 4, 11);
    auto f = make_predictor(g, s);
    for (const char* n : {"ddpm", "dpmpp-3s", "sde-euler"}) {
      auto spec = parse_sampler(n);
      auto grid = grid_for(spec, s, 9, GridRule::Trailing);
      ConcreteContext a(f, 4, 3), b(f, 4, 3);
      CHECK(std::get<Vec>(run_native(spec, s, grid, a).output) == std::get<Vec>(run_native(spec, s, grid, b).output));
    }
  }
}
