#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ni/engine.hpp"
#include "ni/errors.hpp"
#include "ni/oracles.hpp"
#include "ni/presets.hpp"

using namespace ni;
using doctest::Approx;

namespace {

CoefficientMatrix one_row() {
  CoefficientMatrix m;
  m.schedule = Schedule::flow();
  m.col_times = {1.0};
  m.row_times = {0.0};
  m.signal = {{1.0}};
  m.noise_mode = NoiseMode::Traced;
  m.noise_ids = {{0, 0}};
  m.noise_times = {1.0};
  m.first_noise = {1.0};
  m.noise = {{0.0}};
  return m;
}

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("one-row matrix returns the single prediction") {
    Predictor f = [](double, const Vec& x) { return Vec{2 * x[0] + 1, -x[1]}; };
    RunConfig cfg{one_row(), f, 2};
    cfg.seed = 4;
    auto res = run_matrix(cfg);
    auto e = draw_noise(4, 0, {0, 0}, 2);
    CHECK(res.samples[0][0] == 2 * e[0] + 1);
    CHECK(res.samples[0][1] == -e[1]);
    CHECK(res.nfe == 1);
  }

  TEST_CASE("traced ddim matches the native run") {
    auto s = Schedule::vp_linear(1e-4, 0.02, 1000);
    auto ds = standard_normal_dataset(32, 3, 5);
    auto f = make_predictor(ds, s);
    auto spec = parse_sampler("ddim");
    auto grid = grid_for(spec, s, 18, GridRule::Trailing);
    auto m = trace_sampler(spec, s, grid);
    RunConfig cfg{m, f, 3};
    cfg.seed = 9;
    cfg.n = 3;
    auto res = run_matrix(cfg);
    for (std::size_t i = 0; i < 3; ++i) {
      ConcreteContext ctx(f, 3, 9, i);
      auto native = std::get<Vec>(run_native(spec, s, grid, ctx).output);
      CHECK(testing::rel_err(res.samples[i], native) <= 1e-9);
    }
  }

  TEST_CASE("hand-tuned preset runs with five evaluations") {
    auto m = normalize_rows(preset("opt-5")).matrix;
    int calls = 0;
    auto g = ring_mixture();
    auto inner = make_predictor(g, m.schedule);
    Predictor f = [&](double t, const Vec& x) {
      ++calls;
      return inner(t, x);
    };
    RunConfig cfg{m, f, 2};
    cfg.threads = 1;
    auto res = run_matrix(cfg);
    CHECK(res.nfe == 5);
    CHECK(calls == 5);
  }

  TEST_CASE("determinism and recording") {
    auto m = preset("ddpm-18");
    auto f = make_predictor(random_mixture(3, 2, 1), m.schedule);
    RunConfig cfg{m, f, 2};
    cfg.n = 8;
    cfg.seed = 3;
    cfg.record_trajectory = true;
    auto a = run_matrix(cfg), b = run_matrix(cfg);
    CHECK(a.samples == b.samples);
    REQUIRE(a.outputs.size() == 8);
    CHECK(a.outputs[0].size() == 18);
  }

  TEST_CASE("errors") {
    Predictor wrong = [](double, const Vec&) { return Vec{1.0}; };
    RunConfig cfg{one_row(), wrong, 2};
    CHECK_THROWS_AS(run_matrix(cfg), ValidationError);
    RunConfig none{one_row(), {}, 2};
    CHECK_THROWS_AS(run_matrix(none), ParameterError);
    auto bad = preset("ddim-18");
    bad.signal[2][5] = 0.1;
    RunConfig tri{bad, [](double, const Vec& x) { return x; }, 1};
    CHECK_THROWS_AS(run_matrix(tri), ValidationError);
  }

  TEST_CASE("noise modes") {
    auto m = normalize_rows(preset("opt-5")).matrix;
    Predictor zero = [](double, const Vec& x) { return Vec(x.size(), 0.0); };
    RunConfig cfg{m, zero, 1};
    cfg.n = 1;
    auto single = run_matrix(cfg).samples[0][0];
    // zero predictor leaves only the terminal noise term
    CHECK(single == Approx(m.schedule.c1(m.row_times.back()) * draw_noise(0, 0, {0, 0}, 1)[0]));
    cfg.noise_mode = NoiseMode::FreshPerStep;
    auto fresh = run_matrix(cfg).samples[0][0];
    CHECK(fresh == Approx(m.schedule.c1(m.row_times.back()) * draw_noise(0, 0, {5, 0}, 1)[0]));
  }

  TEST_CASE("over-enhancement") {
    auto s = Schedule::vp_continuous();
    auto ds = dataset_from_rows({{0.0, 0.0}, {3.0, 1.0}, {-2.0, 2.0}});
    auto f = make_predictor(ds, s);
    CHECK(over_enhance(f, s, 0.5, {0.1, 0.2}, 0, EnhanceMode::Dry).size() == 1);

    auto seq = over_enhance(f, s, 0.02, {2.2, 0.7}, 6, EnhanceMode::Dry);
    bool reached = false;
    for (std::size_t j = 1; j <= 3; ++j) reached |= seq[j] == ds.row(1);
    CHECK(reached);
    CHECK(seq.back() == ds.row(1));

    auto one = make_predictor(dataset_from_rows({{1.5, -0.5}}), s);
    auto rn = over_enhance(one, s, 0.6, {0.0, 0.0}, 5, EnhanceMode::Renoise, 2);
    for (std::size_t j = 1; j < rn.size(); ++j) CHECK(rn[j] == Vec{1.5, -0.5});
    CHECK_THROWS_AS(over_enhance(f, s, 0.5, {0.0, 0.0}, -1, EnhanceMode::Dry), ParameterError);
  }

  TEST_CASE("parallel_for propagates exceptions") {
    CHECK_THROWS_AS(parallel_for(16, 4,
                                 [](std::size_t i) {
                                   if (i == 7) throw NumericError("boom");
                                 }),
                    NumericError);
  }
}
