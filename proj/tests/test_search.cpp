#include <doctest.h>

#include <cmath>

#include "ni/errors.hpp"
#include "ni/oracles.hpp"
#include "ni/search.hpp"

using namespace ni;
using doctest::Approx;

namespace {

CoefficientMatrix ddim5() {
  auto s = Schedule::vp_continuous();
  auto spec = parse_sampler("ddim");
  return trace_sampler(spec, s, grid_for(spec, s, 5, GridRule::Quadratic));
}

std::vector<Vec> mixture_sample(const GaussianMixture& g, std::size_t n, std::uint64_t seed) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(g.sample(seed, i));
  return out;
}

}  // namespace

TEST_SUITE("search") {
  TEST_CASE("energy distance") {
    std::vector<Vec> a{{0.0, 1.0}, {2.0, -1.0}, {0.5, 0.5}};
    CHECK(energy_distance(a, a) == Approx(0.0).scale(1));
    CHECK(energy_distance({{0.0, 0.0}}, {{3.0, 4.0}}) == Approx(10.0));
    CHECK_THROWS_AS(energy_distance({{0.0}}, {{1.0, 2.0}}), ValidationError);
    CHECK_THROWS_AS(energy_distance({}, a), ParameterError);
    EnergyObjective obj(a);
    CHECK(obj({{0.0, 0.0}}) == Approx(energy_distance({{0.0, 0.0}}, a)));
  }

  TEST_CASE("same-distribution samples pass the permutation test") {
    auto g = ring_mixture();
    auto x = mixture_sample(g, 300, 1), y = mixture_sample(g, 300, 2);
    CHECK(energy_permutation_pvalue(x, y, 99, 5) > 0.05);
    auto shifted = y;
    for (auto& v : shifted) v[0] += 1.0;
    CHECK(energy_permutation_pvalue(x, shifted, 99, 5) <= 0.05);
  }

  TEST_CASE("search space") {
    auto base = ddim5();
    auto sp = SearchSpace::banded(base, 3);
    CHECK(sp.dimension() == 0 + 1 + 2 + 3 + 3);
    auto m = sp.realize(sp.initial());
    CHECK(sp.satisfies_constraints(m));
    auto p = sp.initial();
    for (auto& v : p) v += 0.3;
    auto moved = sp.realize(p);
    CHECK(sp.satisfies_constraints(moved));
    CHECK(moved.signal[4][0] == base.signal[4][0]);
    CHECK_THROWS_AS(sp.realize({1.0}), ParameterError);
    CHECK_THROWS_AS(SearchSpace::banded(base, -1), ParameterError);
  }

  TEST_CASE("zero budget returns the initial matrix") {
    auto base = ddim5();
    auto sp = SearchSpace::banded(base, 3);
    int calls = 0;
    SearchConfig cfg;
    cfg.budget = 0;
    auto res = optimize_matrix(sp, [&](const CoefficientMatrix&) { return ++calls, 1.0; }, cfg);
    CHECK(res.best.signal == sp.realize(sp.initial()).signal);
    CHECK(calls == 1);
    CHECK(res.evaluations == 0);
    CHECK(res.trace.empty());
  }

  TEST_CASE("monotone trace and failure accounting") {
    auto sp = SearchSpace::banded(ddim5(), 2);
    std::size_t k = 0;
    MatrixObjective obj = [&](const CoefficientMatrix& m) {
      if (++k % 7 == 0) throw NumericError("synthetic failure");
      double s = 0;
      for (const auto& row : m.signal)
        for (double v : row) s += (v - 0.1) * (v - 0.1);
      return s;
    };
    SearchConfig cfg;
    cfg.budget = 300;
    cfg.seed = 4;
    auto res = optimize_matrix(sp, obj, cfg);
    CHECK(res.evaluations == 300);
    CHECK(res.trace.size() == 300);
    CHECK(res.failures > 0);
    for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1]);
    CHECK(res.trace.back() <= res.initial_objective);
    CHECK(res.constraints_held);
  }

  TEST_CASE("common random numbers") {
    auto base = ddim5();
    auto g = ring_mixture();
    auto obj = sample_objective(make_predictor(g, base.schedule), 2, mixture_sample(g, 200, 9), 64, 3);
    CHECK(obj(base) == obj(base));
  }
}
