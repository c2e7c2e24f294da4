#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ni/errors.hpp"
#include "ni/guidance.hpp"
#include "ni/oracles.hpp"

using namespace ni;
using doctest::Approx;

namespace {
const Schedule kCont = Schedule::vp_continuous();
}

TEST_SUITE("oracles") {
  TEST_CASE("posterior weights") {
    auto sym = dataset_from_rows({{-1.0}, {1.0}});
    auto w = posterior_weights(sym, kCont, 0.5, {0.0});
    CHECK(w.w[0] == Approx(0.5));
    CHECK(w.w[1] == Approx(0.5));
    CHECK(posterior_weights(dataset_from_rows({{3.0}}), kCont, 0.5, {9.0}).w == std::vector<double>{1.0});

    // alpha_bar = 0.8, brute force in long double
    double lo = kCont.t_min(), hi = 1;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (kCont.alpha_bar(mid) > 0.8 ? lo : hi) = mid;
    }
    auto pair = dataset_from_rows({{0.0}, {1.0}});
    auto pw = posterior_weights(pair, kCont, lo, {0.5});
    long double c0 = std::sqrt(static_cast<long double>(kCont.alpha_bar(lo)));
    long double c1 = std::sqrt(1 - static_cast<long double>(kCont.alpha_bar(lo)));
    long double mu = 0.5L / c0, sig = c1 / c0;
    long double u0 = std::exp(-(0 - mu) * (0 - mu) / (2 * sig * sig)), u1 = std::exp(-(1 - mu) * (1 - mu) / (2 * sig * sig));
    CHECK(std::abs(pw.w[0] - static_cast<double>(u0 / (u0 + u1))) < 1e-12);
  }

  TEST_CASE("degenerate limits") {
    auto ds = dataset_from_rows({{0.0}, {1.0}, {5.0}});
    auto flow = Schedule::flow();
    auto u = posterior_weights(ds, flow, 1.0, {0.3});
    CHECK(u.degenerate);
    for (double w : u.w) CHECK(w == Approx(1.0 / 3));
    auto one = posterior_weights(ds, flow, 0.0, {4.0});
    CHECK(one.w == std::vector<double>{0, 0, 1});
    CHECK(one.argmax == 2);
  }

  TEST_CASE("posterior means") {
    auto ds = dataset_from_rows({{2.0, -1.0}});
    CHECK(posterior_mean_dataset(ds, kCont, 0.9, {10.0, 3.0}) == Vec{2.0, -1.0});
    auto sym = dataset_from_rows({{-1.0}, {1.0}});
    CHECK(posterior_mean_dataset(sym, kCont, 0.7, {0.0})[0] == Approx(0.0).scale(1));

    GaussianMixture g{{{1.0, {0.7}, 0.3}}, {}};
    auto [c0, c1] = kCont.coeffs(0.4);
    double x = 0.9, mu = x / c0, s2 = c1 * c1 / (c0 * c0);
    CHECK(posterior_mean_gmm(g, kCont, 0.4, {x})[0] == Approx((s2 * 0.7 + 0.3 * mu) / (s2 + 0.3)).epsilon(1e-13));
    GaussianMixture sharp{{{1.0, {0.7}, 1e-14}}, {}};
    CHECK(posterior_mean_gmm(sharp, kCont, 0.4, {x})[0] == Approx(0.7).epsilon(1e-9));

    GaussianMixture two{{{0.3, {-1.0}, 0.2}, {0.7, {1.5}, 0.5}}, {}};
    // independent quadrature value
    CHECK(posterior_mean_gmm(two, kCont, 0.5, {0.3})[0] == Approx(0.82753691901078682).epsilon(1e-12));
  }

  TEST_CASE("score") {
    auto [c0, c1] = kCont.coeffs(0.3);
    auto atom = dataset_from_rows({{0.0, 0.0}});
    Vec x{0.4, -0.2};
    auto sc = score_from_x0hat(kCont, 0.3, x, posterior_mean_dataset(atom, kCont, 0.3, x));
    CHECK(sc[0] == Approx(-0.4 / (c1 * c1)));
    GaussianMixture g{{{1.0, {1.2}, 0.4}}, {}};
    Vec mode{c0 * 1.2};
    CHECK(score_from_x0hat(kCont, 0.3, mode, posterior_mean_gmm(g, kCont, 0.3, mode))[0] == Approx(0.0).scale(1));
    CHECK_THROWS_AS(score_from_x0hat(Schedule::flow(), 0.3, x, x), ParameterError);
  }

  TEST_CASE("predictors") {
    auto ds = dataset_from_rows({{1.0}, {3.0}, {-2.0}, {4.0}});
    ds.labels = {0, 1, 0, 1};
    auto f = make_predictor(ds, kCont);
    CHECK(f(0.5, {0.1}).size() == 1);
    auto cond = make_predictor(ds, kCont, 1);
    Vec x{0.2};
    Element bad = f(0.5, x), good = cond(0.5, x);
    CHECK(std::get<Vec>(cfg_combine(bad, good, 1.0)) == cond(0.5, x));
    CHECK_THROWS(make_predictor(ds, kCont, 7));
    // c0 -> 0 approaches the dataset mean
    auto far = make_predictor(ds, Schedule::flow())(1 - 1e-6, {0.3})[0];
    CHECK(far == Approx(1.5).epsilon(1e-4));
    auto one = make_predictor(dataset_from_rows({{5.0}}), kCont);
    CHECK(one(0.1, {-3.0}) == Vec{5.0});
    CHECK(one(0.9, {30.0}) == Vec{5.0});
  }

  TEST_CASE("dataset io") {
    auto ds = standard_normal_dataset(7, 3, 2);
    ds.labels = {0, 1, 2, 0, 1, 2, 0};
    const std::string path = "oracles_io_test.nids";
    save_dataset(ds, path);
    auto back = load_dataset(path);
    CHECK(back.atoms == ds.atoms);
    CHECK(back.labels == ds.labels);
    std::remove(path.c_str());

    const std::string csv = "oracles_io_test.csv";
    std::ofstream(csv) << "a,b\n1,2\n3,4\n";
    auto c = load_dataset(csv);
    CHECK(c.n == 2);
    CHECK(c.d == 2);
    CHECK(c.atoms[3] == 4.0);
    std::ofstream(csv) << "1,2\n3\n";
    CHECK_THROWS_AS(load_dataset(csv), ParseError);
    std::remove(csv.c_str());
    CHECK_THROWS_AS(load_dataset("missing.nids"), IoError);
  }

  TEST_CASE("mixture config") {
    auto g = parse_gmm(R"({"components": [{"weight": 0.25, "mean": [0, 1], "var": 0.1, "label": 0},
                                          {"weight": 0.75, "mean": [2, 0], "var": 0.2, "label": 1}]})");
    CHECK(g.dim() == 2);
    CHECK(g.components[1].weight == 0.75);
    CHECK_THROWS(parse_gmm(R"({"components": [{"weight": 0.5, "mean": [0], "var": 0.1}]})"));
    CHECK_THROWS(parse_gmm(R"({"components": [{"weight": 1.0, "mean": [0], "var": -1}]})"));
    auto ring = ring_mixture();
    CHECK(ring.components.size() == 8);
    CHECK(std::hypot(ring.components[2].mean[0], ring.components[2].mean[1]) == Approx(2.0));
  }
}
