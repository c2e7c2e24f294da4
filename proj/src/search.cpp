#include "ni/search.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <numeric>
#include <random>

#include "ni/engine.hpp"
#include "ni/errors.hpp"

namespace ni {
namespace {

double dist(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double u = a[k] - b[k];
    s += u * u;
  }
  return std::sqrt(s);
}

double mean_cross(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double s = 0;
  for (const auto& x : a)
    for (const auto& y : b) s += dist(x, y);
  return s / (static_cast<double>(a.size()) * b.size());
}

double mean_self(const std::vector<Vec>& a) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) s += dist(a[i], a[j]);
  return 2 * s / (static_cast<double>(a.size()) * a.size());
}

void check_sets(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.empty() || b.empty()) throw ParameterError("energy distance needs non-empty samples");
  const std::size_t d = a.front().size();
  for (const auto& v : a)
    if (v.size() != d) throw ValidationError("dimension mismatch in energy distance");
  for (const auto& v : b)
    if (v.size() != d) throw ValidationError("dimension mismatch in energy distance");
}

}  // namespace

double energy_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  check_sets(a, b);
  return std::max(0.0, 2 * mean_cross(a, b) - mean_self(a) - mean_self(b));
}

double energy_permutation_pvalue(const std::vector<Vec>& a, const std::vector<Vec>& b, int permutations,
                                 std::uint64_t seed) {
  check_sets(a, b);
  const double observed = energy_distance(a, b);
  std::vector<Vec> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());
  std::mt19937_64 gen(seed);
  int hits = 0;
  for (int p = 0; p < permutations; ++p) {
    std::shuffle(pool.begin(), pool.end(), gen);
    std::vector<Vec> x(pool.begin(), pool.begin() + a.size()), y(pool.begin() + a.size(), pool.end());
    hits += energy_distance(x, y) >= observed;
  }
  return (hits + 1.0) / (permutations + 1.0);
}

EnergyObjective::EnergyObjective(std::vector<Vec> reference) : ref_(std::move(reference)) {
  if (ref_.empty()) throw ParameterError("empty reference sample");
  ref_self_ = mean_self(ref_);
}

double EnergyObjective::operator()(const std::vector<Vec>& samples) const {
  check_sets(samples, ref_);
  return std::max(0.0, 2 * mean_cross(samples, ref_) - mean_self(samples) - ref_self_);
}

SearchSpace SearchSpace::banded(const CoefficientMatrix& base, int k) {
  if (k < 0) throw ParameterError("band width must be non-negative");
  SearchSpace sp;
  sp.base = base;
  const std::size_t m = base.size();
  sp.free.assign(m, std::vector<bool>(m, false));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = (r >= static_cast<std::size_t>(k) ? r - k : 0); c < r; ++c) sp.free[r][c] = true;
  return sp;
}

std::size_t SearchSpace::dimension() const {
  std::size_t n = 0;
  for (const auto& row : free) n += std::count(row.begin(), row.end(), true);
  return n;
}

std::vector<double> SearchSpace::initial() const {
  std::vector<double> p;
  for (std::size_t r = 0; r < free.size(); ++r)
    for (std::size_t c = 0; c < free[r].size(); ++c)
      if (free[r][c]) p.push_back(base.signal[r][c]);
  return p;
}

CoefficientMatrix SearchSpace::realize(const std::vector<double>& params) const {
  if (params.size() != dimension()) throw ParameterError("parameter vector has wrong size");
  CoefficientMatrix m = base;
  std::size_t i = 0;
  for (std::size_t r = 0; r < free.size(); ++r) {
    for (std::size_t c = 0; c < free[r].size(); ++c)
      if (free[r][c]) m.signal[r][c] = std::clamp(params[i++], lower, upper);
    double off = 0;
    for (std::size_t c = 0; c < r; ++c) off += m.signal[r][c];
    m.signal[r][r] = m.target(r) - off;
  }
  return m;
}

bool SearchSpace::satisfies_constraints(const CoefficientMatrix& m, double tol) const {
  for (std::size_t r = 0; r < m.size(); ++r) {
    double s = 0;
    for (double v : m.signal[r]) s += v;
    if (std::abs(s - m.target(r)) > tol * std::max(1.0, std::abs(m.target(r)))) return false;
    for (std::size_t c = 0; c < r; ++c)
      if (!free[r][c] && m.signal[r][c] != base.signal[r][c]) return false;
  }
  return true;
}

SearchResult optimize_matrix(const SearchSpace& space, const MatrixObjective& objective, const SearchConfig& cfg) {
  SearchResult res;
  res.seed = cfg.seed;
  std::vector<double> cur = space.initial();
  CoefficientMatrix cur_m = space.realize(cur);
  res.constraints_held = space.satisfies_constraints(cur_m);
  double cur_f = objective(cur_m);
  res.initial_objective = cur_f;
  double best_f = cur_f;
  std::vector<double> best = cur;
  res.best = cur_m;
  if (cfg.budget == 0 || cur.empty()) return res;

  std::mt19937_64 gen(cfg.seed);
  std::normal_distribution<double> normal;
  double step = cfg.step;

  auto evaluate = [&](const std::vector<double>& p, double& f) {
    CoefficientMatrix m = space.realize(p);
    res.constraints_held = res.constraints_held && space.satisfies_constraints(m);
    ++res.evaluations;
    try {
      f = objective(m);
    } catch (const std::exception& e) {
      ++res.failures;
      std::cerr << "search: evaluation " << res.evaluations << " failed: " << e.what() << '\n';
      f = std::numeric_limits<double>::infinity();
    }
    if (f < best_f) {
      best_f = f;
      best = p;
      res.best = m;
    }
    res.trace.push_back(best_f);
  };

  std::vector<std::size_t> order(cur.size());
  std::iota(order.begin(), order.end(), 0);
  while (res.evaluations < cfg.budget) {
    std::shuffle(order.begin(), order.end(), gen);
    bool improved = false;
    for (std::size_t i : order) {
      for (double dir : {1.0, -1.0}) {
        if (res.evaluations >= cfg.budget) break;
        std::vector<double> cand = cur;
        cand[i] = std::clamp(cand[i] + dir * step, space.lower, space.upper);
        if (cand[i] == cur[i]) continue;
        double f;
        evaluate(cand, f);
        if (f < cur_f) {
          cur = std::move(cand);
          cur_f = f;
          improved = true;
          break;
        }
      }
    }
    if (improved) continue;
    step *= 0.5;
    if (step < cfg.min_step && res.evaluations < cfg.budget) {
      step = cfg.step;
      cur = best;
      for (auto& v : cur) v = std::clamp(v + cfg.restart_scale * normal(gen), space.lower, space.upper);
      evaluate(cur, cur_f);
    }
  }
  (void)best;
  return res;
}

MatrixObjective sample_objective(const Predictor& f, std::size_t dim, std::vector<Vec> reference,
                                 std::size_t samples, std::uint64_t seed) {
  auto obj = std::make_shared<EnergyObjective>(std::move(reference));
  return [=](const CoefficientMatrix& m) {
    RunConfig cfg;
    cfg.matrix = m;
    cfg.predictor = f;
    cfg.dim = dim;
    cfg.seed = seed;
    cfg.n = samples;
    cfg.threads = 1;
    return (*obj)(run_matrix(cfg).samples);
  };
}

SearchResult optimize_matrix(const SearchSpace& space, const Predictor& f, std::size_t dim,
                             const std::vector<Vec>& reference, const SearchConfig& cfg) {
  return optimize_matrix(space, sample_objective(f, dim, reference, cfg.samples, cfg.seed ^ 0x9e3779b97f4a7c15ull),
                         cfg);
}

}  // namespace ni
