#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ni/affine.hpp"
#include "ni/coeffmatrix.hpp"

namespace ni {

double energy_distance(const std::vector<Vec>& a, const std::vector<Vec>& b);

// Fraction of label permutations whose statistic is at least the observed one.
double energy_permutation_pvalue(const std::vector<Vec>& a, const std::vector<Vec>& b, int permutations,
                                 std::uint64_t seed);

// Energy distance against a fixed reference with its self term cached.
class EnergyObjective {
 public:
  explicit EnergyObjective(std::vector<Vec> reference);
  double operator()(const std::vector<Vec>& samples) const;

 private:
  std::vector<Vec> ref_;
  double ref_self_ = 0;
};

// Free entries sit in a band of k columns left of each diagonal; the
// diagonal absorbs the row constraint.
struct SearchSpace {
  CoefficientMatrix base;
  std::vector<std::vector<bool>> free;
  double lower = -3, upper = 3;

  static SearchSpace banded(const CoefficientMatrix& base, int k);
  std::size_t dimension() const;
  std::vector<double> initial() const;
  CoefficientMatrix realize(const std::vector<double>& params) const;
  // Row sums equal targets within tol.
  bool satisfies_constraints(const CoefficientMatrix& m, double tol = 1e-12) const;
};

struct SearchResult {
  CoefficientMatrix best;
  double initial_objective = 0;
  std::vector<double> trace;  // best objective after each evaluation
  std::size_t evaluations = 0;
  std::size_t failures = 0;
  std::uint64_t seed = 0;
  bool constraints_held = true;
};

struct SearchConfig {
  std::size_t budget = 2000;
  std::uint64_t seed = 0;
  std::size_t samples = 512;  // per evaluation, fixed noise
  double step = 0.1;
  double min_step = 1e-3;
  double restart_scale = 0.05;
};

using MatrixObjective = std::function<double(const CoefficientMatrix&)>;

SearchResult optimize_matrix(const SearchSpace& space, const MatrixObjective& objective, const SearchConfig& cfg);

// Objective that runs the matrix with common random numbers and scores the
// samples by energy distance to `reference`.
MatrixObjective sample_objective(const Predictor& f, std::size_t dim, std::vector<Vec> reference,
                                 std::size_t samples, std::uint64_t seed);

SearchResult optimize_matrix(const SearchSpace& space, const Predictor& f, std::size_t dim,
                             const std::vector<Vec>& reference, const SearchConfig& cfg);

}  // namespace ni
