#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ni/affine.hpp"
#include "ni/schedule.hpp"

namespace ni {

struct Dataset {
  std::size_t n = 0, d = 0;
  std::vector<double> atoms;          // row-major n x d
  std::vector<std::uint32_t> labels;  // empty or n entries

  const double* atom(std::size_t i) const { return atoms.data() + i * d; }
  Vec row(std::size_t i) const { return Vec(atom(i), atom(i) + d); }
  Dataset subset(std::uint32_t label) const;
  void validate() const;
};

Dataset load_dataset(const std::string& path);  // NIDS1 binary or CSV
void save_dataset(const Dataset& ds, const std::string& path);
Dataset dataset_from_rows(const std::vector<Vec>& rows);
Dataset standard_normal_dataset(std::size_t n, std::size_t d, std::uint64_t seed);

struct GmmComponent {
  double weight;
  Vec mean;
  double var;
};

struct GaussianMixture {
  std::vector<GmmComponent> components;
  std::vector<std::uint32_t> labels;  // optional, per component

  std::size_t dim() const { return components.empty() ? 0 : components.front().mean.size(); }
  void validate() const;
  GaussianMixture subset(std::uint32_t label) const;
  Vec sample(std::uint64_t seed, std::uint64_t index) const;
};

GaussianMixture load_gmm(const std::string& path);  // JSON config
GaussianMixture parse_gmm(const std::string& text);
// k equal-weight modes on a circle of the given radius in 2D.
GaussianMixture ring_mixture(int k = 8, double radius = 2.0, double var = 0.02);
// Random mixture in d dimensions for tests.
GaussianMixture random_mixture(int k, std::size_t d, std::uint64_t seed);

struct PosteriorParams {
  Vec mu;
  double sigma;
};
PosteriorParams posterior_params(const Schedule& s, double t, const Vec& x_t);

struct PosteriorWeights {
  std::vector<double> w;
  bool degenerate = false;  // c0 = 0: uniform limit
  std::size_t argmax = 0;
};

PosteriorWeights posterior_weights(const Dataset& ds, const Schedule& s, double t, const Vec& x_t);
Vec posterior_mean_dataset(const Dataset& ds, const Schedule& s, double t, const Vec& x_t);
Vec posterior_mean_gmm(const GaussianMixture& g, const Schedule& s, double t, const Vec& x_t);

Vec score_from_x0hat(const Schedule& s, double t, const Vec& x_t, const Vec& x0_hat);
double gmm_marginal_logdensity(const GaussianMixture& g, const Schedule& s, double t, const Vec& x_t);

Predictor make_predictor(const Dataset& ds, const Schedule& s, std::optional<std::uint32_t> label = {});
Predictor make_predictor(const GaussianMixture& g, const Schedule& s, std::optional<std::uint32_t> label = {});

}  // namespace ni
