#include "ni/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ni/errors.hpp"

namespace ni {
namespace {

static_assert(std::endian::native == std::endian::little, "dataset IO assumes a little-endian host");

double sq_dist(const double* a, const double* b, std::size_t d) {
  if (d < 10000) {
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) {
      double u = a[k] - b[k];
      s += u * u;
    }
    return s;
  }
  double s = 0, c = 0;
  for (std::size_t k = 0; k < d; ++k) {
    double u = a[k] - b[k];
    double y = u * u - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

double logsumexp(const std::vector<double>& l) {
  double m = *std::max_element(l.begin(), l.end());
  double s = 0;
  for (double v : l) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

void Dataset::validate() const {
  if (n < 1 || d < 1) throw ValidationError("dataset must have n >= 1 and d >= 1");
  if (atoms.size() != n * d) throw ValidationError("dataset size mismatch");
  for (double v : atoms)
    if (!std::isfinite(v)) throw ValidationError("dataset has non-finite entries");
  if (!labels.empty() && labels.size() != n) throw ValidationError("label count mismatch");
}

Dataset Dataset::subset(std::uint32_t label) const {
  if (labels.empty()) throw ParameterError("dataset has no labels");
  Dataset out;
  out.d = d;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] == label) {
      out.atoms.insert(out.atoms.end(), atom(i), atom(i) + d);
      out.labels.push_back(label);
      ++out.n;
    }
  if (out.n == 0) throw ParameterError("no atoms carry label " + std::to_string(label));
  return out;
}

Dataset dataset_from_rows(const std::vector<Vec>& rows) {
  Dataset ds;
  ds.n = rows.size();
  ds.d = rows.empty() ? 0 : rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != ds.d) throw ValidationError("ragged dataset rows");
    ds.atoms.insert(ds.atoms.end(), r.begin(), r.end());
  }
  ds.validate();
  return ds;
}

Dataset standard_normal_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.atoms.resize(n * d);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x4e494453u};
  std::mt19937_64 gen(seq);
  std::normal_distribution<double> normal;
  for (auto& v : ds.atoms) v = normal(gen);
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[5] = {};
  f.read(magic, 5);
  Dataset ds;
  if (f.gcount() == 5 && std::memcmp(magic, "NIDS1", 5) == 0) {
    std::uint32_t n = 0, d = 0;
    f.read(reinterpret_cast<char*>(&n), 4);
    f.read(reinterpret_cast<char*>(&d), 4);
    if (!f) throw ParseError(path + ": truncated header");
    ds.n = n;
    ds.d = d;
    ds.atoms.resize(static_cast<std::size_t>(n) * d);
    f.read(reinterpret_cast<char*>(ds.atoms.data()), static_cast<std::streamsize>(ds.atoms.size() * 8));
    if (!f) throw ParseError(path + ": truncated payload");
    std::vector<std::uint32_t> labels(n);
    f.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(n) * 4);
    if (f.gcount() == static_cast<std::streamsize>(n) * 4 && n > 0) ds.labels = std::move(labels);
    else if (f.gcount() != 0) throw ParseError(path + ": partial label block");
    ds.validate();
    return ds;
  }
  f.clear();
  f.seekg(0);
  std::string line;
  std::vector<Vec> rows;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    Vec r;
    double v;
    while (is >> v) r.push_back(v);
    if (!is.eof()) {
      if (rows.empty() && r.empty()) continue;  // header line
      throw ParseError(path + ": line " + std::to_string(lineno) + ": expected numbers");
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  try {
    return dataset_from_rows(rows);
  } catch (const ValidationError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write("NIDS1", 5);
  std::uint32_t n = static_cast<std::uint32_t>(ds.n), d = static_cast<std::uint32_t>(ds.d);
  f.write(reinterpret_cast<const char*>(&n), 4);
  f.write(reinterpret_cast<const char*>(&d), 4);
  f.write(reinterpret_cast<const char*>(ds.atoms.data()), static_cast<std::streamsize>(ds.atoms.size() * 8));
  if (!ds.labels.empty())
    f.write(reinterpret_cast<const char*>(ds.labels.data()), static_cast<std::streamsize>(ds.labels.size() * 4));
  if (!f) throw IoError("write failed: " + path);
}

void GaussianMixture::validate() const {
  if (components.empty()) throw ValidationError("mixture has no components");
  double total = 0;
  for (const auto& c : components) {
    if (!(c.weight > 0)) throw ValidationError("mixture weights must be positive");
    if (!(c.var > 0)) throw ValidationError("mixture variances must be positive");
    if (c.mean.size() != dim() || c.mean.empty()) throw ValidationError("mixture means differ in dimension");
    total += c.weight;
  }
  if (std::abs(total - 1) > 1e-12) throw ValidationError("mixture weights must sum to 1");
  if (!labels.empty() && labels.size() != components.size()) throw ValidationError("label count mismatch");
}

GaussianMixture GaussianMixture::subset(std::uint32_t label) const {
  if (labels.empty()) throw ParameterError("mixture has no labels");
  GaussianMixture out;
  double total = 0;
  for (std::size_t k = 0; k < components.size(); ++k)
    if (labels[k] == label) {
      out.components.push_back(components[k]);
      out.labels.push_back(label);
      total += components[k].weight;
    }
  if (out.components.empty()) throw ParameterError("no components carry label " + std::to_string(label));
  for (auto& c : out.components) c.weight /= total;
  return out;
}

Vec GaussianMixture::sample(std::uint64_t seed, std::uint64_t index) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x474d4du};
  std::mt19937_64 gen(seq);
  std::vector<double> w;
  for (const auto& c : components) w.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::normal_distribution<double> normal;
  const auto& c = components[pick(gen)];
  Vec x(c.mean);
  double sd = std::sqrt(c.var);
  for (auto& v : x) v += sd * normal(gen);
  return x;
}

GaussianMixture parse_gmm(const std::string& text) {
  GaussianMixture g;
  try {
    auto j = nlohmann::json::parse(text);
    for (const auto& c : j.at("components")) {
      g.components.push_back({c.at("weight").get<double>(), c.at("mean").get<Vec>(), c.at("var").get<double>()});
      if (c.contains("label")) g.labels.push_back(c["label"].get<std::uint32_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad mixture config: ") + e.what());
  }
  g.validate();
  return g;
}

GaussianMixture load_gmm(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_gmm(ss.str());
}

GaussianMixture ring_mixture(int k, double radius, double var) {
  GaussianMixture g;
  for (int i = 0; i < k; ++i) {
    double a = 2 * std::numbers::pi * i / k;
    g.components.push_back({1.0 / k, {radius * std::cos(a), radius * std::sin(a)}, var});
    g.labels.push_back(static_cast<std::uint32_t>(i));
  }
  // Exact unit total.
  double rest = 1.0;
  for (int i = 0; i + 1 < k; ++i) rest -= g.components[i].weight;
  g.components.back().weight = rest;
  return g;
}

GaussianMixture random_mixture(int k, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::normal_distribution<double> normal;
  GaussianMixture g;
  double total = 0;
  for (int i = 0; i < k; ++i) {
    Vec m(d);
    for (auto& v : m) v = 1.5 * normal(gen);
    g.components.push_back({u(gen), m, 0.05 + 0.3 * u(gen)});
    total += g.components.back().weight;
  }
  for (auto& c : g.components) c.weight /= total;
  double rest = 1.0;
  for (int i = 0; i + 1 < k; ++i) rest -= g.components[i].weight;
  g.components.back().weight = rest;
  return g;
}

PosteriorParams posterior_params(const Schedule& s, double t, const Vec& x_t) {
  auto [c0, c1] = s.coeffs(t);
  if (c0 <= 0) throw SingularError("posterior parameters undefined at c0 = 0");
  Vec mu(x_t);
  for (auto& v : mu) v /= c0;
  return {mu, c1 / c0};
}

PosteriorWeights posterior_weights(const Dataset& ds, const Schedule& s, double t, const Vec& x_t) {
  if (x_t.size() != ds.d) throw ValidationError("query dimension differs from dataset");
  PosteriorWeights out;
  auto [c0, c1] = s.coeffs(t);
  if (c0 <= 0) {
    out.w.assign(ds.n, 1.0 / ds.n);
    out.degenerate = true;
    return out;
  }
  auto p = posterior_params(s, t, x_t);
  std::vector<double> dist(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) dist[i] = sq_dist(ds.atom(i), p.mu.data(), ds.d);
  out.argmax = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
  out.w.assign(ds.n, 0.0);
  if (p.sigma == 0) {
    out.w[out.argmax] = 1.0;
    return out;
  }
  const double dmin = dist[out.argmax];
  const double inv = 1.0 / (2 * p.sigma * p.sigma);
  double total = 0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    out.w[i] = std::exp(-(dist[i] - dmin) * inv);
    total += out.w[i];
  }
  for (auto& w : out.w) w /= total;
  return out;
}

Vec posterior_mean_dataset(const Dataset& ds, const Schedule& s, double t, const Vec& x_t) {
  auto pw = posterior_weights(ds, s, t, x_t);
  Vec m(ds.d, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (pw.w[i] == 0) continue;
    const double* a = ds.atom(i);
    for (std::size_t k = 0; k < ds.d; ++k) m[k] += pw.w[i] * a[k];
  }
  return m;
}

Vec posterior_mean_gmm(const GaussianMixture& g, const Schedule& s, double t, const Vec& x_t) {
  const std::size_t d = g.dim();
  if (x_t.size() != d) throw ValidationError("query dimension differs from mixture");
  auto [c0, c1] = s.coeffs(t);
  Vec out(d, 0.0);
  if (c0 <= 0) {
    for (const auto& c : g.components)
      for (std::size_t k = 0; k < d; ++k) out[k] += c.weight * c.mean[k];
    return out;
  }
  auto p = posterior_params(s, t, x_t);
  const double s2 = p.sigma * p.sigma;
  std::vector<double> logr;
  for (const auto& c : g.components) {
    double v = c.var + s2;
    logr.push_back(std::log(c.weight) - 0.5 * d * std::log(v) - sq_dist(p.mu.data(), c.mean.data(), d) / (2 * v));
  }
  double lse = logsumexp(logr);
  for (std::size_t j = 0; j < g.components.size(); ++j) {
    double r = std::exp(logr[j] - lse);
    if (r == 0) continue;
    const auto& c = g.components[j];
    for (std::size_t k = 0; k < d; ++k) out[k] += r * (s2 * c.mean[k] + c.var * p.mu[k]) / (s2 + c.var);
  }
  return out;
}

Vec score_from_x0hat(const Schedule& s, double t, const Vec& x_t, const Vec& x0_hat) {
  if (!s.is_vp()) throw ParameterError("score conversion needs a vp schedule");
  auto [c0, c1] = s.coeffs(t);
  if (c1 <= 0 || c0 <= 0) throw SingularError("score undefined at a noiseless or signal-free time");
  const double s0 = c0 / (c1 * c1), st = -1 / (c1 * c1);
  Vec out(x_t.size());
  for (std::size_t k = 0; k < x_t.size(); ++k) out[k] = s0 * x0_hat[k] + st * x_t[k];
  return out;
}

double gmm_marginal_logdensity(const GaussianMixture& g, const Schedule& s, double t, const Vec& x_t) {
  const std::size_t d = g.dim();
  auto [c0, c1] = s.coeffs(t);
  std::vector<double> l;
  for (const auto& c : g.components) {
    double v = c0 * c0 * c.var + c1 * c1;
    double q = 0;
    for (std::size_t k = 0; k < d; ++k) {
      double u = x_t[k] - c0 * c.mean[k];
      q += u * u;
    }
    l.push_back(std::log(c.weight) - 0.5 * d * std::log(2 * std::numbers::pi * v) - q / (2 * v));
  }
  return logsumexp(l);
}

Predictor make_predictor(const Dataset& ds, const Schedule& s, std::optional<std::uint32_t> label) {
  auto data = std::make_shared<const Dataset>(label ? ds.subset(*label) : ds);
  data->validate();
  return [data, s](double t, const Vec& x) { return posterior_mean_dataset(*data, s, t, x); };
}

Predictor make_predictor(const GaussianMixture& g, const Schedule& s, std::optional<std::uint32_t> label) {
  auto mix = std::make_shared<const GaussianMixture>(label ? g.subset(*label) : g);
  mix->validate();
  return [mix, s](double t, const Vec& x) { return posterior_mean_gmm(*mix, s, t, x); };
}

}  // namespace ni
