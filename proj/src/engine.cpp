#include "ni/engine.hpp"

#include <cmath>

#include "ni/errors.hpp"

namespace ni {

Vec run_matrix_one(const CoefficientMatrix& m, const Predictor& f, std::size_t dim, std::uint64_t seed,
                   std::uint64_t sample, std::vector<Vec>* outputs) {
  const std::size_t M = m.size();
  std::vector<Element> eps;
  eps.reserve(m.noise_ids.size());
  for (auto id : m.noise_ids) eps.emplace_back(draw_noise(seed, sample, id, dim));
  std::vector<Element> ys;
  ys.reserve(M);

  auto combine = [&](const std::vector<double>* sig, const std::vector<double>& noi) {
    std::vector<Term> terms;
    if (sig)
      for (std::size_t c = 0; c < sig->size(); ++c) {
        if ((*sig)[c] == 0) continue;
        if (c >= ys.size()) throw ValidationError("row references an output that does not exist yet");
        terms.push_back({(*sig)[c], &ys[c]});
      }
    for (std::size_t j = 0; j < noi.size(); ++j)
      if (noi[j] != 0) terms.push_back({noi[j], &eps[j]});
    if (terms.empty()) return Vec(dim, 0.0);
    return std::get<Vec>(lin_combine(terms));
  };

  Vec x = combine(nullptr, m.first_noise);
  for (std::size_t r = 0; r < M; ++r) {
    Vec y = f(m.col_times[r], x);
    if (y.size() != dim) throw ValidationError("predictor dimension mismatch");
    ys.emplace_back(std::move(y));
    if (r == M - 1) break;
    x = combine(&m.signal[r], m.noise[r]);
  }
  if (outputs) {
    outputs->clear();
    for (const auto& y : ys) outputs->push_back(std::get<Vec>(y));
  }
  return combine(&m.signal[M - 1], m.noise[M - 1]);
}

RunResult run_matrix(const RunConfig& cfg) {
  if (!cfg.predictor) throw ParameterError("run_matrix needs a predictor");
  if (cfg.dim == 0) throw ParameterError("run_matrix needs a positive dimension");
  cfg.matrix.validate();
  CoefficientMatrix m = cfg.matrix;
  if (cfg.noise_mode) m.noise_mode = *cfg.noise_mode;
  if (m.noise_mode != NoiseMode::Traced || !m.has_noise()) m = materialize_noise(m);

  RunResult res;
  res.nfe = m.size();
  res.samples.resize(cfg.n);
  if (cfg.record_trajectory) res.outputs.resize(cfg.n);
  parallel_for(cfg.n, cfg.threads, [&](std::size_t i) {
    res.samples[i] = run_matrix_one(m, cfg.predictor, cfg.dim, cfg.seed, i,
                                    cfg.record_trajectory ? &res.outputs[i] : nullptr);
  });
  return res;
}

std::vector<Vec> over_enhance(const Predictor& f, const Schedule& s, double t, const Vec& x_init, int k,
                              EnhanceMode mode, std::uint64_t seed) {
  if (k < 0) throw ParameterError("iteration count must be non-negative");
  std::vector<Vec> seq{x_init};
  auto [c0, c1] = s.coeffs(t);
  for (int j = 0; j < k; ++j) {
    const Vec& x = seq.back();
    Vec in = x;
    if (mode == EnhanceMode::Renoise) {
      Vec e = draw_noise(seed, 0, NoiseId{j, 0}, x.size());
      for (std::size_t i = 0; i < x.size(); ++i) in[i] = c0 * x[i] + c1 * e[i];
    }
    seq.push_back(f(t, in));
  }
  return seq;
}

}  // namespace ni
