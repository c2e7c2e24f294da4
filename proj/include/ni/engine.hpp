#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ni/affine.hpp"
#include "ni/coeffmatrix.hpp"
#include "ni/schedule.hpp"

namespace ni {

struct RunConfig {
  CoefficientMatrix matrix;
  Predictor predictor;
  std::size_t dim = 0;
  std::optional<NoiseMode> noise_mode;  // defaults to the matrix's own mode
  std::uint64_t seed = 0;
  std::size_t n = 1;
  bool record_trajectory = false;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct RunResult {
  std::vector<Vec> samples;
  // Per sample, the model outputs y_0 .. y_{M-1}, when recorded.
  std::vector<std::vector<Vec>> outputs;
  std::size_t nfe = 0;
};

RunResult run_matrix(const RunConfig& cfg);

// One sample; `sample` selects the noise substream.
Vec run_matrix_one(const CoefficientMatrix& m, const Predictor& f, std::size_t dim, std::uint64_t seed,
                   std::uint64_t sample, std::vector<Vec>* outputs = nullptr);

enum class EnhanceMode { Renoise, Dry };

std::vector<Vec> over_enhance(const Predictor& f, const Schedule& s, double t, const Vec& x_init, int k,
                              EnhanceMode mode, std::uint64_t seed = 0);

// Apply fn(i) for i in [0, n) over worker threads.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn);

}  // namespace ni

#include <thread>

namespace ni {

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  unsigned hw = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  std::size_t workers = std::min<std::size_t>(hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ni
