#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ni/affine.hpp"
#include "ni/samplers.hpp"
#include "ni/schedule.hpp"

namespace ni {

enum class NoiseMode { Traced, SingleTerminal, FreshPerStep };

std::string to_string(NoiseMode m);
NoiseMode parse_noise_mode(const std::string& s);

using Rows = std::vector<std::vector<double>>;

// M model evaluations at col_times. Row r of `signal` is the input of
// evaluation r+1, and the last row is the returned sample; row r may only
// weight evaluations 0..r. The first evaluation's input is pure noise and
// lives in `first_noise`.
struct CoefficientMatrix {
  std::string name, note;
  Schedule schedule = Schedule::vp_linear(1e-4, 0.02, 1000);
  std::vector<double> row_times;
  std::vector<double> col_times;
  Rows signal;

  NoiseMode noise_mode = NoiseMode::SingleTerminal;
  std::vector<NoiseId> noise_ids;
  std::vector<double> noise_times;
  std::vector<double> first_noise;
  Rows noise;

  // Explicit per-row marginal signal targets; empty means use the schedule.
  std::vector<double> targets;
  // Reference row sums and noise norms carried by shipped matrices.
  std::vector<double> ref_sums, ref_norms;

  std::size_t size() const { return col_times.size(); }
  bool has_noise() const { return !noise.empty(); }
  double target(std::size_t row) const;
  void validate() const;
};

CoefficientMatrix trace_sampler(const SamplerSpec& spec, const Schedule& s, const TimeGrid& grid);

// Fill noise columns for single-terminal mode: c1(t) on the initial draw.
CoefficientMatrix materialize_noise(const CoefficientMatrix& m);

struct MarginalRow {
  double time;
  double signal, ideal_signal, signal_dev;
  double noise, ideal_noise, noise_dev;
};

using MarginalReport = std::vector<MarginalRow>;

MarginalReport equivalent_marginals(const CoefficientMatrix& m);
double max_deviation(const MarginalReport& r);

std::vector<double> deviation_trend(const SamplerSpec& spec, const Schedule& s, const std::vector<int>& steps,
                                    GridRule rule = GridRule::Trailing);

struct Normalized {
  CoefficientMatrix matrix;
  std::vector<double> scales;
};
Normalized normalize_rows(const CoefficientMatrix& m);

void save(const CoefficientMatrix& m, std::ostream& os);
void save(const CoefficientMatrix& m, const std::string& path);
CoefficientMatrix load(std::istream& is);
CoefficientMatrix load(const std::string& path);
CoefficientMatrix parse_matrix(const std::string& text);

void write_csv(const CoefficientMatrix& m, std::ostream& os, bool noise = false);

// Entry-wise comparison of traced signals against a reference of the same
// shape; noise columns are matched by id.
struct Comparison {
  double max_signal_err = 0;
  double max_noise_err = 0;
  double max_sum_err = 0;
  double max_norm_err = 0;
  int sign_mismatches = 0;
  std::size_t worst_row = 0, worst_col = 0;
};
Comparison compare(const CoefficientMatrix& computed, const CoefficientMatrix& reference, double zero_tol = 5e-4);

}  // namespace ni
