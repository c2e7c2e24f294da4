#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ni/oracles.hpp"
#include "ni/schedule.hpp"

namespace ni {

struct TrialOutcome {
  bool degraded = false;
  bool to_source = false;
};

TrialOutcome degradation_trial(const Dataset& ds, const Schedule& s, double t, std::mt19937_64& rng,
                               double threshold = 0.9);

struct DegradationRow {
  std::string family;
  double t = 0;
  double rate = 0, rate_to_source = 0;
  std::size_t trials = 0;
  double ci = 0, ci_to_source = 0;  // 95% Wilson half-widths
};

using DegradationReport = std::vector<DegradationRow>;

DegradationReport degradation_table(const Dataset& ds, const std::vector<Schedule>& families,
                                    const std::vector<double>& times, std::size_t trials, std::uint64_t seed,
                                    double threshold = 0.9, unsigned threads = 0);

std::string family_name(const Schedule& s);

struct Wilson {
  double center, half_width;
  double lo() const { return center - half_width; }
  double hi() const { return center + half_width; }
};
Wilson wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

// Square image stored row-major.
struct Image {
  std::size_t side = 0;
  std::vector<double> px;
};

Image load_image(const std::string& path);  // CSV grid, or NIDS1 with a square row
Image power_law_image(std::size_t side, double exponent, std::uint64_t seed);

// Mean magnitude of the orthonormal 2D DFT over integer-radius annuli.
std::vector<double> radial_spectrum(const Image& img);
std::vector<double> radial_power(const Image& img);

struct SnrBand {
  std::size_t band;
  double amplitude;
  double snr;
};
// SNR per band against unit-variance white noise.
std::vector<SnrBand> snr_profile(const Image& img, const Schedule& s, double t);
double submerged_fraction(const std::vector<SnrBand>& profile, double threshold = 1.0);
// Index of the lowest submerged band, or the band count if none is.
std::size_t lowest_submerged_band(const std::vector<SnrBand>& profile, double threshold = 1.0);

}  // namespace ni
