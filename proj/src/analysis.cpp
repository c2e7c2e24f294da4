#include "ni/analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

#include "ni/engine.hpp"
#include "ni/errors.hpp"

namespace ni {

TrialOutcome degradation_trial(const Dataset& ds, const Schedule& s, double t, std::mt19937_64& rng,
                               double threshold) {
  std::uniform_int_distribution<std::size_t> pick(0, ds.n - 1);
  std::normal_distribution<double> normal;
  const std::size_t src = pick(rng);
  auto [c0, c1] = s.coeffs(t);
  Vec x(ds.d);
  const double* a = ds.atom(src);
  for (std::size_t k = 0; k < ds.d; ++k) x[k] = c0 * a[k] + c1 * normal(rng);
  auto pw = posterior_weights(ds, s, t, x);
  std::size_t best = static_cast<std::size_t>(std::max_element(pw.w.begin(), pw.w.end()) - pw.w.begin());
  TrialOutcome out;
  out.degraded = pw.w[best] > threshold;
  out.to_source = out.degraded && best == src;
  return out;
}

Wilson wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.5, 0.5};
  const double n = static_cast<double>(trials), p = successes / n, z2 = z * z;
  const double denom = 1 + z2 / n;
  return {(p + z2 / (2 * n)) / denom, z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom};
}

std::string family_name(const Schedule& s) {
  switch (s.family()) {
    case Family::Flow:
      return "flow";
    case Family::VpDiscrete:
    case Family::VpContinuous:
      return "vp";
  }
  return "?";
}

DegradationReport degradation_table(const Dataset& ds, const std::vector<Schedule>& families,
                                    const std::vector<double>& times, std::size_t trials, std::uint64_t seed,
                                    double threshold, unsigned threads) {
  if (trials < 1) throw ParameterError("need at least one trial");
  ds.validate();
  DegradationReport rep;
  for (std::size_t f = 0; f < families.size(); ++f) {
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      const double t = times[ti];
      if (!families[f].in_domain(t)) throw DomainError("time outside the schedule domain");
      std::vector<TrialOutcome> out(trials);
      parallel_for(trials, threads, [&](std::size_t i) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(ti),
                          static_cast<std::uint32_t>(i)};
        std::mt19937_64 rng(seq);
        out[i] = degradation_trial(ds, families[f], t, rng, threshold);
      });
      std::size_t deg = 0, src = 0;
      for (const auto& o : out) {
        deg += o.degraded;
        src += o.to_source;
      }
      DegradationRow row;
      row.family = family_name(families[f]);
      row.t = t;
      row.trials = trials;
      row.rate = static_cast<double>(deg) / trials;
      row.rate_to_source = static_cast<double>(src) / trials;
      row.ci = wilson_interval(deg, trials).half_width;
      row.ci_to_source = wilson_interval(src, trials).half_width;
      rep.push_back(row);
    }
  }
  return rep;
}

namespace {

std::mutex fftw_planner_mutex;

// Orthonormal 2D DFT of a real image.
std::vector<std::complex<double>> dft2(const Image& img) {
  const int n = static_cast<int>(img.side);
  std::vector<std::complex<double>> in(img.px.begin(), img.px.end()), out(in.size());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    plan = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    fftw_destroy_plan(plan);
  }
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

std::size_t radius(std::size_t i, std::size_t j, std::size_t n) {
  auto f = [n](std::size_t k) { return k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - n; };
  return static_cast<std::size_t>(std::lround(std::hypot(f(i), f(j))));
}

void check_image(const Image& img) {
  if (img.side < 4) throw ValidationError("image side must be at least 4");
  if (img.px.size() != img.side * img.side) throw ValidationError("image must be square");
}

template <class Fn>
std::vector<double> band_mean(const Image& img, Fn value) {
  check_image(img);
  auto F = dft2(img);
  const std::size_t n = img.side;
  std::vector<double> sum, cnt;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t r = radius(i, j, n);
      if (r >= sum.size()) {
        sum.resize(r + 1, 0.0);
        cnt.resize(r + 1, 0.0);
      }
      sum[r] += value(F[i * n + j]);
      cnt[r] += 1;
    }
  for (std::size_t r = 0; r < sum.size(); ++r) sum[r] = cnt[r] > 0 ? sum[r] / cnt[r] : 0.0;
  return sum;
}

}  // namespace

std::vector<double> radial_spectrum(const Image& img) {
  return band_mean(img, [](std::complex<double> z) { return std::abs(z); });
}

std::vector<double> radial_power(const Image& img) {
  return band_mean(img, [](std::complex<double> z) { return std::norm(z); });
}

std::vector<SnrBand> snr_profile(const Image& img, const Schedule& s, double t) {
  auto [c0, c1] = s.coeffs(t);
  auto power = radial_power(img);
  std::vector<SnrBand> out;
  for (std::size_t b = 0; b < power.size(); ++b) {
    double sig = c0 * c0 * power[b];
    double snr = c1 == 0 ? std::numeric_limits<double>::infinity() : sig / (c1 * c1);
    out.push_back({b, std::sqrt(power[b]), snr});
  }
  return out;
}

double submerged_fraction(const std::vector<SnrBand>& profile, double threshold) {
  if (profile.empty()) return 0;
  std::size_t k = 0;
  for (const auto& b : profile) k += b.snr < threshold;
  return static_cast<double>(k) / profile.size();
}

std::size_t lowest_submerged_band(const std::vector<SnrBand>& profile, double threshold) {
  for (const auto& b : profile)
    if (b.snr < threshold) return b.band;
  return profile.size();
}

Image power_law_image(std::size_t side, double exponent, std::uint64_t seed) {
  Image white{side, std::vector<double>(side * side)};
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  for (auto& v : white.px) v = normal(gen);
  auto F = dft2(white);
  const double r0 = side / 8.0;
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      double r = std::max<double>(1.0, static_cast<double>(radius(i, j, side)));
      F[i * side + j] *= std::pow(r0 / r, exponent);
    }
  // Inverse via conjugation: ifft(X) = conj(fft(conj(X))).
  const int n = static_cast<int>(side);
  std::vector<std::complex<double>> in(F.size()), out(F.size());
  for (std::size_t k = 0; k < F.size(); ++k) in[k] = std::conj(F[k]);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    plan = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    fftw_destroy_plan(plan);
  }
  Image img{side, std::vector<double>(side * side)};
  for (std::size_t k = 0; k < F.size(); ++k) img.px[k] = std::conj(out[k]).real() / n;
  return img;
}

Image load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[5] = {};
  f.read(magic, 5);
  f.close();
  if (std::string(magic, 5) == "NIDS1") {
    Dataset ds = load_dataset(path);
    auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(ds.d))));
    if (side * side != ds.d) throw ValidationError("dataset row is not a square image");
    return Image{side, ds.row(0)};
  }
  Dataset ds = load_dataset(path);
  if (ds.n != ds.d) throw ValidationError("image must be square");
  return Image{ds.n, ds.atoms};
}

}  // namespace ni
