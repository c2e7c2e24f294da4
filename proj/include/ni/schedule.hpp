#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ni {

enum class Family { VpDiscrete, VpContinuous, Flow };

// Mixing law x_t = c0(t) x0 + c1(t) eps.
//
// vp-discrete times are step indices in [0, T-1] plus the terminal -1
// (alpha_bar = 1); non-integer times interpolate log alpha_bar linearly.
// vp-continuous uses beta(t) = beta_min + t (beta_max - beta_min) on
// [t_min, 1]. flow has c0 = 1 - t, c1 = t on [0, 1].
class Schedule {
 public:
  static Schedule vp_linear(double beta_min, double beta_max, int T);
  static Schedule vp_continuous(double beta_min = 0.1, double beta_max = 20.0,
                                double t_min = 1e-3);
  static Schedule flow();

  // "vp-linear:1e-4:0.02:1000", "vp-continuous:0.1:20[:1e-3]", "flow".
  static Schedule parse(const std::string& text);
  std::string str() const;

  Family family() const { return family_; }
  bool is_vp() const { return family_ != Family::Flow; }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }
  int steps() const { return T_; }
  double t_min() const { return t_min_; }

  double t_max() const;
  // Time of the final output row.
  double t_end() const;
  bool in_domain(double t) const;

  // vp only.
  double log_alpha_bar(double t) const;
  double alpha_bar(double t) const;
  // -d log alpha_bar / dt; on vp-discrete the rate of the segment ending at t.
  double beta_rate(double t) const;

  std::pair<double, double> coeffs(double t) const;
  double c0(double t) const { return coeffs(t).first; }
  double c1(double t) const { return coeffs(t).second; }

  // log(c0 / c1), strictly decreasing in t.
  double lambda(double t) const;
  double t_from_lambda(double lam) const;

  // vp-discrete tables, index 0..T-1.
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

 private:
  Family family_ = Family::Flow;
  double beta_min_ = 0, beta_max_ = 0, t_min_ = 0;
  int T_ = 0;
  std::vector<double> betas_, alphas_, alpha_bars_, log_alpha_bars_;
};

std::pair<double, double> mixing_coeffs(const Schedule& s, double t);

enum class GridRule { Trailing, Quadratic, Explicit };

struct TimeGrid {
  std::vector<double> times;  // evaluation times, largest first
  double terminal = 0;        // time of the returned sample
  GridRule rule = GridRule::Trailing;

  std::size_t size() const { return times.size(); }
  double next(std::size_t i) const { return i + 1 < times.size() ? times[i + 1] : terminal; }
};

TimeGrid make_grid(const Schedule& s, int n, GridRule rule);
TimeGrid make_explicit_grid(const Schedule& s, std::vector<double> times, double terminal);
GridRule parse_grid_rule(const std::string& name);

}  // namespace ni
