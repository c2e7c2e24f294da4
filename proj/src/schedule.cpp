#include "ni/schedule.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ni/errors.hpp"

namespace ni {
namespace {

// numpy.linspace semantics: endpoint included and exact.
std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  double step = (b - a) / (n - 1);
  for (int k = 0; k < n; ++k) v[k] = a + k * step;
  v[n - 1] = b;
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double to_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw ParameterError("bad number: " + s);
    return v;
  } catch (const std::logic_error&) {
    throw ParameterError("bad number: " + s);
  }
}

}  // namespace

Schedule Schedule::vp_linear(double beta_min, double beta_max, int T) {
  if (!(beta_min > 0) || !(beta_min <= beta_max) || !(beta_max < 1) || T < 1)
    throw ParameterError("vp-linear requires 0 < beta_min <= beta_max < 1 and T >= 1");
  Schedule s;
  s.family_ = Family::VpDiscrete;
  s.beta_min_ = beta_min;
  s.beta_max_ = beta_max;
  s.T_ = T;
  s.betas_ = linspace(beta_min, beta_max, T);
  s.alphas_.resize(T);
  s.alpha_bars_.resize(T);
  s.log_alpha_bars_.resize(T);
  long double acc = 0;
  for (int t = 0; t < T; ++t) {
    s.alphas_[t] = 1.0 - s.betas_[t];
    acc += std::log1p(-static_cast<long double>(s.betas_[t]));
    s.log_alpha_bars_[t] = static_cast<double>(acc);
    s.alpha_bars_[t] = static_cast<double>(std::exp(acc));
  }
  return s;
}

Schedule Schedule::vp_continuous(double beta_min, double beta_max, double t_min) {
  if (!(beta_min > 0) || !(beta_min <= beta_max) || !(t_min > 0 && t_min < 1))
    throw ParameterError("vp-continuous requires 0 < beta_min <= beta_max and 0 < t_min < 1");
  Schedule s;
  s.family_ = Family::VpContinuous;
  s.beta_min_ = beta_min;
  s.beta_max_ = beta_max;
  s.t_min_ = t_min;
  return s;
}

Schedule Schedule::flow() { return Schedule{}; }

Schedule Schedule::parse(const std::string& text) {
  auto parts = split(text, ':');
  if (parts.empty()) throw ParameterError("empty schedule");
  const auto& kind = parts[0];
  if (kind == "flow" && parts.size() == 1) return flow();
  if ((kind == "vp-linear" || kind == "vp-discrete") && parts.size() == 4) {
    double t = to_double(parts[3]);
    if (t != std::floor(t)) throw ParameterError("T must be an integer");
    return vp_linear(to_double(parts[1]), to_double(parts[2]), static_cast<int>(t));
  }
  if (kind == "vp-linear" && parts.size() == 1) return vp_linear(1e-4, 0.02, 1000);
  if (kind == "vp-continuous" && parts.size() == 1) return vp_continuous();
  if (kind == "vp-continuous" && (parts.size() == 3 || parts.size() == 4))
    return vp_continuous(to_double(parts[1]), to_double(parts[2]),
                         parts.size() == 4 ? to_double(parts[3]) : 1e-3);
  throw ParameterError("unknown schedule: " + text);
}

std::string Schedule::str() const {
  auto f = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  switch (family_) {
    case Family::Flow:
      return "flow";
    case Family::VpDiscrete:
      return "vp-linear:" + f(beta_min_) + ':' + f(beta_max_) + ':' + std::to_string(T_);
    case Family::VpContinuous:
      return "vp-continuous:" + f(beta_min_) + ':' + f(beta_max_) + ':' + f(t_min_);
  }
  return {};
}

double Schedule::t_max() const { return family_ == Family::VpDiscrete ? T_ - 1 : 1.0; }

double Schedule::t_end() const {
  switch (family_) {
    case Family::VpDiscrete:
      return -1.0;
    case Family::VpContinuous:
      return t_min_;
    default:
      return 0.0;
  }
}

bool Schedule::in_domain(double t) const {
  if (!std::isfinite(t)) return false;
  if (family_ == Family::VpDiscrete) return t >= -1.0 && t <= T_ - 1;
  return t >= 0.0 && t <= 1.0;
}

double Schedule::log_alpha_bar(double t) const {
  if (!in_domain(t)) throw DomainError("time out of schedule domain: " + std::to_string(t));
  switch (family_) {
    case Family::VpDiscrete: {
      auto at = [&](int k) { return k < 0 ? 0.0 : log_alpha_bars_[k]; };
      double f = std::floor(t);
      int k = static_cast<int>(f);
      if (f == t) return at(k);
      double w = t - f;
      return (1 - w) * at(k) + w * at(k + 1);
    }
    case Family::VpContinuous:
      return -0.5 * t * t * (beta_max_ - beta_min_) - t * beta_min_;
    default:
      throw DomainError("alpha_bar is undefined for flow schedules");
  }
}

double Schedule::alpha_bar(double t) const { return std::exp(log_alpha_bar(t)); }

double Schedule::beta_rate(double t) const {
  if (!in_domain(t)) throw DomainError("time out of schedule domain: " + std::to_string(t));
  switch (family_) {
    case Family::VpDiscrete: {
      int k = std::max(0, static_cast<int>(std::ceil(t)));
      return -std::log1p(-betas_[k]);
    }
    case Family::VpContinuous:
      return beta_min_ + t * (beta_max_ - beta_min_);
    default:
      throw DomainError("beta is undefined for flow schedules");
  }
}

std::pair<double, double> Schedule::coeffs(double t) const {
  if (!in_domain(t)) throw DomainError("time out of schedule domain: " + std::to_string(t));
  if (family_ == Family::Flow) return {1.0 - t, t};
  double la = log_alpha_bar(t);
  return {std::exp(0.5 * la), std::sqrt(-std::expm1(la))};
}

std::pair<double, double> mixing_coeffs(const Schedule& s, double t) { return s.coeffs(t); }

double Schedule::lambda(double t) const {
  if (family_ == Family::Flow) {
    if (!in_domain(t)) throw DomainError("time out of schedule domain");
    return std::log1p(-t) - std::log(t);
  }
  double la = log_alpha_bar(t);
  return 0.5 * la - 0.5 * std::log(-std::expm1(la));
}

double Schedule::t_from_lambda(double lam) const {
  if (family_ == Family::Flow) return 1.0 / (1.0 + std::exp(lam));
  // alpha_bar = sigmoid(2 lambda)
  double la = -std::log1p(std::exp(-2.0 * lam));
  if (family_ == Family::VpContinuous) {
    double a = 0.5 * (beta_max_ - beta_min_), b = beta_min_, c = la;
    if (a == 0) return -c / b;
    return (-b + std::sqrt(b * b - 4 * a * c)) / (2 * a);
  }
  if (la >= 0) return -1.0;
  if (la <= log_alpha_bars_.back()) return T_ - 1;
  auto it = std::lower_bound(log_alpha_bars_.begin(), log_alpha_bars_.end(), la,
                             [](double v, double x) { return v > x; });
  int k = static_cast<int>(it - log_alpha_bars_.begin());
  double hi = log_alpha_bars_[k];
  double lo = k == 0 ? 0.0 : log_alpha_bars_[k - 1];
  return (k - 1) + (la - lo) / (hi - lo);
}

TimeGrid make_grid(const Schedule& s, int n, GridRule rule) {
  if (n < 1) throw ParameterError("grid needs at least one step");
  TimeGrid g;
  g.rule = rule;
  g.terminal = s.t_end();
  const Family fam = s.family();
  if (fam == Family::VpDiscrete && n > s.steps())
    throw ParameterError("grid size exceeds schedule length");
  if (rule == GridRule::Trailing) {
    if (fam == Family::VpDiscrete) {
      for (double v : linspace(s.t_max(), 0.0, n)) g.times.push_back(std::round(v));
    } else if (fam == Family::Flow) {
      for (int k = n; k >= 1; --k) g.times.push_back(static_cast<double>(k) / n);
    } else {
      auto v = linspace(1.0, s.t_min(), n + 1);
      g.times.assign(v.begin(), v.end() - 1);
    }
  } else if (rule == GridRule::Quadratic) {
    double lo = fam == Family::VpContinuous ? s.t_min() : 0.0;
    auto v = linspace(std::sqrt(s.t_max()), std::sqrt(lo), n + 1);
    for (int k = 0; k < n; ++k) {
      double t = v[k] * v[k];
      g.times.push_back(fam == Family::VpDiscrete ? std::round(t) : t);
    }
  } else {
    throw ParameterError("explicit grids need a time list");
  }
  for (std::size_t i = 1; i < g.times.size(); ++i)
    if (!(g.times[i] < g.times[i - 1]))
      throw ParameterError("grid collapses after rounding; use fewer steps");
  return g;
}

TimeGrid make_explicit_grid(const Schedule& s, std::vector<double> times, double terminal) {
  if (times.empty()) throw ValidationError("explicit grid is empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!s.in_domain(times[i])) throw ValidationError("grid time outside schedule domain");
    if (i > 0 && !(times[i] < times[i - 1])) throw ValidationError("grid times must strictly decrease");
  }
  if (!s.in_domain(terminal) || !(terminal < times.back()))
    throw ValidationError("terminal time must be below the last grid time");
  return TimeGrid{std::move(times), terminal, GridRule::Explicit};
}

GridRule parse_grid_rule(const std::string& name) {
  if (name == "trailing" || name == "linspace-trailing" || name == "uniform") return GridRule::Trailing;
  if (name == "quadratic") return GridRule::Quadratic;
  if (name == "explicit") return GridRule::Explicit;
  throw ParameterError("unknown grid rule: " + name);
}

}  // namespace ni
