#include "ni/samplers.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "ni/errors.hpp"

namespace ni {
namespace {

void require_vp(const Schedule& s, const char* what) {
  if (!s.is_vp()) throw ParameterError(std::string(what) + " needs a vp schedule");
}

double one_minus_alpha_bar(const Schedule& s, double t) { return -std::expm1(s.log_alpha_bar(t)); }

}  // namespace

StepCoefficients ddpm_step_coeffs(const Schedule& s, double t, double t_prev) {
  require_vp(s, "ddpm");
  if (!(t > t_prev)) throw ParameterError("ddpm step needs t > t_prev");
  double la_t = s.log_alpha_bar(t), la_p = s.log_alpha_bar(t_prev);
  double v_t = one_minus_alpha_bar(s, t), v_p = one_minus_alpha_bar(s, t_prev);
  if (v_t <= 0) throw SingularError("ddpm step from alpha_bar = 1");
  double beta = -std::expm1(la_t - la_p);
  double alpha = std::exp(la_t - la_p);
  StepCoefficients c;
  c.d = std::sqrt(alpha) * v_p / v_t;
  c.e = std::exp(0.5 * la_p) * beta / v_t;
  c.g = std::sqrt(v_p / v_t * beta);
  return c;
}

StepCoefficients ddim_step_coeffs(const Schedule& s, double t, double t_prev) {
  auto [c0, c1] = s.coeffs(t);
  auto [p0, p1] = s.coeffs(t_prev);
  if (c1 <= 0) throw SingularError("ddim step from a noiseless state");
  StepCoefficients c;
  c.d = p1 / c1;
  c.e = p0 - c.d * c0;
  c.g = 0;
  return c;
}

StepCoefficients flow_euler_step_coeffs(double t, double t_prev) {
  if (!(t_prev >= 0 && t_prev <= t && t <= 1)) throw DomainError("flow step needs 0 <= t_prev <= t <= 1");
  if (t == 0) throw SingularError("flow step from t = 0");
  return {t_prev / t, 1.0 - t_prev / t, 0.0};
}

std::string SamplerSpec::name() const {
  switch (kind) {
    case Kind::Ddpm:
      return "ddpm";
    case Kind::Ddim:
      return "ddim";
    case Kind::FlowEuler:
      return "flow-euler";
    case Kind::SdeEuler:
      return "sde-euler";
    case Kind::OdeEuler:
      return "ode-euler";
    case Kind::DpmSolver:
      return "dpm-solver-" + std::to_string(order) + "s";
    case Kind::DpmSolverPP:
      return "dpmpp-" + std::to_string(order) + "s";
    case Kind::Deis:
      return "deis-" + std::to_string(order);
  }
  return "?";
}

bool SamplerSpec::first_order() const {
  return kind == Kind::Ddpm || kind == Kind::Ddim || kind == Kind::FlowEuler || kind == Kind::SdeEuler ||
         kind == Kind::OdeEuler;
}

int SamplerSpec::evals_per_step() const {
  return (kind == Kind::DpmSolver || kind == Kind::DpmSolverPP) ? order : 1;
}

SamplerSpec parse_sampler(const std::string& name) {
  SamplerSpec s;
  if (name == "ddpm") s.kind = Kind::Ddpm;
  else if (name == "ddim") s.kind = Kind::Ddim;
  else if (name == "flow-euler" || name == "euler") s.kind = Kind::FlowEuler;
  else if (name == "sde-euler") s.kind = Kind::SdeEuler;
  else if (name == "ode-euler") s.kind = Kind::OdeEuler;
  else if (name.rfind("dpm-solver-", 0) == 0 && name.size() == 13 && name[12] == 's') {
    s.kind = Kind::DpmSolver;
    s.order = name[11] - '0';
  } else if (name.rfind("dpmpp-", 0) == 0 && name.size() == 8 && name[7] == 's') {
    s.kind = Kind::DpmSolverPP;
    s.order = name[6] - '0';
  } else if (name.rfind("deis-", 0) == 0 && name.size() == 6) {
    s.kind = Kind::Deis;
    s.order = name[5] - '0';
    if (s.order < 0 || s.order > 3) throw ParameterError("deis order must be 0..3");
    return s;
  } else {
    throw ParameterError("unknown sampler: " + name);
  }
  if ((s.kind == Kind::DpmSolver || s.kind == Kind::DpmSolverPP) && (s.order < 1 || s.order > 3))
    throw ParameterError("dpm-solver order must be 1..3");
  return s;
}

std::vector<std::string> sampler_names() {
  return {"ddpm",          "ddim",          "flow-euler", "sde-euler", "ode-euler", "dpm-solver-2s",
          "dpm-solver-3s", "dpmpp-2s",      "dpmpp-3s",   "deis-1",    "deis-2",    "deis-3"};
}

bool supports(const SamplerSpec& spec, const Schedule& s) {
  if (spec.kind == Kind::FlowEuler) return s.family() == Family::Flow;
  if (spec.kind == Kind::Ddim) return true;
  return s.is_vp();
}

TimeGrid grid_for(SamplerSpec& spec, const Schedule& s, int nfe, GridRule rule) {
  if (nfe < 1) throw ParameterError("need at least one model evaluation");
  int per = spec.evals_per_step();
  int k = (nfe + per - 1) / per;
  int last = nfe - per * (k - 1);
  spec.opt.final_order = last == per ? 0 : last;
  return make_grid(s, k, rule);
}

Element sde_euler_step(const Schedule& s, double t, double t_prev, const Element& x, const Element& y,
                       const Element* eps) {
  require_vp(s, "sde-euler");
  double dt = t - t_prev;
  if (dt == 0) return x;
  double v = one_minus_alpha_bar(s, t);
  if (v <= 0) throw SingularError("score undefined at alpha_bar = 1");
  double s0 = std::sqrt(s.alpha_bar(t)) / v, st = -1.0 / v;
  double b = s.beta_rate(t);
  std::vector<Term> terms{{1 + dt * b * (0.5 + st), &x}, {dt * b * s0, &y}};
  if (eps) terms.push_back({std::sqrt(b * dt), eps});
  return lin_combine(terms);
}

Element ode_euler_step(const Schedule& s, double t, double t_prev, const Element& x, const Element& y) {
  require_vp(s, "ode-euler");
  double dt = t - t_prev;
  if (dt == 0) return x;
  double v = one_minus_alpha_bar(s, t);
  if (v <= 0) throw SingularError("score undefined at alpha_bar = 1");
  double s0 = std::sqrt(s.alpha_bar(t)) / v, st = -1.0 / v;
  double b = s.beta_rate(t);
  return lin_combine({{1 + dt * b * (0.5 + 0.5 * st), &x}, {0.5 * dt * b * s0, &y}});
}

namespace {

struct KernelArgs {
  const Schedule* sch;
  double t;
  const std::vector<double>* nodes;
  std::size_t j;
};

double kernel(double tau, void* p) {
  auto* a = static_cast<KernelArgs*>(p);
  const auto& n = *a->nodes;
  double l = 1;
  for (std::size_t m = 0; m < n.size(); ++m)
    if (m != a->j) l *= (tau - n[m]) / (n[a->j] - n[m]);
  double la_tau = a->sch->log_alpha_bar(tau);
  double sig = std::sqrt(-std::expm1(la_tau));
  double ratio = std::exp(0.5 * (a->sch->log_alpha_bar(a->t) - la_tau));
  return ratio * 0.5 * a->sch->beta_rate(tau) / sig * l;
}

struct Workspace {
  gsl_integration_workspace* w;
  explicit Workspace(std::size_t n) : w(gsl_integration_workspace_alloc(n)) {}
  ~Workspace() { gsl_integration_workspace_free(w); }
};

}  // namespace

std::vector<double> deis_weights(const Schedule& sch, double s, double t, const std::vector<double>& nodes,
                                 double rel_tol) {
  require_vp(sch, "deis");
  if (!(t < s)) throw ParameterError("deis step needs t < s");
  if (nodes.empty()) throw ParameterError("deis needs at least one history node");
  gsl_set_error_handler_off();
  constexpr std::size_t kLimit = 1000;
  Workspace ws(kLimit);

  // The discrete schedule has kinks at integer times.
  std::vector<double> cuts{t};
  if (sch.family() == Family::VpDiscrete)
    for (double k = std::floor(t) + 1; k < s; k += 1) cuts.push_back(k);
  cuts.push_back(s);

  std::vector<double> w(nodes.size());
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    KernelArgs args{&sch, t, &nodes, j};
    gsl_function f{&kernel, &args};
    double total = 0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      double val = 0, err = 0;
      int status = gsl_integration_qags(&f, cuts[c], cuts[c + 1], 0.0, rel_tol, kLimit, ws.w, &val, &err);
      if (status != GSL_SUCCESS && status != GSL_EROUND)
        throw NumericError("deis kernel quadrature failed on [" + std::to_string(cuts[c]) + ", " +
                           std::to_string(cuts[c + 1]) + "]: " + gsl_strerror(status) +
                           ", estimate " + std::to_string(val) + " +- " + std::to_string(err));
      total += val;
    }
    w[j] = -total;  // integral runs from s down to t
  }
  return w;
}

std::vector<DeisStep> deis_coeffs(int order, const Schedule& s, const TimeGrid& grid, double rel_tol) {
  require_vp(s, "deis");
  std::vector<DeisStep> out;
  std::vector<double> hist;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double a = grid.times[i], b = grid.next(i);
    hist.push_back(a);
    std::size_t k = std::min<std::size_t>(order + 1, hist.size());
    std::vector<double> nodes(hist.end() - k, hist.end());
    out.push_back({s.c0(b) / s.c0(a), deis_weights(s, a, b, nodes, rel_tol)});
  }
  return out;
}

Element x0_from_eps(const Schedule& s, double t, const Element& x, const Element& eps) {
  auto [c0, c1] = s.coeffs(t);
  if (c0 == 0) throw SingularError("x0 undefined at c0 = 0");
  return lin_combine({{1 / c0, &x}, {-c1 / c0, &eps}});
}

Element eps_from_x0(const Schedule& s, double t, const Element& x, const Element& x0) {
  auto [c0, c1] = s.coeffs(t);
  if (c1 == 0) throw SingularError("eps undefined at c1 = 0");
  return lin_combine({{1 / c1, &x}, {-c0 / c1, &x0}});
}

Element velocity_from_x0(double t, const Element& x, const Element& x0) {
  if (t == 0) throw SingularError("velocity undefined at t = 0");
  return lin_combine({{1 / t, &x}, {-1 / t, &x0}});
}

namespace {

struct Solver {
  const SamplerSpec& spec;
  const Schedule& sch;
  Context& ctx;
  std::vector<double>& times;

  Element model(double t, const Element& x) {
    times.push_back(t);
    return ctx.model(t, x);
  }
  double a(double t) const { return sch.c0(t); }
  double sg(double t) const { return sch.c1(t); }

  Element eps(double t, const Element& x, const Element& y) {
    return lin_combine({{1 / sg(t), &x}, {-a(t) / sg(t), &y}});
  }

  // One singlestep group from s to t with the given order.
  Element group(double s, double t, int order, const Element& x) {
    const bool pp = spec.kind == Kind::DpmSolverPP;
    double ls = sch.lambda(s), lt = sch.lambda(t), h = lt - ls;
    Element ys = model(s, x);
    if (order == 1) {
      if (pp) return lin_combine({{sg(t) / sg(s), &x}, {-a(t) * std::expm1(-h), &ys}});
      Element es = eps(s, x, ys);
      // sg(t) (e^h - 1) stays finite when t is noiseless
      double w = std::isinf(h) ? a(t) * sg(s) / a(s) : sg(t) * std::expm1(h);
      return lin_combine({{a(t) / a(s), &x}, {-w, &es}});
    }
    if (order == 2) {
      double r1 = spec.opt.r1 > 0 ? spec.opt.r1 : 0.5;
      double s1 = sch.t_from_lambda(ls + r1 * h);
      if (pp) {
        Element x1 = lin_combine({{sg(s1) / sg(s), &x}, {-a(s1) * std::expm1(-r1 * h), &ys}});
        Element y1 = model(s1, x1);
        double p1 = a(t) * std::expm1(-h);
        double k = 0.5 / r1;
        return lin_combine({{sg(t) / sg(s), &x}, {-p1 + k * p1, &ys}, {-k * p1, &y1}});
      }
      Element es = eps(s, x, ys);
      Element x1 = lin_combine({{a(s1) / a(s), &x}, {-sg(s1) * std::expm1(r1 * h), &es}});
      Element y1 = model(s1, x1);
      Element e1 = eps(s1, x1, y1);
      double p1 = sg(t) * std::expm1(h);
      double k = 0.5 / r1;
      return lin_combine({{a(t) / a(s), &x}, {-p1 + k * p1, &es}, {-k * p1, &e1}});
    }
    double r1 = spec.opt.r1 > 0 ? spec.opt.r1 : 1.0 / 3.0;
    double r2 = spec.opt.r2 > 0 ? spec.opt.r2 : 2.0 / 3.0;
    double s1 = sch.t_from_lambda(ls + r1 * h), s2 = sch.t_from_lambda(ls + r2 * h);
    if (pp) {
      double sign = spec.opt.correction_sign;
      double p11 = std::expm1(-r1 * h), p12 = std::expm1(-r2 * h), p1 = std::expm1(-h);
      double p22 = std::expm1(-r2 * h) / (r2 * h) + 1, p2 = p1 / h + 1;
      Element x1 = lin_combine({{sg(s1) / sg(s), &x}, {-a(s1) * p11, &ys}});
      Element y1 = model(s1, x1);
      double c2 = sign * (r2 / r1) * a(s2) * p22;
      Element x2 = lin_combine({{sg(s2) / sg(s), &x}, {-a(s2) * p12 - c2, &ys}, {c2, &y1}});
      Element y2 = model(s2, x2);
      double c3 = sign * (1 / r2) * a(t) * p2;
      return lin_combine({{sg(t) / sg(s), &x}, {-a(t) * p1 - c3, &ys}, {c3, &y2}});
    }
    double p11 = std::expm1(r1 * h), p12 = std::expm1(r2 * h), p1 = std::expm1(h);
    double p22 = std::expm1(r2 * h) / (r2 * h) - 1, p2 = p1 / h - 1;
    Element es = eps(s, x, ys);
    Element x1 = lin_combine({{a(s1) / a(s), &x}, {-sg(s1) * p11, &es}});
    Element y1 = model(s1, x1);
    Element e1 = eps(s1, x1, y1);
    double c2 = (r2 / r1) * sg(s2) * p22;
    Element x2 = lin_combine({{a(s2) / a(s), &x}, {-sg(s2) * p12 + c2, &es}, {-c2, &e1}});
    Element y2 = model(s2, x2);
    Element e2 = eps(s2, x2, y2);
    double c3 = (1 / r2) * sg(t) * p2;
    return lin_combine({{a(t) / a(s), &x}, {-sg(t) * p1 + c3, &es}, {-c3, &e2}});
  }
};

}  // namespace

Trajectory run_native(const SamplerSpec& spec, const Schedule& s, const TimeGrid& grid, Context& ctx) {
  if (!supports(spec, s)) throw ParameterError(spec.name() + " does not run on schedule " + s.str());
  if (grid.times.empty()) throw ParameterError("empty grid");
  Trajectory tr;
  Solver solver{spec, s, ctx, tr.times};
  Element x = ctx.noise({0, 0});
  const std::size_t n = grid.size();

  if (spec.kind == Kind::DpmSolver || spec.kind == Kind::DpmSolverPP) {
    for (std::size_t i = 0; i < n; ++i) {
      int order = (i + 1 == n && spec.opt.final_order > 0) ? spec.opt.final_order : spec.order;
      x = solver.group(grid.times[i], grid.next(i), order, x);
    }
    tr.output = std::move(x);
    return tr;
  }

  if (spec.kind == Kind::Deis) {
    std::vector<double> nodes;
    std::vector<Element> hist;
    for (std::size_t i = 0; i < n; ++i) {
      double a = grid.times[i], b = grid.next(i);
      Element y = solver.model(a, x);
      hist.push_back(solver.eps(a, x, y));
      nodes.push_back(a);
      std::size_t k = std::min<std::size_t>(spec.order + 1, nodes.size());
      std::vector<double> used(nodes.end() - k, nodes.end());
      auto w = deis_weights(s, a, b, used, spec.opt.quad_rel_tol);
      std::vector<Term> terms{{s.c0(b) / s.c0(a), &x}};
      for (std::size_t j = 0; j < k; ++j) terms.push_back({w[j], &hist[hist.size() - k + j]});
      x = lin_combine(terms);
    }
    tr.output = std::move(x);
    return tr;
  }

  for (std::size_t i = 0; i < n; ++i) {
    double t = grid.times[i], tp = grid.next(i);
    Element y = solver.model(t, x);
    const NoiseId fresh{static_cast<int>(i) + 1, 0};
    switch (spec.kind) {
      case Kind::Ddpm: {
        auto c = ddpm_step_coeffs(s, t, tp);
        if (c.g != 0) {
          Element e = ctx.noise(fresh);
          x = lin_combine({{c.d, &x}, {c.e, &y}, {c.g, &e}});
        } else {
          x = lin_combine({{c.d, &x}, {c.e, &y}});
        }
        break;
      }
      case Kind::Ddim: {
        auto c = ddim_step_coeffs(s, t, tp);
        x = lin_combine({{c.d, &x}, {c.e, &y}});
        break;
      }
      case Kind::FlowEuler: {
        auto c = flow_euler_step_coeffs(t, tp);
        x = lin_combine({{c.d, &x}, {c.e, &y}});
        break;
      }
      case Kind::SdeEuler: {
        Element e = ctx.noise(fresh);
        x = sde_euler_step(s, t, tp, x, y, &e);
        break;
      }
      case Kind::OdeEuler:
        x = ode_euler_step(s, t, tp, x, y);
        break;
      default:
        break;
    }
  }
  tr.output = std::move(x);
  return tr;
}

}  // namespace ni
