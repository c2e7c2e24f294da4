#pragma once

#include <string>
#include <vector>

#include "ni/affine.hpp"
#include "ni/schedule.hpp"

namespace ni {

struct StepCoefficients {
  double d = 1, e = 0, g = 0;
};

StepCoefficients ddpm_step_coeffs(const Schedule& s, double t, double t_prev);
StepCoefficients ddim_step_coeffs(const Schedule& s, double t, double t_prev);
StepCoefficients flow_euler_step_coeffs(double t, double t_prev);

enum class Kind { Ddpm, Ddim, FlowEuler, SdeEuler, OdeEuler, DpmSolver, DpmSolverPP, Deis };

struct SamplerOptions {
  // Intermediate node ratios in lambda; 0 selects 1/2 for order 2 and 1/3, 2/3 for order 3.
  double r1 = 0, r2 = 0;
  // Sign of the order-3 correction terms of the data-prediction solver. The
  // published update uses +1.
  int correction_sign = 1;
  // Order of the last singlestep group; 0 keeps the full order.
  int final_order = 0;
  double quad_rel_tol = 1e-10;
};

struct SamplerSpec {
  Kind kind = Kind::Ddim;
  int order = 1;  // solver order for dpm kinds; polynomial degree for deis
  SamplerOptions opt;

  std::string name() const;
  bool first_order() const;
  // Model evaluations consumed per grid step.
  int evals_per_step() const;
};

// ddpm, ddim, flow-euler, sde-euler, ode-euler, dpm-solver-2s, dpm-solver-3s,
// dpmpp-2s, dpmpp-3s, deis-0 .. deis-3.
SamplerSpec parse_sampler(const std::string& name);
std::vector<std::string> sampler_names();
bool supports(const SamplerSpec& spec, const Schedule& s);

// Grid over which the sampler spends `nfe` model evaluations; adjusts
// spec.opt.final_order when nfe is not a multiple of the order.
TimeGrid grid_for(SamplerSpec& spec, const Schedule& s, int nfe, GridRule rule);

Element sde_euler_step(const Schedule& s, double t, double t_prev, const Element& x,
                       const Element& y, const Element* eps);
Element ode_euler_step(const Schedule& s, double t, double t_prev, const Element& x,
                       const Element& y);

// Weights of the exponential Adams-Bashforth step from s to t on the eps
// history at `nodes` (most recent last).
std::vector<double> deis_weights(const Schedule& sch, double s, double t,
                                 const std::vector<double>& nodes, double rel_tol = 1e-10);

struct DeisStep {
  double carry;                 // weight on x_s
  std::vector<double> weights;  // weights on eps at the history nodes
};
// Per-step coefficient lists for a whole grid with warm start.
std::vector<DeisStep> deis_coeffs(int order, const Schedule& s, const TimeGrid& grid,
                                  double rel_tol = 1e-10);

Element x0_from_eps(const Schedule& s, double t, const Element& x, const Element& eps);
Element eps_from_x0(const Schedule& s, double t, const Element& x, const Element& x0);
Element velocity_from_x0(double t, const Element& x, const Element& x0);

struct Trajectory {
  std::vector<double> times;  // model evaluation times, including interior nodes
  Element output;
};

Trajectory run_native(const SamplerSpec& spec, const Schedule& s, const TimeGrid& grid, Context& ctx);

}  // namespace ni
