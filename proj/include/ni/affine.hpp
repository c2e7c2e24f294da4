#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <utility>
#include <variant>
#include <vector>

namespace ni {

using Vec = std::vector<double>;

// Noise draws are identified by (step, draw); step 0 is the initial noise.
struct NoiseId {
  int step = 0;
  int draw = 0;
  auto operator<=>(const NoiseId&) const = default;
};

// Exact affine combination of model outputs y_i (keyed by evaluation index)
// and noise draws.
struct AffineState {
  std::map<int, double> signal;
  std::map<NoiseId, double> noise;

  static AffineState model_output(int index) { return AffineState{{{index, 1.0}}, {}}; }
  static AffineState noise_basis(NoiseId id) { return AffineState{{}, {{id, 1.0}}}; }

  double signal_sum() const;
  double noise_norm() const;
  bool operator==(const AffineState&) const = default;
};

using Element = std::variant<Vec, AffineState>;

struct Term {
  double coeff;
  const Element* element;
};

Element lin_combine(const std::vector<Term>& terms);

inline Element lin_combine(std::initializer_list<Term> terms) {
  return lin_combine(std::vector<Term>(terms));
}

// Evaluate an affine state against concrete outputs and noises.
Vec evaluate(const AffineState& a, const std::vector<Vec>& outputs,
             const std::map<NoiseId, Vec>& noises);

// Standard-normal vector, a pure function of (seed, sample, id).
Vec draw_noise(std::uint64_t seed, std::uint64_t sample, NoiseId id, std::size_t dim);

using Predictor = std::function<Vec(double t, const Vec& x)>;

class Context {
 public:
  virtual ~Context() = default;
  virtual Element noise(NoiseId id) = 0;
  virtual Element model(double t, const Element& x) = 0;
};

class TraceContext : public Context {
 public:
  Element noise(NoiseId id) override;
  Element model(double t, const Element& x) override;

  const std::vector<double>& times() const { return times_; }
  const std::vector<AffineState>& inputs() const { return inputs_; }
  const std::vector<NoiseId>& noise_order() const { return noise_order_; }
  // Index of the model input in which each noise first appears.
  int first_use(NoiseId id) const;

 private:
  std::vector<double> times_;
  std::vector<AffineState> inputs_;
  std::set<NoiseId> used_;
  std::vector<NoiseId> noise_order_;
};

class ConcreteContext : public Context {
 public:
  ConcreteContext(Predictor f, std::size_t dim, std::uint64_t seed, std::uint64_t sample = 0);

  Element noise(NoiseId id) override;
  Element model(double t, const Element& x) override;

  const std::vector<Vec>& outputs() const { return outputs_; }
  const std::vector<Vec>& inputs() const { return inputs_; }
  const std::map<NoiseId, Vec>& noises() const { return noises_; }

 private:
  Predictor f_;
  std::size_t dim_;
  std::uint64_t seed_, sample_;
  std::vector<Vec> inputs_, outputs_;
  std::map<NoiseId, Vec> noises_;
};

}  // namespace ni
