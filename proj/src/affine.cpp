#include "ni/affine.hpp"

#include <cmath>
#include <random>

#include "ni/errors.hpp"

namespace ni {
namespace {

// Neumaier compensated accumulator.
struct Sum {
  double s = 0, c = 0;
  void add(double x) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

template <class K>
void accumulate(std::map<K, Sum>& acc, const std::map<K, double>& src, double k) {
  for (const auto& [key, v] : src) acc[key].add(k * v);
}

template <class K>
std::map<K, double> collapse(const std::map<K, Sum>& acc) {
  std::map<K, double> out;
  for (const auto& [key, s] : acc) out.emplace_hint(out.end(), key, s.value());
  return out;
}

}  // namespace

double AffineState::signal_sum() const {
  Sum s;
  for (const auto& [k, v] : signal) s.add(v);
  return s.value();
}

double AffineState::noise_norm() const {
  Sum s;
  for (const auto& [k, v] : noise) s.add(v * v);
  return std::sqrt(s.value());
}

Element lin_combine(const std::vector<Term>& terms) {
  if (terms.empty()) throw ProtocolError("lin_combine needs at least one term");
  for (const auto& t : terms)
    if (!std::isfinite(t.coeff)) throw NumericError("non-finite coefficient in lin_combine");
  const bool affine = std::holds_alternative<AffineState>(*terms.front().element);
  for (const auto& t : terms)
    if (std::holds_alternative<AffineState>(*t.element) != affine)
      throw ProtocolError("lin_combine mixes concrete and affine elements");

  if (affine) {
    std::map<int, Sum> sig;
    std::map<NoiseId, Sum> noi;
    for (const auto& t : terms) {
      const auto& a = std::get<AffineState>(*t.element);
      accumulate(sig, a.signal, t.coeff);
      accumulate(noi, a.noise, t.coeff);
    }
    return AffineState{collapse(sig), collapse(noi)};
  }

  const std::size_t d = std::get<Vec>(*terms.front().element).size();
  for (const auto& t : terms)
    if (std::get<Vec>(*t.element).size() != d) throw ValidationError("dimension mismatch in lin_combine");
  Vec out(d);
  for (std::size_t i = 0; i < d; ++i) {
    Sum s;
    for (const auto& t : terms) s.add(t.coeff * std::get<Vec>(*t.element)[i]);
    out[i] = s.value();
  }
  return out;
}

Vec evaluate(const AffineState& a, const std::vector<Vec>& outputs,
             const std::map<NoiseId, Vec>& noises) {
  std::vector<Term> terms;
  std::vector<Element> holders;
  holders.reserve(a.signal.size() + a.noise.size());
  for (const auto& [k, v] : a.signal) {
    if (k < 0 || k >= static_cast<int>(outputs.size())) throw ProtocolError("missing model output");
    holders.emplace_back(outputs[k]);
  }
  for (const auto& [id, v] : a.noise) {
    auto it = noises.find(id);
    if (it == noises.end()) throw ProtocolError("missing noise draw");
    holders.emplace_back(it->second);
  }
  std::size_t i = 0;
  for (const auto& [k, v] : a.signal) terms.push_back({v, &holders[i++]});
  for (const auto& [id, v] : a.noise) terms.push_back({v, &holders[i++]});
  if (terms.empty()) {
    std::size_t d = !outputs.empty() ? outputs.front().size()
                    : !noises.empty() ? noises.begin()->second.size() : 0;
    return Vec(d, 0.0);
  }
  return std::get<Vec>(lin_combine(terms));
}

Vec draw_noise(std::uint64_t seed, std::uint64_t sample, NoiseId id, std::size_t dim) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(sample >> 32),
                    static_cast<std::uint32_t>(id.step), static_cast<std::uint32_t>(id.draw)};
  std::mt19937_64 gen(seq);
  std::normal_distribution<double> normal;
  Vec v(dim);
  for (auto& x : v) x = normal(gen);
  return v;
}

Element TraceContext::noise(NoiseId id) {
  if (!used_.insert(id).second) throw ProtocolError("noise id reused");
  noise_order_.push_back(id);
  return AffineState::noise_basis(id);
}

Element TraceContext::model(double t, const Element& x) {
  if (!std::holds_alternative<AffineState>(x)) throw ProtocolError("trace context got a concrete state");
  times_.push_back(t);
  inputs_.push_back(std::get<AffineState>(x));
  return AffineState::model_output(static_cast<int>(inputs_.size()) - 1);
}

int TraceContext::first_use(NoiseId id) const {
  for (std::size_t i = 0; i < inputs_.size(); ++i)
    if (inputs_[i].noise.count(id)) return static_cast<int>(i);
  return static_cast<int>(inputs_.size());
}

ConcreteContext::ConcreteContext(Predictor f, std::size_t dim, std::uint64_t seed, std::uint64_t sample)
    : f_(std::move(f)), dim_(dim), seed_(seed), sample_(sample) {}

Element ConcreteContext::noise(NoiseId id) {
  if (noises_.count(id)) throw ProtocolError("noise id reused");
  Vec v = draw_noise(seed_, sample_, id, dim_);
  noises_.emplace(id, v);
  return v;
}

Element ConcreteContext::model(double t, const Element& x) {
  if (!std::holds_alternative<Vec>(x)) throw ProtocolError("concrete context got an affine state");
  const auto& v = std::get<Vec>(x);
  if (v.size() != dim_) throw ValidationError("predictor input has wrong dimension");
  inputs_.push_back(v);
  Vec y = f_(t, v);
  if (y.size() != dim_) throw ValidationError("predictor output has wrong dimension");
  outputs_.push_back(y);
  return y;
}

}  // namespace ni
