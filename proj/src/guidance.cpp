#include "ni/guidance.hpp"

#include <algorithm>
#include <cmath>

#include "ni/errors.hpp"

namespace ni {

std::string to_string(GuidanceClass c) {
  switch (c) {
    case GuidanceClass::Fore:
      return "fore";
    case GuidanceClass::Mid:
      return "mid";
    case GuidanceClass::Back:
      return "back";
    case GuidanceClass::Degenerate:
      return "degenerate";
  }
  return "?";
}

std::string to_string(RowSummary s) {
  switch (s) {
    case RowSummary::AllMid:
      return "all-mid";
    case RowSummary::HasFore:
      return "has-fore";
    case RowSummary::HasBack:
      return "has-back";
    case RowSummary::Mixed:
      return "mixed";
    case RowSummary::Single:
      return "single";
  }
  return "?";
}

GuidanceClass classify_lambda(double lambda) {
  if (lambda == 0 || lambda == 1) return GuidanceClass::Degenerate;
  if (lambda > 1) return GuidanceClass::Fore;
  if (lambda < 0) return GuidanceClass::Back;
  return GuidanceClass::Mid;
}

Element cfg_combine(const Element& bad, const Element& good, double lambda) {
  return lin_combine({{1 - lambda, &bad}, {lambda, &good}});
}

ScaledStage classify_pair(double a, double b) {
  double s = a + b;
  if (s == 0) throw NumericError("degenerate pair: coefficients sum to zero");
  GuidanceStage g;
  g.eta_good = a / s;
  g.eta_bad = b / s;
  g.lambda = g.eta_good;
  g.cls = classify_lambda(g.lambda);
  return {g, s};
}

GuidanceDecomposition decompose_row(const std::vector<double>& coeffs, FoldOrder order) {
  GuidanceDecomposition d;
  d.order = order;
  d.coeffs = coeffs;
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    if (coeffs[i] != 0) d.support.push_back(i);
  if (d.support.size() < 2) throw ParameterError("decomposition needs at least two nonzero terms");
  const bool oldest = order == FoldOrder::OldestFirst;
  if (!oldest) std::reverse(d.support.begin(), d.support.end());

  double acc = coeffs[d.support[0]];
  for (std::size_t k = 1; k < d.support.size(); ++k) {
    double c = coeffs[d.support[k]];
    if (acc + c == 0)
      throw NumericError("fold singularity: prefix sum vanishes after " + std::to_string(k + 1) + " terms");
    d.stages.push_back(oldest ? classify_pair(c, acc) : classify_pair(acc, c));
    acc += c;
  }
  return d;
}

std::vector<double> GuidanceDecomposition::unfold() const {
  std::vector<double> out(coeffs.size(), 0.0);
  if (stages.empty()) return out;
  const bool oldest = order == FoldOrder::OldestFirst;
  double w = stages.back().scale;
  for (std::size_t k = stages.size(); k-- > 0;) {
    const auto& g = stages[k].stage;
    out[support[k + 1]] = w * (oldest ? g.eta_good : g.eta_bad);
    w *= oldest ? g.eta_bad : g.eta_good;
  }
  out[support[0]] = w;
  return out;
}

RowSummary classify_row(const std::vector<double>& coeffs) {
  std::vector<double> nz;
  for (double c : coeffs)
    if (c != 0) nz.push_back(c);
  if (nz.empty()) return RowSummary::Single;
  bool neg_before = false;
  for (std::size_t i = 0; i + 1 < nz.size(); ++i) neg_before |= nz[i] < 0;
  bool neg_diag = nz.back() < 0;
  if (!neg_before && !neg_diag) return RowSummary::AllMid;
  if (neg_before && neg_diag) return RowSummary::Mixed;
  return neg_before ? RowSummary::HasFore : RowSummary::HasBack;
}

std::vector<RowSummary> classify_matrix(const CoefficientMatrix& m) {
  std::vector<RowSummary> out;
  for (const auto& row : m.signal) out.push_back(classify_row(row));
  return out;
}

}  // namespace ni
