#pragma once

#include <string>
#include <vector>

#include "ni/affine.hpp"
#include "ni/coeffmatrix.hpp"

namespace ni {

enum class GuidanceClass { Fore, Mid, Back, Degenerate };
std::string to_string(GuidanceClass c);

struct GuidanceStage {
  double eta_good = 0, eta_bad = 0;
  double lambda = 0;
  GuidanceClass cls = GuidanceClass::Degenerate;
};

GuidanceClass classify_lambda(double lambda);

// bad + lambda (good - bad)
Element cfg_combine(const Element& bad, const Element& good, double lambda);

struct ScaledStage {
  GuidanceStage stage;
  double scale;
};
// a * good + b * bad = scale * (eta_good good + eta_bad bad)
ScaledStage classify_pair(double a, double b);

enum class FoldOrder { OldestFirst, NewestFirst };

// In every stage the newer side is the good term.
struct GuidanceDecomposition {
  FoldOrder order = FoldOrder::OldestFirst;
  std::vector<ScaledStage> stages;   // innermost first
  std::vector<double> coeffs;        // the input row
  std::vector<std::size_t> support;  // nonzero terms in fold order
  std::vector<double> unfold() const;
};

GuidanceDecomposition decompose_row(const std::vector<double>& coeffs, FoldOrder order = FoldOrder::OldestFirst);

enum class RowSummary { AllMid, HasFore, HasBack, Mixed, Single };
std::string to_string(RowSummary s);
RowSummary classify_row(const std::vector<double>& coeffs);
std::vector<RowSummary> classify_matrix(const CoefficientMatrix& m);

}  // namespace ni
