#pragma once

#include <string>
#include <vector>

#include "ni/coeffmatrix.hpp"

namespace ni {

std::vector<std::string> preset_names();
bool has_preset(const std::string& name);
std::string preset_text(const std::string& name);
CoefficientMatrix preset(const std::string& name);

// A path to a matrix file, or a preset name.
CoefficientMatrix load_matrix_or_preset(const std::string& ref);

}  // namespace ni
