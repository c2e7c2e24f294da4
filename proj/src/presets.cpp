#include "ni/presets.hpp"

#include <filesystem>
#include <string_view>
#include <utility>

#include "ni/errors.hpp"

namespace ni {
namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& preset_table();
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : detail::preset_table()) out.emplace_back(name);
  return out;
}

bool has_preset(const std::string& name) {
  for (const auto& [n, text] : detail::preset_table())
    if (n == name) return true;
  return false;
}

std::string preset_text(const std::string& name) {
  for (const auto& [n, text] : detail::preset_table())
    if (n == name) return std::string(text);
  throw ParameterError("unknown preset: " + name);
}

CoefficientMatrix preset(const std::string& name) { return parse_matrix(preset_text(name)); }

CoefficientMatrix load_matrix_or_preset(const std::string& ref) {
  if (std::filesystem::exists(ref)) return load(ref);
  if (has_preset(ref)) return preset(ref);
  throw IoError("no such matrix file or preset: " + ref);
}

}  // namespace ni
