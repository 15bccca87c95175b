#include "cligym/templates.hpp"

#include "cligym/errors.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_templates();
}

namespace templates {

namespace {
std::string_view lookup(std::string_view name) {
  for (const auto& [key, bytes] : detail::embedded_templates()) {
    if (key == name) return bytes;
  }
  throw Error("unknown template: " + std::string(name));
}
}  // namespace

std::string_view run_tests() { return lookup("run_tests"); }
std::string_view degradation_prompt_initial() { return lookup("degradation_prompt_1"); }
std::string_view degradation_prompt_refine() { return lookup("degradation_prompt_2"); }
std::string_view degradation_instruction() { return lookup("degradation_instruction"); }
std::string_view repair_prompt_strong() { return lookup("repair_prompt_1"); }
std::string_view repair_prompt_weak() { return lookup("repair_prompt_2"); }
std::string_view repair_prompt_balanced() { return lookup("repair_prompt_3"); }
std::string_view repair_instruction() { return lookup("repair_instruction"); }

std::vector<std::pair<std::string, std::string>> all() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, bytes] : detail::embedded_templates()) {
    out.emplace_back(std::string(key), std::string(bytes));
  }
  return out;
}

}  // namespace templates

std::string substitute_template(
    std::string_view tpl,
    const std::vector<std::pair<std::string_view, std::string_view>>& values) {
  std::string out(tpl);
  for (const auto& [key, value] : values) {
    if (out.find(key) == std::string::npos) {
      throw Error("placeholder not found in template: " + std::string(key));
    }
    out = replace_all(std::move(out), key, value);
  }
  return out;
}

}  // namespace cligym
