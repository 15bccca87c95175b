#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cligym {

/// Accessors for the fixed prompt and script templates shipped inside the
/// binary. The returned views are the exact template bytes; substitution
/// happens elsewhere and only ever touches `{placeholder}` spans.
namespace templates {

std::string_view run_tests();
std::string_view degradation_prompt_initial();
std::string_view degradation_prompt_refine();
std::string_view degradation_instruction();
std::string_view repair_prompt_strong();
std::string_view repair_prompt_weak();
std::string_view repair_prompt_balanced();
std::string_view repair_instruction();

/// (name, bytes) pairs for every embedded template, for dump-templates.
std::vector<std::pair<std::string, std::string>> all();

}  // namespace templates

/// Replaces every occurrence of `{key}` entries. Throws Error if a
/// requested placeholder does not occur in the template.
std::string substitute_template(
    std::string_view tpl,
    const std::vector<std::pair<std::string_view, std::string_view>>& values);

}  // namespace cligym
