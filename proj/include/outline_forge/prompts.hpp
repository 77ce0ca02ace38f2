#pragma once

#include <string>
#include <string_view>

namespace outline_forge {

struct PromptSpec {
  std::string positive;
  std::string negative;
  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

// "{class}" in either pattern is replaced by the class name. `several` is
// used when more than one instance is inpainted in one job.
struct PromptTemplate {
  std::string single;
  std::string several;

  static PromptTemplate photo() { return {"Photo of a {class}", "Photo of several {class}"}; }
  static PromptTemplate class_only() { return {"{class}", "{class}"}; }
  static PromptTemplate image_of() { return {"Image of {class}", "Image of {class}"}; }
  static PromptTemplate custom(std::string pattern) { return {pattern, pattern}; }

  // Accepts "photo" (alias "default"), "class", "image-of", or a custom
  // pattern containing "{class}".
  static PromptTemplate from_name(std::string_view name);
};

// Negative prompt used whenever negative guidance is enabled.
std::string_view default_negative_prompt();

PromptSpec build_prompt(std::string_view class_name, int instance_count,
                        const PromptTemplate& tmpl = PromptTemplate::photo(), bool use_negative = false,
                        std::string_view negative_override = {});

}  // namespace outline_forge
