#include "outline_forge/prompts.hpp"

#include <algorithm>

#include "outline_forge/error.hpp"

namespace outline_forge {

namespace {

constexpr std::string_view kClassToken = "{class}";

constexpr std::string_view kNegativePrompt =
    "disfigured, kitsch, ugly, oversaturated, grain, low-res, Deformed, blurry, bad anatomy, disfigured, "
    "poorly drawn face, mutation, mutated, extra limb, ugly, poorly drawn hands, missing limb, blurry, "
    "floating limbs, disconnected limbs, malformed hands, long neck, long body, ugly, disgusting, poorly "
    "drawn, childish, mutilated, mangled, surreal";

bool has_control_chars(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x20 || u == 0x7f;
  });
}

std::string substitute(std::string_view pattern, std::string_view class_name) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = pattern.find(kClassToken, pos);
    out.append(pattern.substr(pos, hit == std::string_view::npos ? std::string_view::npos : hit - pos));
    if (hit == std::string_view::npos) break;
    out.append(class_name);
    pos = hit + kClassToken.size();
  }
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::from_name(std::string_view name) {
  if (name == "photo" || name == "default") return photo();
  if (name == "class") return class_only();
  if (name == "image-of") return image_of();
  if (name.find(kClassToken) == std::string_view::npos)
    throw Error(ErrorKind::InvalidPrompt,
                "custom prompt template must contain {class}: \"" + std::string(name) + "\"");
  return custom(std::string(name));
}

std::string_view default_negative_prompt() { return kNegativePrompt; }

PromptSpec build_prompt(std::string_view class_name, int instance_count, const PromptTemplate& tmpl,
                        bool use_negative, std::string_view negative_override) {
  if (class_name.empty()) throw Error(ErrorKind::EmptyClassName, "class name is empty");
  if (instance_count < 1) throw Error(ErrorKind::InvalidArgument, "instance_count must be >= 1");
  PromptSpec spec;
  spec.positive = substitute(instance_count > 1 ? tmpl.several : tmpl.single, class_name);
  if (use_negative) spec.negative = negative_override.empty() ? kNegativePrompt : negative_override;
  if (spec.positive.empty()) throw Error(ErrorKind::InvalidPrompt, "positive prompt is empty");
  if (has_control_chars(spec.positive) || has_control_chars(spec.negative))
    throw Error(ErrorKind::InvalidPrompt, "prompt contains control characters");
  return spec;
}

}  // namespace outline_forge
