#pragma once

#include <span>
#include <string_view>

namespace vrag::prompt::detail {

struct EmbeddedAsset {
  std::string_view id;
  std::string_view text;
};

// Defined in a source file generated at configure time from assets/templates.
std::span<const EmbeddedAsset> embedded_templates();

}  // namespace vrag::prompt::detail
