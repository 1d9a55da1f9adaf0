#include "care/dimension.hpp"

#include <string>

#include "care/errors.hpp"

namespace care {

namespace {

constexpr std::array<std::string_view, kNumDimensions> kKeys = {
    "non_judgmental",     "warmth_encouragement", "respect_autonomy",
    "active_listening",   "reflecting_feelings",  "situational_appropriateness",
};

constexpr std::array<std::string_view, kNumDimensions> kDisplayNames = {
    "Non-Judgmental Language", "Warmth and Encouragement",
    "Respect for Autonomy",    "Active Listening",
    "Reflecting Feelings",     "Situational Appropriateness",
};

}  // namespace

std::string_view to_key(Dimension d) noexcept {
  return kKeys[dimension_index(d)];
}

std::optional<Dimension> dimension_from_key(std::string_view key) noexcept {
  for (std::size_t i = 0; i < kNumDimensions; ++i) {
    if (kKeys[i] == key) return kAllDimensions[i];
  }
  return std::nullopt;
}

std::string_view display_name(Dimension d) noexcept {
  return kDisplayNames[dimension_index(d)];
}

std::size_t label_to_class(int label) {
  if (!is_valid_label(label)) {
    throw LabelOutOfRangeError("label " + std::to_string(label) +
                               " outside [-2, +2]");
  }
  return static_cast<std::size_t>(label - kMinLabel);
}

}  // namespace care
