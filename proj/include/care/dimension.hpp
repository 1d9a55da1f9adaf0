#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace care {

/// The six therapeutic principles every therapist utterance is scored on.
enum class Dimension {
  NonJudgmental,
  WarmthEncouragement,
  RespectAutonomy,
  ActiveListening,
  ReflectingFeelings,
  SituationalAppropriateness,
};

inline constexpr std::size_t kNumDimensions = 6;
inline constexpr std::size_t kNumClasses = 5;
inline constexpr int kMinLabel = -2;
inline constexpr int kMaxLabel = 2;

inline constexpr std::array<Dimension, kNumDimensions> kAllDimensions = {
    Dimension::NonJudgmental,      Dimension::WarmthEncouragement,
    Dimension::RespectAutonomy,    Dimension::ActiveListening,
    Dimension::ReflectingFeelings, Dimension::SituationalAppropriateness,
};

/// One ordinal label per dimension, indexed by dimension_index().
using Labels = std::array<int, kNumDimensions>;

constexpr std::size_t dimension_index(Dimension d) noexcept {
  return static_cast<std::size_t>(d);
}

/// Serialized key used in JSON files ("non_judgmental", ...).
std::string_view to_key(Dimension d) noexcept;
std::optional<Dimension> dimension_from_key(std::string_view key) noexcept;

/// Human-readable principle name ("Active Listening", ...).
std::string_view display_name(Dimension d) noexcept;

// Label <-> class index is fixed: -2 -> 0, ..., +2 -> 4.
constexpr bool is_valid_label(int label) noexcept {
  return label >= kMinLabel && label <= kMaxLabel;
}
/// Throws LabelOutOfRangeError for labels outside [-2, +2].
std::size_t label_to_class(int label);
constexpr int class_to_label(std::size_t cls) noexcept {
  return static_cast<int>(cls) + kMinLabel;
}

}  // namespace care
