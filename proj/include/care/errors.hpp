#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace care {

// Every pipeline failure derives from Error; kind() is the stable name used
// in structured CLI error output.
class Error : public std::runtime_error {
 public:
  Error(std::string_view kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  std::string_view kind() const noexcept { return kind_; }

 private:
  std::string_view kind_;
};

#define CARE_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& message)                     \
        : Error(#Name, message) {}                                \
  }

// corpus
CARE_DEFINE_ERROR(ParseError);
CARE_DEFINE_ERROR(DuplicateIdError);
CARE_DEFINE_ERROR(AnnotationTargetError);
CARE_DEFINE_ERROR(TooFewSessionsError);
// context
CARE_DEFINE_ERROR(NotTherapistTurnError);
CARE_DEFINE_ERROR(TurnNotFoundError);
// exemplar index
CARE_DEFINE_ERROR(ProviderError);
CARE_DEFINE_ERROR(IOError);
CARE_DEFINE_ERROR(VersionMismatchError);
// distill / baselines
CARE_DEFINE_ERROR(EmptyTargetError);
CARE_DEFINE_ERROR(CacheIOError);
CARE_DEFINE_ERROR(TeacherError);
CARE_DEFINE_ERROR(EmptyDemonstrationError);
CARE_DEFINE_ERROR(ScoreParseFailure);
// model
CARE_DEFINE_ERROR(BackboneError);
CARE_DEFINE_ERROR(InputTooLongError);
CARE_DEFINE_ERROR(ShapeMismatchError);
CARE_DEFINE_ERROR(LabelOutOfRangeError);
CARE_DEFINE_ERROR(DataLeakageError);
CARE_DEFINE_ERROR(NonFiniteLossError);
CARE_DEFINE_ERROR(FingerprintMismatchError);
// metrics
CARE_DEFINE_ERROR(EmptyEvaluationError);
CARE_DEFINE_ERROR(LengthMismatchError);
CARE_DEFINE_ERROR(EmptyInputError);
// cli
CARE_DEFINE_ERROR(MissingArtifactError);
CARE_DEFINE_ERROR(ConfigError);

#undef CARE_DEFINE_ERROR

}  // namespace care
