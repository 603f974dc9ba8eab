#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace intent_rnnt {

// Every failure surfaced by the library carries one of these categories.
// The CLI maps them to distinct exit codes.
enum class ErrorCategory {
  kDimension,
  kArgument,
  kConfiguration,
  kParse,
  kIntegrity,
  kEvaluation,
  kSpec,
  kIo,
};

std::string_view category_name(ErrorCategory category);
int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define INTENT_RNNT_DEFINE_ERROR(Name, Category)                  \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& message)                     \
        : Error(ErrorCategory::Category, message) {}              \
  };

INTENT_RNNT_DEFINE_ERROR(DimensionError, kDimension)
INTENT_RNNT_DEFINE_ERROR(ArgumentError, kArgument)
INTENT_RNNT_DEFINE_ERROR(ConfigError, kConfiguration)
INTENT_RNNT_DEFINE_ERROR(ParseError, kParse)
INTENT_RNNT_DEFINE_ERROR(IntegrityError, kIntegrity)
INTENT_RNNT_DEFINE_ERROR(EvaluationError, kEvaluation)
INTENT_RNNT_DEFINE_ERROR(SpecError, kSpec)
INTENT_RNNT_DEFINE_ERROR(IoError, kIo)

#undef INTENT_RNNT_DEFINE_ERROR

}  // namespace intent_rnnt
